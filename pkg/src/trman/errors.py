"""Exception types shared across the package."""


class ParseError(Exception):
    """A text input file could not be parsed.

    Carries the offending file name and 1-based line number so the CLI can
    report them.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}:"
            if line is not None:
                loc += f"{line}:"
            loc += " "
        super().__init__(loc + message)


class ResourceLimitError(RuntimeError):
    """A requested dense materialization exceeds the configured size cap."""


class RankDeficiencyWarning(UserWarning):
    """A projection system or least-squares solve was numerically rank
    deficient; a minimum-norm solution was used."""
