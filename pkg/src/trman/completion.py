"""Sampled tensor completion objective: observations on an index set, the
half squared misfit, and Euclidean gradients for ring and uniform-ring
parametrizations.

Gradients stream over the observed indices with prefix/suffix slice-product
chains (cost O(|samples| d r^3)); the dense subchain matrices are never
materialized. The dense route exists in :mod:`trman.tr` for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, tr
from .errors import ParseError
from .tensor import check_shape

__all__ = [
    "SampleSet",
    "CompletionProblem",
    "sampled_values",
    "residual",
    "objective",
    "euclidean_gradient",
    "utr_euclidean_gradient",
    "relative_error",
    "read_samples",
    "write_samples",
]


class SampleSet:
    """Observed entries: an ``(m, d)`` array of 0-based indices, strictly
    lexicographically sorted and unique, with matching values."""

    __slots__ = ("dims", "indices", "values")

    def __init__(self, dims, indices, values):
        self.dims = check_shape(dims)
        idx = np.ascontiguousarray(np.asarray(indices, dtype=np.int64))
        vals = np.asarray(values, dtype=np.float64)
        if idx.ndim != 2 or idx.shape[1] != len(self.dims):
            raise ValueError(f"indices must be (m, {len(self.dims)}), got {idx.shape}")
        if vals.shape != (idx.shape[0],):
            raise ValueError("index count and value count differ")
        if idx.shape[0]:
            if idx.min() < 0 or np.any(idx >= np.asarray(self.dims, dtype=np.int64)):
                raise ValueError(f"sample index out of range for dims {self.dims}")
            order = np.lexsort(idx.T[::-1])
            idx = idx[order]
            vals = vals[order]
            if np.any(np.all(idx[1:] == idx[:-1], axis=1)):
                raise ValueError("duplicate sample indices")
        self.indices = idx
        self.values = vals
        self.indices.flags.writeable = False
        self.values.flags.writeable = False

    def __len__(self):
        return self.indices.shape[0]

    def linear_offsets(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.ravel_multi_index(self.indices.T, self.dims, order="F")

    @classmethod
    def random_indices(cls, dims, count: int, rng) -> np.ndarray:
        """Draw ``count`` unique indices uniformly from the full grid."""
        dims = check_shape(dims)
        total = int(np.prod(np.asarray(dims, dtype=np.int64)))
        if count > total:
            raise ValueError(f"cannot draw {count} unique samples from {total} entries")
        offsets = rng.choice(total, size=count, replace=False)
        offsets.sort()
        return np.stack(np.unravel_index(offsets, dims, order="F"), axis=1).astype(np.int64)

    @classmethod
    def disjoint_random_indices(cls, dims, count: int, exclude_offsets, rng) -> np.ndarray:
        """Draw ``count`` unique indices avoiding the given linear offsets."""
        dims = check_shape(dims)
        total = int(np.prod(np.asarray(dims, dtype=np.int64)))
        exclude = np.asarray(exclude_offsets, dtype=np.int64)
        if count > total - exclude.size:
            raise ValueError(
                f"cannot draw {count} entries disjoint from {exclude.size} of {total}"
            )
        if total <= 10**7:
            pool = np.setdiff1d(np.arange(total, dtype=np.int64), exclude)
            picked = pool[np.sort(rng.choice(pool.size, size=count, replace=False))]
        else:
            # grid too large to enumerate: rejection-sample offsets
            taken = set(exclude.tolist())
            picks: list[int] = []
            while len(picks) < count:
                batch = rng.integers(0, total, size=max(2 * count, 16))
                for off in batch.tolist():
                    if off not in taken:
                        taken.add(off)
                        picks.append(off)
                        if len(picks) == count:
                            break
            picked = np.array(sorted(picks), dtype=np.int64)
        return np.stack(np.unravel_index(picked, dims, order="F"), axis=1).astype(np.int64)

    @classmethod
    def from_cores(cls, u, indices) -> "SampleSet":
        """Evaluate a core representation at the given indices."""
        indices = np.ascontiguousarray(np.asarray(indices, dtype=np.int64))
        vals = kernels.sampled_values(u.pack(), indices)
        return cls(u.dims, indices, vals)


@dataclass
class CompletionProblem:
    """Recover a tensor from observed entries at a prescribed ring rank.

    ``rank`` is a rank tuple for the ring parametrization or a single
    integer for the uniform one. ``lam`` adds ``lam/2 * ||cores||^2`` to the
    objective (off by default; the misfit alone matches the recovery
    experiments)."""

    shape: tuple
    rank: object
    samples: SampleSet
    holdout: SampleSet | None = None
    lam: float = 0.0

    def __post_init__(self):
        self.shape = check_shape(self.shape)
        if self.samples.dims != self.shape:
            raise ValueError("sample dims do not match problem shape")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.holdout is not None:
            if self.holdout.dims != self.shape:
                raise ValueError("holdout dims do not match problem shape")
            common = np.intersect1d(
                self.samples.linear_offsets(), self.holdout.linear_offsets()
            )
            if common.size:
                raise ValueError("holdout overlaps the training samples")


def sampled_values(u, omega: SampleSet) -> np.ndarray:
    """Values of the represented tensor at the sample indices."""
    if u.dims != omega.dims:
        raise ValueError(f"core dims {u.dims} != sample dims {omega.dims}")
    return kernels.sampled_values(u.pack(), omega.indices)


def residual(u, omega: SampleSet) -> np.ndarray:
    return sampled_values(u, omega) - omega.values


def cores_sq_norm(u) -> float:
    """Squared Frobenius norm of the parametrization (the ridge term base)."""
    if isinstance(u, tr.UtrCore):
        return float(np.vdot(u.core, u.core))
    return float(sum(np.vdot(c, c) for c in u.cores))


def objective(p: CompletionProblem, u) -> float:
    """Half squared misfit on the samples, plus the optional ridge term."""
    r = residual(u, p.samples)
    val = 0.5 * float(np.dot(r, r))
    if p.lam > 0:
        val += 0.5 * p.lam * cores_sq_norm(u)
    return val


def euclidean_gradient(
    p: CompletionProblem, u: tr.TrCores, resid_values: np.ndarray | None = None
) -> tuple[np.ndarray, ...]:
    """Per-core gradient parts of :func:`objective` for ring cores.

    ``resid_values`` can pass a residual already computed at ``u`` to save
    one sampled evaluation."""
    pack = u.pack()
    r = residual(u, p.samples) if resid_values is None else resid_values
    flat = kernels.completion_gradient(pack, p.samples.indices, r)
    parts = kernels.unpack_parts(pack, flat)
    if p.lam > 0:
        parts = [g + p.lam * c for g, c in zip(parts, u.cores)]
    return tuple(parts)


def utr_euclidean_gradient(
    p: CompletionProblem, c: tr.UtrCore, resid_values: np.ndarray | None = None
) -> np.ndarray:
    """Gradient for the uniform parametrization: the d positional gradients
    of the replicated ring collapse onto the single shared core; the ridge
    term contributes ``lam * U`` once."""
    pack = c.pack()
    r = residual(c, p.samples) if resid_values is None else resid_values
    flat = kernels.completion_gradient(pack, p.samples.indices, r)
    parts = kernels.unpack_parts(pack, flat)
    g = np.zeros_like(c.core)
    for part in parts:
        g += part
    if p.lam > 0:
        g = g + p.lam * c.core
    return g


def relative_error(u, reference) -> float:
    """Relative Frobenius error of the represented tensor against a dense
    reference tensor or against the entries of a :class:`SampleSet`."""
    if isinstance(reference, SampleSet):
        if len(reference) == 0:
            raise ValueError("empty reference sample set")
        ref_norm = float(np.linalg.norm(reference.values))
        if ref_norm == 0:
            raise ValueError("reference has zero norm")
        return float(np.linalg.norm(residual(u, reference))) / ref_norm
    ref = np.asarray(reference, dtype=np.float64)
    ref_norm = float(np.linalg.norm(ref.ravel()))
    if ref_norm == 0:
        raise ValueError("reference has zero norm")
    full = tr.utr_full(u) if isinstance(u, tr.UtrCore) else tr.tr_full(u)
    return float(np.linalg.norm((full - ref).ravel())) / ref_norm


def write_samples(path, s: SampleSet) -> None:
    """Text format: header ``d n_1 ... n_d m``; then m lines
    ``i_1 ... i_d value`` with 1-based indices."""
    with open(path, "w") as f:
        f.write(
            f"{len(s.dims)} " + " ".join(str(n) for n in s.dims) + f" {len(s)}\n"
        )
        for row, val in zip(s.indices, s.values):
            f.write(" ".join(str(int(i) + 1) for i in row) + f" {val:.17g}\n")


def read_samples(path) -> SampleSet:
    with open(path) as f:
        lines = f.readlines()
    if not lines:
        raise ParseError("empty file", path, 1)
    head = lines[0].split()
    try:
        d = int(head[0])
        dims = tuple(int(x) for x in head[1 : 1 + d])
        m = int(head[1 + d])
    except (ValueError, IndexError):
        raise ParseError("malformed header, expected 'd n_1 ... n_d m'", path, 1)
    if len(head) != d + 2:
        raise ParseError("malformed header, expected 'd n_1 ... n_d m'", path, 1)
    idx = np.empty((m, d), dtype=np.int64)
    vals = np.empty(m)
    row = 0
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        if row >= m:
            raise ParseError(f"more than {m} sample lines", path, ln)
        if len(parts) != d + 1:
            raise ParseError(f"expected {d} indices and a value", path, ln)
        try:
            idx[row] = [int(x) - 1 for x in parts[:d]]
            vals[row] = float(parts[d])
        except ValueError:
            raise ParseError("malformed sample line", path, ln)
        row += 1
    if row != m:
        raise ParseError(f"got {row} samples, header promised {m}", path, len(lines))
    try:
        return SampleSet(dims, idx, vals)
    except ValueError as e:
        raise ParseError(str(e), path)
