"""Tensor ring and uniform tensor ring representations.

A tensor ring holds d order-3 cores, core k shaped ``(r_k, n_k, r_{k+1})``
with the cyclic convention ``r_{d+1} = r_1``. Entry ``(i_1, ..., i_d)`` of
the represented tensor is the trace of the ordered product of the lateral
slices ``U_k[:, i_k, :]``. The uniform variant repeats one core d times.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from . import kernels, tensor
from .errors import ParseError, ResourceLimitError

__all__ = [
    "TrCores",
    "UtrCore",
    "GaugeElement",
    "tr_entry",
    "tr_full",
    "utr_entry",
    "utr_full",
    "subchain",
    "core_unfold2",
    "gauge_apply",
    "injectivity_check",
    "InjectivityReport",
    "CoreInjectivity",
    "random_cores",
    "random_utr_core",
    "read_tr_cores",
    "write_tr_cores",
]

# Dense materialization cap (entries) for tr_full / subchain intermediates.
DEFAULT_FULL_CAP = 10**8


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


class TrCores:
    """Immutable ordered list of ring cores with compatible ranks."""

    __slots__ = ("cores", "_pack")

    def __init__(self, cores: Sequence[np.ndarray]):
        cores = tuple(np.asarray(c, dtype=np.float64) for c in cores)
        if len(cores) < 1:
            raise ValueError("need at least one core")
        for k, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {k} must be order-3, got shape {c.shape}")
            nxt = cores[(k + 1) % len(cores)]
            if c.shape[2] != nxt.shape[0]:
                raise ValueError(
                    f"ring rank mismatch between core {k} {c.shape} and its successor {nxt.shape}"
                )
        self.cores = tuple(_freeze(c) for c in cores)
        self._pack = None

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[0] for c in self.cores)

    def pack(self) -> kernels.CorePack:
        if self._pack is None:
            self._pack = kernels.pack_cores(self.cores)
        return self._pack

    def __repr__(self):
        return f"TrCores(dims={self.dims}, ranks={self.ranks})"


class UtrCore:
    """One shared core ``(r, n, r)`` replicated over a ring of length d."""

    __slots__ = ("core", "order", "_pack")

    def __init__(self, core: np.ndarray, order: int):
        core = np.asarray(core, dtype=np.float64)
        if core.ndim != 3 or core.shape[0] != core.shape[2]:
            raise ValueError(f"uniform core must be (r, n, r), got {core.shape}")
        if order < 1:
            raise ValueError("order must be >= 1")
        self.core = _freeze(core)
        self.order = int(order)
        self._pack = None

    @property
    def rank(self) -> int:
        return self.core.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.core.shape[1],) * self.order

    def replicate(self) -> TrCores:
        return TrCores([self.core] * self.order)

    def pack(self) -> kernels.CorePack:
        if self._pack is None:
            self._pack = kernels.pack_cores([self.core] * self.order)
        return self._pack

    def __repr__(self):
        return f"UtrCore(r={self.rank}, n={self.core.shape[1]}, order={self.order})"


class GaugeElement:
    """Per-mode invertible matrices ``A_k`` of size ``r_k x r_k``."""

    __slots__ = ("mats",)

    # A_k counts as invertible when sigma_min > this factor times sigma_max.
    INVERTIBILITY_TOL = 1e-12

    def __init__(self, mats: Sequence[np.ndarray]):
        mats = tuple(np.asarray(m, dtype=np.float64) for m in mats)
        for k, m in enumerate(mats):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"gauge matrix {k} must be square, got {m.shape}")
            sv = np.linalg.svd(m, compute_uv=False)
            if sv[-1] <= self.INVERTIBILITY_TOL * sv[0]:
                raise ValueError(f"gauge matrix {k} is numerically singular")
        self.mats = tuple(_freeze(m) for m in mats)

    def inverse(self) -> "GaugeElement":
        return GaugeElement([np.linalg.inv(m) for m in self.mats])


def _check_index(idx, dims) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.shape != (len(dims),):
        raise ValueError(f"index must have {len(dims)} entries")
    if np.any(idx < 0) or np.any(idx >= np.asarray(dims)):
        raise ValueError(f"index {tuple(idx)} out of range for dims {dims}")
    return idx


def tr_entry(u: TrCores, idx) -> float:
    """Single entry (0-based index): trace of the slice product."""
    idx = _check_index(idx, u.dims)
    prod = u.cores[0][:, idx[0], :]
    for k in range(1, u.order):
        prod = prod @ u.cores[k][:, idx[k], :]
    return float(np.trace(prod))


def utr_entry(c: UtrCore, idx) -> float:
    idx = _check_index(idx, c.dims)
    prod = c.core[:, idx[0], :]
    for k in range(1, c.order):
        prod = prod @ c.core[:, idx[k], :]
    return float(np.trace(prod))


def tr_full(u: TrCores, max_entries: int = DEFAULT_FULL_CAP) -> np.ndarray:
    """Dense reconstruction by sequential subchain contraction.

    Cost O(prod(n) * r^3); raises :class:`ResourceLimitError` when the output
    would exceed ``max_entries`` entries.
    """
    dims = u.dims
    total = int(np.prod(np.asarray(dims, dtype=np.int64)))
    if total > max_entries:
        raise ResourceLimitError(
            f"full tensor has {total} entries, exceeding the cap of {max_entries}"
        )
    r1 = u.ranks[0]
    cur = u.cores[0]  # (r1, N, r_next) with N growing, first index fastest
    for k in range(1, u.order):
        core = u.cores[k]
        # merge sample axes keeping the earlier block fastest
        cur = np.einsum("ajb,bic->aijc", cur, core, optimize=True).reshape(
            r1, cur.shape[1] * core.shape[1], core.shape[2]
        )
    flat = np.einsum("aja->j", cur)
    return flat.reshape(dims, order="F")


def utr_full(c: UtrCore, max_entries: int = DEFAULT_FULL_CAP) -> np.ndarray:
    return tr_full(c.replicate(), max_entries)


def core_unfold2(u: TrCores, k: int) -> np.ndarray:
    """Mode-2 unfolding of core k (1-based): ``n_k x r_k r_{k+1}``."""
    if not 1 <= k <= u.order:
        raise ValueError(f"mode k={k} out of range 1..{u.order}")
    return tensor.unfold(u.cores[k - 1], 2)


def subchain(u: TrCores, k: int, max_entries: int = DEFAULT_FULL_CAP) -> np.ndarray:
    """Contraction of all cores except k (1-based), matricized so that
    ``unfold(tr_full(u), k) = core_unfold2(u, k) @ subchain(u, k).T``.

    Shape ``prod(n_j, j != k) x r_k r_{k+1}``; rows follow the mode-k column
    enumeration, row content is the column-major vec of the transposed
    cyclic slice product.
    """
    if not 1 <= k <= u.order:
        raise ValueError(f"mode k={k} out of range 1..{u.order}")
    d = u.order
    k0 = k - 1
    rest = [m for m in range(d) if m != k0]
    n_rest = int(np.prod([u.dims[m] for m in rest], dtype=np.int64)) if rest else 1
    rk = u.ranks[k0]
    rk1 = u.ranks[(k0 + 1) % d]
    if n_rest * rk * rk1 > max_entries:
        raise ResourceLimitError(
            f"subchain needs {n_rest * rk * rk1} entries, exceeding the cap of {max_entries}"
        )
    if d == 1:
        # empty chain: the slice product is the identity on r1
        return np.eye(rk).ravel(order="F")[None, :].copy()
    cyc = [(k0 + 1 + j) % d for j in range(d - 1)]
    cur = u.cores[cyc[0]]
    for m in cyc[1:]:
        cur = np.tensordot(cur, u.cores[m], axes=([cur.ndim - 1], [0]))
    # axes now (r_{k+1}, n_{cyc[0]}, ..., n_{cyc[-1]}, r_k); reorder the mode
    # axes into natural order, then put (r_k, r_{k+1}) last for the vec
    perm = [1 + cyc.index(m) for m in rest] + [cur.ndim - 1, 0]
    cur = np.transpose(cur, perm)
    return np.reshape(cur, (n_rest, rk * rk1), order="F")


def gauge_apply(u: TrCores, g: GaugeElement) -> TrCores:
    """Gauge action: core k maps to ``U_k x_1 A_k x_3 A_{k+1}^{-T}``; the
    represented tensor is unchanged."""
    d = u.order
    if len(g.mats) != d:
        raise ValueError(f"gauge has {len(g.mats)} matrices, cores have {d}")
    for k in range(d):
        if g.mats[k].shape[0] != u.ranks[k]:
            raise ValueError(f"gauge matrix {k} size {g.mats[k].shape[0]} != rank {u.ranks[k]}")
    invs = [np.linalg.inv(m) for m in g.mats]
    new = [
        tensor.mode13_product(u.cores[k], g.mats[k], invs[(k + 1) % d].T)
        for k in range(d)
    ]
    return TrCores(new)


class CoreInjectivity(NamedTuple):
    size_ok: bool        # r_k r_{k+1} <= n_k
    full_rank: bool      # sigma_min > tol * sigma_max on the mode-2 unfolding
    sigma_ratio: float   # sigma_min / sigma_max (0 for a zero matrix)
    ok: bool


class InjectivityReport(NamedTuple):
    cores: tuple
    injective: bool


def injectivity_check(u: TrCores, tol: float = 1e-10) -> InjectivityReport:
    """Advisory per-core injectivity report; never raises on failure."""
    records = []
    d = u.order
    for k in range(d):
        c = u.cores[k]
        rk, nk, rk1 = c.shape
        size_ok = rk * rk1 <= nk
        sv = np.linalg.svd(tensor.unfold(c, 2), compute_uv=False)
        ratio = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
        full_rank = sv[0] > 0 and sv[-1] > tol * sv[0] and len(sv) == rk * rk1
        records.append(CoreInjectivity(size_ok, full_rank, ratio, size_ok and full_rank))
    return InjectivityReport(tuple(records), all(r.ok for r in records))


def random_cores(dims, ranks, seed, dist: str = "uniform") -> TrCores:
    """Seeded random cores; ``dist`` is ``uniform`` (on [0,1], the default)
    or ``gaussian``."""
    dims = tensor.check_shape(dims)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(dims):
        raise ValueError(f"need {len(dims)} ranks, got {len(ranks)}")
    if any(r < 1 for r in ranks):
        raise ValueError(f"ranks must be >= 1, got {ranks}")
    rng = np.random.default_rng(seed)
    d = len(dims)
    cores = []
    for k in range(d):
        shape = (ranks[k], dims[k], ranks[(k + 1) % d])
        if dist == "uniform":
            cores.append(rng.random(shape))
        elif dist == "gaussian":
            cores.append(rng.standard_normal(shape))
        else:
            raise ValueError(f"unknown dist {dist!r}")
    return TrCores(cores)


def random_utr_core(n: int, r: int, order: int, seed, dist: str = "uniform") -> UtrCore:
    rng = np.random.default_rng(seed)
    if dist == "uniform":
        core = rng.random((r, n, r))
    elif dist == "gaussian":
        core = rng.standard_normal((r, n, r))
    else:
        raise ValueError(f"unknown dist {dist!r}")
    return UtrCore(core, order)


def write_tr_cores(path, u: TrCores) -> None:
    """Text format: header line ``d``; per core a line ``r_k n_k r_{k+1}``
    followed by its flat data in storage order, one value per line."""
    with open(path, "w") as f:
        f.write(f"{u.order}\n")
        for c in u.cores:
            f.write(f"{c.shape[0]} {c.shape[1]} {c.shape[2]}\n")
            for val in c.ravel(order="F"):
                f.write(f"{val:.17g}\n")


def read_tr_cores(path) -> TrCores:
    with open(path) as f:
        tokens = f.read().split()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(tokens):
            raise ParseError("unexpected end of file", path)
        out = tokens[pos : pos + n]
        pos += n
        return out

    try:
        d = int(take(1)[0])
    except ValueError:
        raise ParseError("malformed core count", path, 1)
    if d < 1:
        raise ParseError(f"core count must be >= 1, got {d}", path, 1)
    cores = []
    for k in range(d):
        try:
            rk, nk, rk1 = (int(x) for x in take(3))
            data = np.array([float(x) for x in take(rk * nk * rk1)])
        except ValueError:
            raise ParseError(f"malformed data for core {k + 1}", path)
        cores.append(data.reshape((rk, nk, rk1), order="F"))
    if pos != len(tokens):
        raise ParseError("trailing data after last core", path)
    try:
        return TrCores(cores)
    except ValueError as e:
        raise ParseError(str(e), path)
