"""Dense tensor storage conventions and small-matrix kernels.

Tensors are plain ``numpy.ndarray`` objects in float64. The storage
convention throughout the package is column-major (first index fastest):
entry ``(i_1, ..., i_d)`` of a tensor with shape ``(n_1, ..., n_d)`` lives at
flat offset ``sum((i_l - 1) * prod(n_m for m < l))`` in 1-based terms, i.e.
``ravel(order="F")``. All unfoldings are materialized copies, not views.

Mode numbering in the public API is 1-based (mode k in ``1..d``) to match
the column-enumeration rule ``column_index`` implements; multi-indices
passed to ``column_index`` are 1-based as well. Everything else takes
ordinary 0-based numpy indices.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ParseError

__all__ = [
    "column_index",
    "unfold",
    "fold",
    "mode13_product",
    "kron",
    "inner",
    "fro_norm",
    "vec",
    "solve_least_squares",
    "LstsqResult",
    "read_coord_tensor",
    "write_coord_tensor",
]

# Relative singular-value cutoff used for numerical rank decisions.
RANK_RCOND = 1e-10


def check_shape(dims) -> tuple[int, ...]:
    """Validate a tensor shape: positive integer extents, d >= 1."""
    dims = tuple(int(n) for n in dims)
    if len(dims) < 1:
        raise ValueError("shape must have at least one mode")
    if any(n < 1 for n in dims):
        raise ValueError(f"shape entries must be >= 1, got {dims}")
    return dims


def column_index(k: int, multi_index, shape) -> int:
    """Column position of a multi-index in the mode-k unfolding (1-based).

    ``multi_index`` holds the d-1 surviving indices ``(i_1, ..., i_{k-1},
    i_{k+1}, ..., i_d)``, each 1-based. Returns
    ``1 + sum((i_l - 1) * prod(n_m for m != k, m < l))``.
    """
    dims = check_shape(shape)
    d = len(dims)
    if not 1 <= k <= d:
        raise ValueError(f"mode k={k} out of range 1..{d}")
    rest = [m for m in range(d) if m != k - 1]
    if len(multi_index) != d - 1:
        raise ValueError(f"expected {d - 1} indices, got {len(multi_index)}")
    j = 0
    stride = 1
    for pos, m in enumerate(rest):
        i = int(multi_index[pos])
        if not 1 <= i <= dims[m]:
            raise ValueError(f"index {i} out of range 1..{dims[m]} in mode {m + 1}")
        j += (i - 1) * stride
        stride *= dims[m]
    return j + 1


def unfold(t: np.ndarray, k: int) -> np.ndarray:
    """Mode-k unfolding (k in 1..d): ``n_k x prod(n_other)`` matrix whose
    column order follows ``column_index``."""
    t = np.asarray(t, dtype=np.float64)
    if not 1 <= k <= t.ndim:
        raise ValueError(f"mode k={k} out of range 1..{t.ndim}")
    return np.reshape(np.moveaxis(t, k - 1, 0), (t.shape[k - 1], -1), order="F")


def fold(m: np.ndarray, k: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the tensor of ``shape`` from its
    mode-k unfolding."""
    dims = check_shape(shape)
    m = np.asarray(m, dtype=np.float64)
    if not 1 <= k <= len(dims):
        raise ValueError(f"mode k={k} out of range 1..{len(dims)}")
    rest = [dims[i] for i in range(len(dims)) if i != k - 1]
    if m.shape != (dims[k - 1], int(np.prod(rest, dtype=np.int64))):
        raise ValueError(f"matrix shape {m.shape} incompatible with fold({dims}, k={k})")
    t = np.reshape(m, (dims[k - 1], *rest), order="F")
    return np.moveaxis(t, 0, k - 1)


def mode13_product(u: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Simultaneous mode-1/mode-3 product of an order-3 tensor.

    For ``u`` of shape ``(n1, n2, n3)``, ``a`` of shape ``(p, n1)`` and ``b``
    of shape ``(q, n3)``, returns the ``(p, n2, q)`` tensor with mode-2
    unfolding ``unfold(u, 2) @ kron(b, a).T``.
    """
    u = np.asarray(u, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if u.ndim != 3 or a.ndim != 2 or b.ndim != 2:
        raise ValueError("mode13_product expects an order-3 tensor and two matrices")
    if a.shape[1] != u.shape[0] or b.shape[1] != u.shape[2]:
        raise ValueError(
            f"dimension mismatch: u {u.shape}, a {a.shape}, b {b.shape}"
        )
    return np.einsum("pi,ijk,qk->pjq", a, u, b, optimize=True)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def inner(x: np.ndarray, y: np.ndarray) -> float:
    """Euclidean inner product of two same-shape arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    return float(np.dot(x.ravel(order="F"), y.ravel(order="F")))


def fro_norm(x: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64).ravel()))


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization (column-major ravel)."""
    return np.asarray(m, dtype=np.float64).ravel(order="F")


class LstsqResult(NamedTuple):
    x: np.ndarray
    rank: int
    deficient: bool


def solve_least_squares(a: np.ndarray, b: np.ndarray) -> LstsqResult:
    """Minimum-norm least-squares solution of ``a x = b``.

    Uses a rank-revealing SVD factorization. ``deficient`` is set when the
    numerical rank (singular values above ``RANK_RCOND * sigma_max``) is
    below the column count; the minimum-norm solution is still returned.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("matrix expected")
    if a.shape[0] < a.shape[1]:
        raise ValueError(f"system must not be underdetermined, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs length {b.shape[0]} does not match {a.shape[0]} rows")
    x, _, rank, _ = np.linalg.lstsq(a, b, rcond=RANK_RCOND)
    return LstsqResult(x, int(rank), int(rank) < a.shape[1])


def write_coord_tensor(path, t: np.ndarray) -> None:
    """Write a dense tensor in coordinate text form.

    Header line ``d n_1 ... n_d``; then one line ``i_1 ... i_d value`` per
    entry (1-based indices), in storage order.
    """
    t = np.asarray(t, dtype=np.float64)
    dims = t.shape
    with open(path, "w") as f:
        f.write(f"{len(dims)} " + " ".join(str(n) for n in dims) + "\n")
        flat = t.ravel(order="F")
        for off, val in enumerate(flat):
            idx = np.unravel_index(off, dims, order="F")
            f.write(" ".join(str(i + 1) for i in idx) + f" {val:.17g}\n")


def read_coord_tensor(path) -> np.ndarray:
    """Read a tensor written by :func:`write_coord_tensor`.

    Every entry must appear exactly once; duplicates, omissions, or
    out-of-range indices raise :class:`ParseError` with the line number.
    """
    with open(path) as f:
        lines = f.readlines()
    if not lines:
        raise ParseError("empty file", path, 1)
    head = lines[0].split()
    try:
        d = int(head[0])
        dims = tuple(int(x) for x in head[1 : 1 + d])
    except (ValueError, IndexError):
        raise ParseError("malformed header, expected 'd n_1 ... n_d'", path, 1)
    if len(dims) != d or len(head) != d + 1:
        raise ParseError("malformed header, expected 'd n_1 ... n_d'", path, 1)
    dims = check_shape(dims)
    total = int(np.prod(dims, dtype=np.int64))
    flat = np.full(total, np.nan)
    seen = 0
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != d + 1:
            raise ParseError(f"expected {d} indices and a value", path, ln)
        try:
            idx = tuple(int(x) - 1 for x in parts[:d])
            val = float(parts[d])
        except ValueError:
            raise ParseError("malformed entry line", path, ln)
        if any(not 0 <= i < n for i, n in zip(idx, dims)):
            raise ParseError(f"index out of range for shape {dims}", path, ln)
        off = int(np.ravel_multi_index(idx, dims, order="F"))
        if not np.isnan(flat[off]):
            raise ParseError("duplicate entry", path, ln)
        flat[off] = val
        seen += 1
    if seen != total:
        raise ParseError(f"got {seen} entries, expected {total}", path, len(lines))
    return flat.reshape(dims, order="F")
