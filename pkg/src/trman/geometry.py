"""Quotient geometry of the tensor ring parameter space.

The gauge group acts on the cores; tangent directions along gauge orbits
form the vertical space, parametrized by square matrices ``D_k`` (one per
mode, ``trace(D_1) = 0``) via ``eta_k = U_k x_1 D_k - U_k x_3 D_{k+1}^T``.
The horizontal space is its Euclidean orthogonal complement, characterized
by the cyclic slice conditions checked in :func:`horizontal_residual`.
Orthogonal projections solve one dense least-squares system whose blocks
are assembled in :func:`assemble_projection_system`.

A tangent vector is represented as a tuple of d arrays, one per core, with
matching shapes.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple, Sequence

import numpy as np

from . import tensor
from .errors import RankDeficiencyWarning
from .tr import TrCores

__all__ = [
    "GaugeDirection",
    "ProjectionSystem",
    "ProjectionSolution",
    "vertical_from_direction",
    "horizontal_residual",
    "assemble_projection_system",
    "solve_projection",
    "project_vertical",
    "project_horizontal",
    "metric_inner",
    "tangent_norm",
    "retract",
    "vertical_map_matrix",
    "random_tangent",
    "check_tangent",
]

TRACE_TOL = 1e-12


class GaugeDirection:
    """Per-mode direction matrices ``D_k`` with ``trace(D_1) = 0``."""

    __slots__ = ("mats",)

    def __init__(self, mats: Sequence[np.ndarray]):
        mats = tuple(np.asarray(m, dtype=np.float64) for m in mats)
        for k, m in enumerate(mats):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"direction matrix {k} must be square, got {m.shape}")
        t = abs(np.trace(mats[0]))
        scale = float(np.linalg.norm(mats[0]))
        if t > TRACE_TOL * max(scale, 1.0):
            raise ValueError(f"trace of the first direction matrix must vanish, got {t:g}")
        self.mats = mats


def check_tangent(u: TrCores, xi) -> tuple[np.ndarray, ...]:
    xi = tuple(np.asarray(p, dtype=np.float64) for p in xi)
    if len(xi) != u.order:
        raise ValueError(f"tangent has {len(xi)} parts, expected {u.order}")
    for k, (p, c) in enumerate(zip(xi, u.cores)):
        if p.shape != c.shape:
            raise ValueError(f"tangent part {k} shape {p.shape} != core shape {c.shape}")
    return xi


def vertical_from_direction(u: TrCores, direction) -> tuple[np.ndarray, ...]:
    """Vertical tangent of a gauge direction:
    ``eta_k = U_k x_1 D_k - U_k x_3 D_{k+1}^T`` (indices cyclic)."""
    if not isinstance(direction, GaugeDirection):
        direction = GaugeDirection(direction)
    mats = direction.mats
    d = u.order
    if len(mats) != d:
        raise ValueError(f"direction has {len(mats)} matrices, cores have {d}")
    for k in range(d):
        if mats[k].shape[0] != u.ranks[k]:
            raise ValueError(f"direction matrix {k} size {mats[k].shape[0]} != rank {u.ranks[k]}")
    parts = []
    for k in range(d):
        dk = mats[k]
        dk1 = mats[(k + 1) % d]
        c = u.cores[k]
        parts.append(
            np.einsum("ab,bic->aic", dk, c) - np.einsum("aib,bc->aic", c, dk1)
        )
    return tuple(parts)


def horizontal_residual(u: TrCores, xi) -> list[np.ndarray]:
    """Defect of the horizontality conditions,
    ``R_k = xi_k_(1) U_k_(1)^T - U_{k-1}_(3) xi_{k-1}_(3)^T``; a tangent is
    horizontal iff all R_k vanish."""
    xi = check_tangent(u, xi)
    d = u.order
    out = []
    for k in range(d):
        km1 = (k - 1) % d
        r = tensor.unfold(xi[k], 1) @ tensor.unfold(u.cores[k], 1).T
        r -= tensor.unfold(u.cores[km1], 3) @ tensor.unfold(xi[km1], 3).T
        out.append(r)
    return out


class ProjectionSystem(NamedTuple):
    matrix: np.ndarray  # (sum r_k^2 + 1, sum r_k^2); last row is the trace constraint
    rhs: np.ndarray
    block_starts: tuple  # column offset of each vec(D_k) block


def assemble_projection_system(u: TrCores, v) -> ProjectionSystem:
    """Stacked normal equations determining the gauge direction of the
    vertical projection of ``v``, block cyclic-tridiagonal with corner
    coupling, plus the trace row.

    Block k couples ``vec(D_{k-1}), vec(D_k), vec(D_{k+1})`` through
    ``B_{k-1}^T, A_k, B_k`` where

    * ``A_k = I (x) (U_{k-1}_(3) U_{k-1}_(3)^T) + (U_k_(1) U_k_(1)^T) (x) I``
    * ``B_k = -(U_k_(1) (x) I)(I (x) U_k_(3)^T)``
    * ``b_k = vec(V_k_(1) U_k_(1)^T - U_{k-1}_(3) V_{k-1}_(3)^T)``

    with column-major vec throughout.
    """
    v = check_tangent(u, v)
    d = u.order
    ranks = u.ranks
    sizes = [r * r for r in ranks]
    starts = np.concatenate([[0], np.cumsum(sizes)])
    ncols = int(starts[-1])
    mat = np.zeros((ncols + 1, ncols))
    rhs = np.zeros(ncols + 1)
    u1 = [tensor.unfold(c, 1) for c in u.cores]
    u3 = [tensor.unfold(c, 3) for c in u.cores]
    b_blocks = [
        -np.kron(u1[k], np.eye(ranks[k])) @ np.kron(np.eye(ranks[(k + 1) % d]), u3[k].T)
        for k in range(d)
    ]
    for k in range(d):
        km1 = (k - 1) % d
        kp1 = (k + 1) % d
        eye = np.eye(ranks[k])
        a_k = np.kron(eye, u3[km1] @ u3[km1].T) + np.kron(u1[k] @ u1[k].T, eye)
        rows = slice(starts[k], starts[k + 1])
        mat[rows, starts[k] : starts[k + 1]] += a_k
        mat[rows, starts[kp1] : starts[kp1 + 1]] += b_blocks[k]
        mat[rows, starts[km1] : starts[km1 + 1]] += b_blocks[km1].T
        rhs[rows] = tensor.vec(
            tensor.unfold(v[k], 1) @ u1[k].T - u3[km1] @ tensor.unfold(v[km1], 3).T
        )
    # trace(D_1) = 0, weighted 1.0
    r1 = ranks[0]
    for i in range(r1):
        mat[ncols, i * (r1 + 1)] = 1.0
    return ProjectionSystem(mat, rhs, tuple(int(s) for s in starts[:-1]))


class ProjectionSolution(NamedTuple):
    d_mats: tuple       # solved direction matrices D_k
    rank: int           # numerical column rank of the stacked system
    deficient: bool


def solve_projection(u: TrCores, v) -> ProjectionSolution:
    """Solve the projection system for ``v``; rank deficiency (non-injective
    cores) is flagged and warned about, with the minimum-norm solution used."""
    system = assemble_projection_system(u, v)
    sol = tensor.solve_least_squares(system.matrix, system.rhs)
    if sol.deficient:
        warnings.warn(
            "projection system is rank deficient (cores near the injectivity "
            "boundary); using the minimum-norm gauge direction",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    mats = []
    ranks = u.ranks
    for k, start in enumerate(system.block_starts):
        r = ranks[k]
        mats.append(sol.x[start : start + r * r].reshape((r, r), order="F"))
    return ProjectionSolution(tuple(mats), sol.rank, sol.deficient)


def project_vertical(u: TrCores, v) -> tuple[np.ndarray, ...]:
    sol = solve_projection(u, v)
    d = u.order
    parts = []
    for k in range(d):
        dk = sol.d_mats[k]
        dk1 = sol.d_mats[(k + 1) % d]
        c = u.cores[k]
        parts.append(np.einsum("ab,bic->aic", dk, c) - np.einsum("aib,bc->aic", c, dk1))
    return tuple(parts)


def project_horizontal(u: TrCores, v) -> tuple[np.ndarray, ...]:
    v = check_tangent(u, v)
    pv = project_vertical(u, v)
    return tuple(x - y for x, y in zip(v, pv))


def metric_inner(x, y) -> float:
    """Euclidean metric: sum of per-part inner products."""
    if len(x) != len(y):
        raise ValueError("tangent part counts differ")
    return float(sum(tensor.inner(a, b) for a, b in zip(x, y)))


def tangent_norm(x) -> float:
    return float(np.sqrt(sum(float(np.vdot(p, p)) for p in x)))


def retract(u: TrCores, xi, s: float) -> TrCores:
    """Translation retraction ``U_k + s * xi_k`` (the total space is open)."""
    xi = check_tangent(u, xi)
    return TrCores([c + s * p for c, p in zip(u.cores, xi)])


def vertical_map_matrix(u: TrCores) -> np.ndarray:
    """Matrix of the linear map from unconstrained gauge directions to
    vertical tangents, one column per canonical D entry (column-major per
    mode). For injective cores its rank is the vertical dimension
    ``sum r_k^2 - 1``; the one-dimensional kernel is the global scaling
    direction (identity matrices in every mode)."""
    d = u.order
    ranks = u.ranks
    amb = sum(c.size for c in u.cores)
    cols = []
    for k in range(d):
        r = ranks[k]
        for j in range(r):
            for i in range(r):
                mats = [np.zeros((rr, rr)) for rr in ranks]
                mats[k][i, j] = 1.0
                parts = []
                for kk in range(d):
                    c = u.cores[kk]
                    p = np.einsum("ab,bic->aic", mats[kk], c)
                    p -= np.einsum("aib,bc->aic", c, mats[(kk + 1) % d])
                    parts.append(p)
                cols.append(np.concatenate([p.ravel(order="F") for p in parts]))
    out = np.empty((amb, len(cols)))
    for j, col in enumerate(cols):
        out[:, j] = col
    return out


def random_tangent(u: TrCores, rng) -> tuple[np.ndarray, ...]:
    """Gaussian ambient direction shaped like the cores."""
    return tuple(rng.standard_normal(c.shape) for c in u.cores)
