"""Quotient geometry of the uniform tensor ring parameter space.

Vertical directions share a single trace-free matrix ``D`` across the ring:
``eta = U x_1 D - U x_3 D^T``. Projections solve one ``(r^2 + 1) x r^2``
least-squares system, assembled directly in the single unknown so the cost
does not depend on the ring length d.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

from . import tensor
from .errors import RankDeficiencyWarning
from .tr import UtrCore

__all__ = [
    "u_vertical_from_direction",
    "u_assemble_projection_system",
    "u_solve_projection",
    "u_project",
    "u_retract",
    "u_horizontal_residual",
    "u_vertical_map_matrix",
]

TRACE_TOL = 1e-12


def _apply_direction(core: np.ndarray, d_mat: np.ndarray) -> np.ndarray:
    return np.einsum("ab,bic->aic", d_mat, core) - np.einsum("aib,bc->aic", core, d_mat)


def u_vertical_from_direction(c: UtrCore, d_mat: np.ndarray) -> np.ndarray:
    """Vertical tangent ``U x_1 D - U x_3 D^T`` of a trace-free ``D``."""
    d_mat = np.asarray(d_mat, dtype=np.float64)
    r = c.rank
    if d_mat.shape != (r, r):
        raise ValueError(f"direction must be {r}x{r}, got {d_mat.shape}")
    t = abs(np.trace(d_mat))
    if t > TRACE_TOL * max(float(np.linalg.norm(d_mat)), 1.0):
        raise ValueError(f"direction matrix must be trace free, got trace {t:g}")
    return _apply_direction(c.core, d_mat)


def u_horizontal_residual(c: UtrCore, xi: np.ndarray) -> np.ndarray:
    """Defect ``xi_(1) U_(1)^T - U_(3) xi_(3)^T`` of the horizontality
    condition."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != c.core.shape:
        raise ValueError(f"tangent shape {xi.shape} != core shape {c.core.shape}")
    return tensor.unfold(xi, 1) @ tensor.unfold(c.core, 1).T - tensor.unfold(
        c.core, 3
    ) @ tensor.unfold(xi, 3).T


class UProjectionSystem(NamedTuple):
    matrix: np.ndarray  # (r^2 + 1, r^2); last row is the trace constraint
    rhs: np.ndarray


def u_assemble_projection_system(c: UtrCore, v: np.ndarray) -> UProjectionSystem:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != c.core.shape:
        raise ValueError(f"ambient direction shape {v.shape} != core shape {c.core.shape}")
    r = c.rank
    u1 = tensor.unfold(c.core, 1)
    u3 = tensor.unfold(c.core, 3)
    eye = np.eye(r)
    a = np.kron(eye, u3 @ u3.T) + np.kron(u1 @ u1.T, eye)
    b = -np.kron(u1, eye) @ np.kron(eye, u3.T)
    mat = np.zeros((r * r + 1, r * r))
    mat[: r * r] = a + b + b.T
    for i in range(r):
        mat[r * r, i * (r + 1)] = 1.0
    rhs = np.zeros(r * r + 1)
    rhs[: r * r] = tensor.vec(tensor.unfold(v, 1) @ u1.T - u3 @ tensor.unfold(v, 3).T)
    return UProjectionSystem(mat, rhs)


class UProjectionSolution(NamedTuple):
    d_mat: np.ndarray
    rank: int
    deficient: bool


def u_solve_projection(c: UtrCore, v: np.ndarray) -> UProjectionSolution:
    system = u_assemble_projection_system(c, v)
    sol = tensor.solve_least_squares(system.matrix, system.rhs)
    if sol.deficient:
        warnings.warn(
            "uniform projection system is rank deficient; using the "
            "minimum-norm gauge direction",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    r = c.rank
    return UProjectionSolution(sol.x.reshape((r, r), order="F"), sol.rank, sol.deficient)


def u_project(c: UtrCore, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal split of an ambient direction into (vertical, horizontal)."""
    v = np.asarray(v, dtype=np.float64)
    sol = u_solve_projection(c, v)
    vertical = _apply_direction(c.core, sol.d_mat)
    return vertical, v - vertical


def u_retract(c: UtrCore, xi: np.ndarray, s: float) -> UtrCore:
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != c.core.shape:
        raise ValueError(f"tangent shape {xi.shape} != core shape {c.core.shape}")
    return UtrCore(c.core + s * xi, c.order)


def u_vertical_map_matrix(c: UtrCore) -> np.ndarray:
    """Matrix of D -> vertical tangent over all r^2 canonical directions;
    rank ``r^2 - 1`` for an injective core."""
    r = c.rank
    cols = []
    for j in range(r):
        for i in range(r):
            d_mat = np.zeros((r, r))
            d_mat[i, j] = 1.0
            cols.append(_apply_direction(c.core, d_mat).ravel(order="F"))
    return np.stack(cols, axis=1)
