"""Riemannian gradient-descent and conjugate-gradient solvers for the
completion objective, on the ring and uniform-ring parametrizations.

Both methods run on the open total space with the translation retraction;
the Riemannian gradient under the Euclidean metric is the Euclidean
gradient itself (it is automatically horizontal for the gauge-invariant
misfit, which is what makes the total-space and quotient descent methods
coincide). The conjugate-gradient variant transports the previous
direction by projecting it onto the horizontal space at the new iterate.

Stepsizes come from Armijo backtracking seeded with the exact minimizer of
the linearized residual model. Stopping rules: relative gradient norm
``||g|| / max(1, ||g_0||) <= grad_tol``, relative objective decrease below
``rel_change_tol`` over ``rel_change_window`` accepted iterates, or
``max_iters``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import completion, geometry, kernels, tr, ugeometry

__all__ = [
    "OptimConfig",
    "TraceRecord",
    "LineSearchResult",
    "riemannian_gradient",
    "armijo_linesearch",
    "rgd",
    "rcg",
]

BETA_RULES = ("polak_ribiere_plus", "fletcher_reeves", "none")
# Directions this close to orthogonal to the gradient trigger a restart.
DESCENT_TOL = 1e-12


@dataclass
class OptimConfig:
    max_iters: int = 1000
    grad_tol: float = 1e-8
    rel_change_tol: float = 1e-14
    rel_change_window: int = 5
    beta_rule: str = "polak_ribiere_plus"
    armijo_init_scale: float = 1.0
    armijo_backtrack: float = 0.5
    armijo_c1: float = 1e-4
    armijo_max_backtracks: int = 40
    seed: int | None = None
    lam: float = 0.0
    # "horizontal_projection" transports by projecting onto the horizontal
    # space (the quotient method); "identity" is the plain total-space CG.
    transport: str = "horizontal_projection"
    debug: bool = False

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.grad_tol <= 0 or self.rel_change_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.rel_change_window < 1:
            raise ValueError("rel_change_window must be >= 1")
        if self.beta_rule not in BETA_RULES:
            raise ValueError(f"beta_rule must be one of {BETA_RULES}")
        if not 0 < self.armijo_backtrack < 1:
            raise ValueError("armijo_backtrack must lie in (0, 1)")
        if not 0 < self.armijo_c1 < 1:
            raise ValueError("armijo_c1 must lie in (0, 1)")
        if self.armijo_init_scale <= 0:
            raise ValueError("armijo_init_scale must be > 0")
        if self.transport not in ("horizontal_projection", "identity"):
            raise ValueError("transport must be horizontal_projection or identity")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")


TRACE_HEADER = "iter,objective,grad_norm,stepsize,backtracks,train_rel_err,holdout_rel_err,wall_time_s"


class TraceRecord:
    """Append-only per-iterate log; one row per accepted iterate (the
    initial point is row 0)."""

    def __init__(self):
        self.iters = []
        self.objectives = []
        self.grad_norms = []
        self.stepsizes = []
        self.backtracks = []
        self.train_rel_errs = []
        self.holdout_rel_errs = []
        self.wall_times = []
        self.metadata = {}

    def append(self, it, obj, gnorm, step, bts, train_err, holdout_err, wall):
        self.iters.append(int(it))
        self.objectives.append(float(obj))
        self.grad_norms.append(float(gnorm))
        self.stepsizes.append(float(step))
        self.backtracks.append(int(bts))
        self.train_rel_errs.append(float(train_err))
        self.holdout_rel_errs.append(None if holdout_err is None else float(holdout_err))
        self.wall_times.append(float(wall))

    def __len__(self):
        return len(self.iters)

    def rows(self):
        for i in range(len(self.iters)):
            h = self.holdout_rel_errs[i]
            yield (
                f"{self.iters[i]},{self.objectives[i]:.17g},{self.grad_norms[i]:.17g},"
                f"{self.stepsizes[i]:.17g},{self.backtracks[i]},"
                f"{self.train_rel_errs[i]:.17g},"
                f"{'' if h is None else format(h, '.17g')},"
                f"{self.wall_times[i]:.6f}"
            )

    def write_csv(self, path):
        with open(path, "w") as f:
            f.write(TRACE_HEADER + "\n")
            for row in self.rows():
                f.write(row + "\n")


class _TrOps:
    """Tangent/geometry operations for ring cores (tangent = tuple of arrays)."""

    @staticmethod
    def gradient(p, u, resid):
        return completion.euclidean_gradient(p, u, resid)

    @staticmethod
    def inner(x, y):
        return geometry.metric_inner(x, y)

    @staticmethod
    def norm(x):
        return geometry.tangent_norm(x)

    @staticmethod
    def neg(x):
        return tuple(-p for p in x)

    @staticmethod
    def combine(a, x, b, y):
        return tuple(a * p + b * q for p, q in zip(x, y))

    @staticmethod
    def retract(u, x, s):
        return geometry.retract(u, x, s)

    @staticmethod
    def project_h(u, x):
        return geometry.project_horizontal(u, x)

    @staticmethod
    def project_v(u, x):
        return geometry.project_vertical(u, x)

    @staticmethod
    def dirderiv(u, x, idx):
        pack = u.pack()
        return kernels.sampled_dirderiv(pack, kernels.pack_parts(pack, x), idx)

    @staticmethod
    def injective(u):
        return tr.injectivity_check(u).injective


class _UtrOps:
    """Same operations for the uniform parametrization (tangent = one array)."""

    @staticmethod
    def gradient(p, u, resid):
        return completion.utr_euclidean_gradient(p, u, resid)

    @staticmethod
    def inner(x, y):
        return float(np.vdot(x, y))

    @staticmethod
    def norm(x):
        return float(np.linalg.norm(x.ravel()))

    @staticmethod
    def neg(x):
        return -x

    @staticmethod
    def combine(a, x, b, y):
        return a * x + b * y

    @staticmethod
    def retract(u, x, s):
        return ugeometry.u_retract(u, x, s)

    @staticmethod
    def project_h(u, x):
        return ugeometry.u_project(u, x)[1]

    @staticmethod
    def project_v(u, x):
        return ugeometry.u_project(u, x)[0]

    @staticmethod
    def dirderiv(u, x, idx):
        pack = u.pack()
        tangent = kernels.pack_parts(pack, [x] * u.order)
        return kernels.sampled_dirderiv(pack, tangent, idx)

    @staticmethod
    def injective(u):
        return tr.injectivity_check(u.replicate()).injective


def _ops_for(u):
    return _UtrOps if isinstance(u, tr.UtrCore) else _TrOps


# Ratio ||P_V g|| / ||g|| above which the debug horizontality check warns.
HORIZONTALITY_TOL = 1e-8


def riemannian_gradient(u, problem, debug: bool = False):
    """Gradient of the completion objective under the Euclidean metric.

    Identical to the Euclidean gradient on the open total space. With
    ``debug=True`` the vertical component is measured and a warning is
    emitted if it exceeds ``HORIZONTALITY_TOL`` relative to the gradient
    norm (it should vanish whenever the objective is gauge invariant, i.e.
    for ``lam == 0``)."""
    ops = _ops_for(u)
    g = ops.gradient(problem, u, None)
    if debug:
        gnorm = ops.norm(g)
        if gnorm > 0:
            vnorm = ops.norm(ops.project_v(u, g))
            if vnorm > HORIZONTALITY_TOL * gnorm:
                warnings.warn(
                    f"gradient has vertical component {vnorm / gnorm:.3e} of its norm",
                    stacklevel=2,
                )
    return g


class LineSearchResult(NamedTuple):
    stepsize: float
    backtracks: int
    f_new: float
    u_new: object
    success: bool


def armijo_linesearch(
    u, direction, problem, cfg: OptimConfig, grad=None, f0=None, prev_step=None
) -> LineSearchResult:
    """Backtracking line search with sufficient decrease.

    The first trial step is the exact minimizer of the linearized residual
    model, ``-<g, dir> / ||sampled dirderiv||^2``, falling back to the
    previously accepted stepsize when the derivative vanishes on the
    samples. Requires a descent direction."""
    ops = _ops_for(u)
    if grad is None:
        grad = ops.gradient(problem, u, None)
    if f0 is None:
        f0 = completion.objective(problem, u)
    g_dir = ops.inner(grad, direction)
    if g_dir >= 0:
        raise ValueError(f"direction is not a descent direction: <g, dir> = {g_dir:g}")
    dd = ops.dirderiv(u, direction, problem.samples.indices)
    denom = float(np.dot(dd, dd))
    if denom > 0:
        s = -g_dir / denom * cfg.armijo_init_scale
    else:
        s = prev_step if prev_step else 1.0
    for j in range(cfg.armijo_max_backtracks + 1):
        u_new = ops.retract(u, direction, s)
        f_new = completion.objective(problem, u_new)
        if f_new <= f0 + cfg.armijo_c1 * s * g_dir:
            return LineSearchResult(s, j, f_new, u_new, True)
        s *= cfg.armijo_backtrack
    return LineSearchResult(s, cfg.armijo_max_backtracks, f0, u, False)


def rgd(u0, problem, cfg: OptimConfig | None = None):
    """Gradient descent: steepest-descent steps with Armijo stepsizes.

    Returns ``(u_final, TraceRecord)``; the trace metadata carries the
    termination status and advisory injectivity checks."""
    cfg = cfg or OptimConfig()
    return _minimize(u0, problem, replace(cfg, beta_rule="none"))


def rcg(u0, problem, cfg: OptimConfig | None = None):
    """Conjugate gradient: directions ``-g + beta * transported previous``,
    restarted to steepest descent whenever the combination stops being a
    descent direction. ``beta_rule='none'`` reproduces :func:`rgd` exactly."""
    cfg = cfg or OptimConfig()
    return _minimize(u0, problem, cfg)


def _minimize(u0, problem, cfg: OptimConfig):
    ops = _ops_for(u0)
    trace = TraceRecord()
    trace.metadata["beta_rule"] = cfg.beta_rule
    trace.metadata["transport"] = cfg.transport
    trace.metadata["injective_start"] = ops.injective(u0)
    start = time.perf_counter()

    obs_norm = float(np.linalg.norm(problem.samples.values))
    obs_norm = obs_norm if obs_norm > 0 else 1.0

    def snapshot(u):
        r = completion.residual(u, problem.samples)
        f = 0.5 * float(np.dot(r, r))
        if problem.lam > 0:
            f += 0.5 * problem.lam * completion.cores_sq_norm(u)
        g = ops.gradient(problem, u, r)
        train = float(np.linalg.norm(r)) / obs_norm
        hold = (
            completion.relative_error(u, problem.holdout)
            if problem.holdout is not None
            else None
        )
        return f, g, train, hold

    u = u0
    f, g, train, hold = snapshot(u)
    gnorm = ops.norm(g)
    gscale = max(1.0, gnorm)
    trace.append(0, f, gnorm, 0.0, 0, train, hold, time.perf_counter() - start)

    status = "max_iters"
    if gnorm / gscale <= cfg.grad_tol:
        status = "converged_grad"
        return _finish(u, trace, status, ops)

    if cfg.debug:
        riemannian_gradient(u, problem, debug=True)

    eta = ops.neg(g)
    prev_step = None
    objectives = [f]
    for t in range(1, cfg.max_iters + 1):
        ls = armijo_linesearch(u, eta, problem, cfg, grad=g, f0=f, prev_step=prev_step)
        if not ls.success:
            status = "linesearch_failure"
            break
        u = ls.u_new
        prev_step = ls.stepsize
        f, g_new, train, hold = snapshot(u)
        gnorm_new = ops.norm(g_new)
        trace.append(
            t, f, gnorm_new, ls.stepsize, ls.backtracks, train, hold,
            time.perf_counter() - start,
        )
        objectives.append(f)

        if gnorm_new / gscale <= cfg.grad_tol:
            status = "converged_grad"
            break
        w = cfg.rel_change_window
        if len(objectives) > w:
            ref = objectives[-w - 1]
            if ref - f <= cfg.rel_change_tol * max(abs(ref), 1e-300):
                status = "converged_change"
                break

        if cfg.beta_rule == "none":
            beta = 0.0
        elif cfg.beta_rule == "fletcher_reeves":
            beta = (gnorm_new / gnorm) ** 2
        else:  # polak_ribiere_plus
            g_old_t = _transport(ops, cfg, u, g)
            beta = ops.inner(g_new, ops.combine(1.0, g_new, -1.0, g_old_t))
            beta = max(0.0, beta / (gnorm * gnorm))
        if beta == 0.0:
            eta = ops.neg(g_new)
        else:
            eta = ops.combine(-1.0, g_new, beta, _transport(ops, cfg, u, eta))
            descent = -ops.inner(eta, g_new)
            if descent <= DESCENT_TOL * ops.norm(eta) * gnorm_new:
                eta = ops.neg(g_new)
        g = g_new
        gnorm = gnorm_new
    return _finish(u, trace, status, ops)


def _transport(ops, cfg, u, x):
    if cfg.transport == "identity":
        return x
    return ops.project_h(u, x)


def _finish(u, trace, status, ops):
    trace.metadata["status"] = status
    trace.metadata["injective_end"] = ops.injective(u)
    return u, trace
