"""Hot numeric kernels: ring-product evaluation at sample indices, sparse
completion gradients, and directional derivatives.

Two interchangeable backends exist: a numba ``@njit`` implementation and a
pure-numpy vectorized fallback. Selection is controlled by the environment
variable ``TRMAN_BACKEND``:

* ``auto`` (default) — numba when importable, else numpy;
* ``numba`` — require the JIT backend;
* ``numpy`` — force the fallback.

``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

from .packing import CorePack, pack_cores, pack_parts, unpack_parts
from . import numpy_backend

__all__ = [
    "CorePack",
    "pack_cores",
    "pack_parts",
    "unpack_parts",
    "get_backend",
    "set_backend",
    "backend_name",
    "sampled_values",
    "completion_gradient",
    "sampled_dirderiv",
]

_backend = None
_backend_name = None


def _resolve(name: str):
    if name == "numpy":
        return numpy_backend, "numpy"
    if name == "numba":
        from . import numba_backend

        return numba_backend, "numba"
    if name == "auto":
        try:
            from . import numba_backend

            return numba_backend, "numba"
        except ImportError:
            return numpy_backend, "numpy"
    raise ValueError(f"unknown backend {name!r}, expected auto|numba|numpy")


def set_backend(name: str | None = None) -> str:
    """Select the kernel backend; None re-reads ``TRMAN_BACKEND``."""
    global _backend, _backend_name
    if name is None:
        name = os.environ.get("TRMAN_BACKEND", "auto")
    _backend, _backend_name = _resolve(name)
    return _backend_name


def get_backend():
    if _backend is None:
        set_backend()
    return _backend


def backend_name() -> str:
    if _backend is None:
        set_backend()
    return _backend_name


def sampled_values(pack: CorePack, idx: np.ndarray) -> np.ndarray:
    """Ring-trace values ``tr(U_1(i_1) ... U_d(i_d))`` for each index row.

    ``idx`` is an ``(m, d)`` int64 array of 0-based indices.
    """
    if idx.shape[0] == 0:
        return np.zeros(0)
    return get_backend().sampled_values(
        pack.data, pack.offsets, pack.ranks, pack.dims, idx
    )


def completion_gradient(pack: CorePack, idx: np.ndarray, resid: np.ndarray) -> np.ndarray:
    """Gradient of ``0.5 * sum(resid_s^2)`` w.r.t. the packed cores, where
    ``resid`` is the per-sample residual at the rows of ``idx``. Returns
    flat data in the same layout as ``pack.data``."""
    if idx.shape[0] == 0:
        return np.zeros_like(pack.data)
    return get_backend().completion_gradient(
        pack.data, pack.offsets, pack.ranks, pack.dims, idx, resid
    )


def sampled_dirderiv(pack: CorePack, tangent_data: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Per-sample directional derivative of the ring values along a tangent
    with the same layout as the cores."""
    if idx.shape[0] == 0:
        return np.zeros(0)
    return get_backend().sampled_dirderiv(
        pack.data, tangent_data, pack.offsets, pack.ranks, pack.dims, idx
    )
