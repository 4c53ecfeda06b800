"""Flat packing of ring cores for the kernels.

A pack concatenates the F-order flat data of the d cores into one float64
array plus int64 offset/rank/dim tables, which both backends consume. Core
k has shape ``(ranks[k], dims[k], ranks[k+1])`` with ``ranks[d] == ranks[0]``.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np


class CorePack(NamedTuple):
    data: np.ndarray     # float64, concatenated F-order core data
    offsets: np.ndarray  # int64, d+1 entries
    ranks: np.ndarray    # int64, d+1 entries, ranks[d] == ranks[0]
    dims: np.ndarray     # int64, d entries


def pack_cores(cores: Sequence[np.ndarray]) -> CorePack:
    d = len(cores)
    ranks = np.empty(d + 1, dtype=np.int64)
    dims = np.empty(d, dtype=np.int64)
    offsets = np.zeros(d + 1, dtype=np.int64)
    for k, c in enumerate(cores):
        ranks[k], dims[k] = c.shape[0], c.shape[1]
        offsets[k + 1] = offsets[k] + c.size
    ranks[d] = cores[-1].shape[2]
    data = np.concatenate([np.asarray(c, dtype=np.float64).ravel(order="F") for c in cores])
    return CorePack(data, offsets, ranks, dims)


def pack_parts(pack: CorePack, parts: Sequence[np.ndarray]) -> np.ndarray:
    """Flatten tangent parts shaped like the pack's cores into one array."""
    return np.concatenate([np.asarray(p, dtype=np.float64).ravel(order="F") for p in parts])


def unpack_parts(pack: CorePack, flat: np.ndarray) -> list[np.ndarray]:
    """Split flat data back into per-core arrays of the pack's shapes."""
    out = []
    d = len(pack.dims)
    for k in range(d):
        shape = (int(pack.ranks[k]), int(pack.dims[k]), int(pack.ranks[k + 1]))
        seg = flat[int(pack.offsets[k]) : int(pack.offsets[k + 1])]
        out.append(seg.reshape(shape, order="F"))
    return out
