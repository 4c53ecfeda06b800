"""Pure-numpy kernel implementations (vectorized over samples)."""

from __future__ import annotations

import numpy as np


def _core_views(data, offsets, ranks, dims):
    d = len(dims)
    return [
        data[int(offsets[k]) : int(offsets[k + 1])].reshape(
            (int(ranks[k]), int(dims[k]), int(ranks[k + 1])), order="F"
        )
        for k in range(d)
    ]


def _slice_stacks(cores, idx):
    # slice stack k: (m, r_k, r_{k+1}) lateral slices at the sampled indices
    return [c[:, idx[:, k], :].transpose(1, 0, 2) for k, c in enumerate(cores)]


def _prefixes_suffixes(slices, r0, m):
    d = len(slices)
    eye = np.broadcast_to(np.eye(r0), (m, r0, r0))
    pre = [eye]
    for k in range(d):
        pre.append(pre[k] @ slices[k])
    suf = [None] * (d + 1)
    suf[d] = eye
    for k in range(d - 1, -1, -1):
        suf[k] = slices[k] @ suf[k + 1]
    return pre, suf


def sampled_values(data, offsets, ranks, dims, idx):
    cores = _core_views(data, offsets, ranks, dims)
    slices = _slice_stacks(cores, idx)
    cur = slices[0]
    for k in range(1, len(slices)):
        cur = cur @ slices[k]
    return np.einsum("sii->s", cur)


def completion_gradient(data, offsets, ranks, dims, idx, resid):
    cores = _core_views(data, offsets, ranks, dims)
    d = len(cores)
    m = idx.shape[0]
    slices = _slice_stacks(cores, idx)
    pre, suf = _prefixes_suffixes(slices, int(ranks[0]), m)
    grad = np.zeros_like(data)
    for k in range(d):
        contrib = np.matmul(pre[k].transpose(0, 2, 1), suf[k + 1].transpose(0, 2, 1))
        contrib = contrib * resid[:, None, None]
        acc = np.zeros((int(dims[k]), int(ranks[k]), int(ranks[k + 1])))
        np.add.at(acc, idx[:, k], contrib)
        grad[int(offsets[k]) : int(offsets[k + 1])] = acc.transpose(1, 0, 2).ravel(order="F")
    return grad


def sampled_dirderiv(data, tdata, offsets, ranks, dims, idx):
    cores = _core_views(data, offsets, ranks, dims)
    tcores = _core_views(tdata, offsets, ranks, dims)
    d = len(cores)
    m = idx.shape[0]
    slices = _slice_stacks(cores, idx)
    pre, suf = _prefixes_suffixes(slices, int(ranks[0]), m)
    out = np.zeros(m)
    for k in range(d):
        tsl = tcores[k][:, idx[:, k], :].transpose(1, 0, 2)
        mt = np.matmul(pre[k].transpose(0, 2, 1), suf[k + 1].transpose(0, 2, 1))
        out += np.einsum("sab,sab->s", tsl, mt)
    return out
