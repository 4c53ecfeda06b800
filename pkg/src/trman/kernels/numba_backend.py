"""Numba ``@njit`` kernel implementations.

All three kernels walk the samples once, maintaining prefix/suffix chains of
lateral-slice products so each sample costs O(d r^3). Cores are addressed
through the flat pack layout: core k entry (a, i, b) sits at
``offsets[k] + a + i*ranks[k] + b*ranks[k]*dims[k]``.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def sampled_values(data, offsets, ranks, dims, idx):
    m, d = idx.shape
    rmax = 1
    for k in range(d + 1):
        if ranks[k] > rmax:
            rmax = ranks[k]
    out = np.empty(m)
    cur = np.empty((rmax, rmax))
    nxt = np.empty((rmax, rmax))
    r0 = ranks[0]
    for s in range(m):
        rb = ranks[1]
        n0 = dims[0]
        base = offsets[0] + idx[s, 0] * r0
        for a in range(r0):
            for b in range(rb):
                cur[a, b] = data[base + a + b * r0 * n0]
        for k in range(1, d):
            rk = ranks[k]
            rk1 = ranks[k + 1]
            nk = dims[k]
            basek = offsets[k] + idx[s, k] * rk
            for a in range(r0):
                for b in range(rk1):
                    acc = 0.0
                    for c in range(rk):
                        acc += cur[a, c] * data[basek + c + b * rk * nk]
                    nxt[a, b] = acc
            tmp = cur
            cur = nxt
            nxt = tmp
        tr = 0.0
        for a in range(r0):
            tr += cur[a, a]
        out[s] = tr
    return out


@njit(cache=True, nogil=True)
def _chains(data, offsets, ranks, dims, idx, s, pre, suf):
    # pre[k] = product of slices 0..k-1 (r0 x ranks[k]); suf[k] = product of
    # slices k..d-1 (ranks[k] x r0); identity blocks at the ends.
    d = idx.shape[1]
    r0 = ranks[0]
    for a in range(r0):
        for b in range(r0):
            pre[0, a, b] = 1.0 if a == b else 0.0
            suf[d, a, b] = 1.0 if a == b else 0.0
    for k in range(d):
        rk = ranks[k]
        rk1 = ranks[k + 1]
        nk = dims[k]
        base = offsets[k] + idx[s, k] * rk
        for a in range(r0):
            for b in range(rk1):
                acc = 0.0
                for c in range(rk):
                    acc += pre[k, a, c] * data[base + c + b * rk * nk]
                pre[k + 1, a, b] = acc
    for k in range(d - 1, -1, -1):
        rk = ranks[k]
        rk1 = ranks[k + 1]
        nk = dims[k]
        base = offsets[k] + idx[s, k] * rk
        for a in range(rk):
            for b in range(r0):
                acc = 0.0
                for c in range(rk1):
                    acc += data[base + a + c * rk * nk] * suf[k + 1, c, b]
                suf[k, a, b] = acc


@njit(cache=True, nogil=True)
def completion_gradient(data, offsets, ranks, dims, idx, resid):
    m, d = idx.shape
    rmax = 1
    for k in range(d + 1):
        if ranks[k] > rmax:
            rmax = ranks[k]
    r0 = ranks[0]
    grad = np.zeros(data.shape[0])
    pre = np.empty((d + 1, rmax, rmax))
    suf = np.empty((d + 1, rmax, rmax))
    for s in range(m):
        _chains(data, offsets, ranks, dims, idx, s, pre, suf)
        w = resid[s]
        for k in range(d):
            rk = ranks[k]
            rk1 = ranks[k + 1]
            nk = dims[k]
            base = offsets[k] + idx[s, k] * rk
            for a in range(rk):
                for b in range(rk1):
                    acc = 0.0
                    for c in range(r0):
                        acc += pre[k, c, a] * suf[k + 1, b, c]
                    grad[base + a + b * rk * nk] += w * acc
    return grad


@njit(cache=True, nogil=True)
def sampled_dirderiv(data, tdata, offsets, ranks, dims, idx):
    m, d = idx.shape
    rmax = 1
    for k in range(d + 1):
        if ranks[k] > rmax:
            rmax = ranks[k]
    r0 = ranks[0]
    out = np.zeros(m)
    pre = np.empty((d + 1, rmax, rmax))
    suf = np.empty((d + 1, rmax, rmax))
    for s in range(m):
        _chains(data, offsets, ranks, dims, idx, s, pre, suf)
        dd = 0.0
        for k in range(d):
            rk = ranks[k]
            rk1 = ranks[k + 1]
            nk = dims[k]
            base = offsets[k] + idx[s, k] * rk
            for a in range(rk):
                for b in range(rk1):
                    acc = 0.0
                    for c in range(r0):
                        acc += pre[k, c, a] * suf[k + 1, b, c]
                    dd += tdata[base + a + b * rk * nk] * acc
        out[s] = dd
    return out
