import numpy as np
import pytest

from trman import tr


def random_injective_cores(rng, d=None, max_rank=3, max_n=12):
    """Random cores in the injective regime: n_k >= r_k r_{k+1} and generic
    (uniform) entries, which have full-rank mode-2 unfoldings almost surely."""
    if d is None:
        d = int(rng.integers(3, 6))
    ranks = [int(rng.integers(1, max_rank + 1)) for _ in range(d)]
    cores = []
    for k in range(d):
        lo = ranks[k] * ranks[(k + 1) % d]
        n = int(rng.integers(lo, max(lo, max_n) + 1))
        cores.append(rng.random((ranks[k], n, ranks[(k + 1) % d])))
    return tr.TrCores(cores)


def random_gauge(rng, ranks, orthogonal=False):
    """Random well-conditioned gauge element (orthogonal on request)."""
    mats = []
    for r in ranks:
        m = rng.standard_normal((r, r))
        if orthogonal:
            q, _ = np.linalg.qr(m + np.eye(r))
            mats.append(q)
        else:
            mats.append(m + 3.0 * np.eye(r))
    return tr.GaugeElement(mats)


def tangent_rel_dist(x, y):
    num = np.sqrt(sum(float(np.vdot(a - b, a - b)) for a, b in zip(x, y)))
    den = np.sqrt(sum(float(np.vdot(a, a)) for a in x))
    return num / den if den > 0 else num


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
