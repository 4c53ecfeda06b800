import numpy as np
import pytest

from trman import geometry, tr
from trman.errors import RankDeficiencyWarning

from conftest import random_injective_cores, tangent_rel_dist


def trace_free(rng, ranks):
    mats = [rng.standard_normal((r, r)) for r in ranks]
    mats[0] -= np.trace(mats[0]) / ranks[0] * np.eye(ranks[0])
    return mats


def test_gauge_direction_trace_constraint(rng):
    m = rng.standard_normal((3, 3))
    m += np.eye(3)  # make the trace decidedly nonzero
    with pytest.raises(ValueError):
        geometry.GaugeDirection([m, np.zeros((2, 2))])
    mats = trace_free(rng, (3, 2))
    geometry.GaugeDirection(mats)  # fine


def test_vertical_from_direction_zero():
    u = tr.random_cores((4, 4, 4), (2, 2, 2), seed=0)
    eta = geometry.vertical_from_direction(u, [np.zeros((2, 2))] * 3)
    assert all(np.all(p == 0) for p in eta)


def test_vertical_from_direction_slice_oracle(rng):
    # independent slice-level evaluation: eta_k(i) = D_k U_k(i) - U_k(i) D_{k+1}
    u = random_injective_cores(rng, d=3)
    mats = trace_free(rng, u.ranks)
    eta = geometry.vertical_from_direction(u, mats)
    for k in range(3):
        c = u.cores[k]
        dk, dk1 = mats[k], mats[(k + 1) % 3]
        for i in range(c.shape[1]):
            want = dk @ c[:, i, :] - c[:, i, :] @ dk1
            np.testing.assert_allclose(eta[k][:, i, :], want, rtol=1e-13, atol=1e-14)


def test_vertical_from_direction_diag_pair(rng):
    # D_1 = diag(c, -c), all others zero: supported only on parts 1 and d
    u = random_injective_cores(rng, d=4, max_rank=2)
    r1 = u.ranks[0]
    if r1 < 2:
        u = tr.random_cores((4, 5, 6, 7), (2, 2, 2, 2), seed=1)
        r1 = 2
    mats = [np.zeros((r, r)) for r in u.ranks]
    mats[0] = np.diag([1.5, -1.5] + [0.0] * (r1 - 2))
    eta = geometry.vertical_from_direction(u, mats)
    assert np.linalg.norm(eta[0]) > 0
    assert np.linalg.norm(eta[-1]) > 0
    for k in range(1, u.order - 1):
        assert np.linalg.norm(eta[k]) == 0


def test_vertical_map_kernel_is_global_scaling_only(rng):
    # on the unconstrained direction space the kernel is span{(I,...,I)}
    u = random_injective_cores(rng, d=3)
    m = geometry.vertical_map_matrix(u)
    total = sum(r * r for r in u.ranks)
    assert m.shape[1] == total
    assert np.linalg.matrix_rank(m, tol=1e-10) == total - 1
    ident = np.concatenate([np.eye(r).ravel(order="F") for r in u.ranks])
    assert np.linalg.norm(m @ ident) <= 1e-10 * np.linalg.norm(m)


def test_horizontal_residual_zero_and_vertical(rng):
    u = random_injective_cores(rng, d=3)
    zero = tuple(np.zeros(c.shape) for c in u.cores)
    assert all(np.all(r == 0) for r in geometry.horizontal_residual(u, zero))
    eta = geometry.vertical_from_direction(u, trace_free(rng, u.ranks))
    res = geometry.horizontal_residual(u, eta)
    assert max(np.linalg.norm(r) for r in res) > 1e-6


def test_horizontal_residual_trace_redundancy(rng):
    # the trace of the residual blocks telescopes to zero for any tangent
    for _ in range(5):
        u = random_injective_cores(rng)
        xi = geometry.random_tangent(u, rng)
        res = geometry.horizontal_residual(u, xi)
        total = sum(np.trace(r) for r in res)
        scale = sum(abs(np.trace(r)) for r in res) + 1.0
        assert abs(total) <= 1e-12 * scale


def test_projection_system_shape_and_symmetry(rng):
    u = tr.random_cores((4, 4, 4), (2, 2, 2), seed=2)
    v = geometry.random_tangent(u, rng)
    system = geometry.assemble_projection_system(u, v)
    assert system.matrix.shape == (13, 12)
    body = system.matrix[:12]
    np.testing.assert_allclose(body, body.T, rtol=1e-12, atol=1e-12)


def test_projection_system_zero_rhs(rng):
    u = random_injective_cores(rng, d=3)
    zero = tuple(np.zeros(c.shape) for c in u.cores)
    system = geometry.assemble_projection_system(u, zero)
    assert np.all(system.rhs == 0)
    sol = geometry.solve_projection(u, zero)
    assert all(np.linalg.norm(m) <= 1e-12 for m in sol.d_mats)


def test_projection_system_full_rank_for_injective(rng):
    for _ in range(5):
        u = random_injective_cores(rng)
        v = geometry.random_tangent(u, rng)
        sol = geometry.solve_projection(u, v)
        assert sol.rank == sum(r * r for r in u.ranks)
        assert not sol.deficient


def block_diagonal_cores(rng, d=3, n=6):
    # a direct sum of two rank-one rings: diagonal gauge directions act
    # trivially, so the kernel grows beyond the global scaling
    cores = []
    for _ in range(d):
        core = np.zeros((2, n, 2))
        core[0, :, 0] = rng.random(n)
        core[1, :, 1] = rng.random(n)
        cores.append(core)
    return tr.TrCores(cores)


def test_projection_deficiency_flag_fires(rng):
    u = block_diagonal_cores(rng)
    assert not tr.injectivity_check(u).injective
    v = geometry.random_tangent(u, rng)
    with pytest.warns(RankDeficiencyWarning):
        sol = geometry.solve_projection(u, v)
    assert sol.deficient
    assert sol.rank < sum(r * r for r in u.ranks)


def test_project_recovers_vertical(rng):
    for _ in range(5):
        u = random_injective_cores(rng)
        eta = geometry.vertical_from_direction(u, trace_free(rng, u.ranks))
        pv = geometry.project_vertical(u, eta)
        assert tangent_rel_dist(eta, pv) <= 1e-9


def test_project_idempotent_on_horizontal(rng):
    for _ in range(5):
        u = random_injective_cores(rng)
        v = geometry.random_tangent(u, rng)
        ph = geometry.project_horizontal(u, v)
        pv2 = geometry.project_vertical(u, ph)
        assert geometry.tangent_norm(pv2) <= 1e-9 * geometry.tangent_norm(ph)


def test_project_complementarity_orthogonality_residual(rng):
    for _ in range(5):
        u = random_injective_cores(rng)
        v = geometry.random_tangent(u, rng)
        pv = geometry.project_vertical(u, v)
        ph = geometry.project_horizontal(u, v)
        # complementarity is exact by construction (P_H = id - P_V), and the
        # solve is deterministic, so the independently computed parts agree
        # bitwise with v - pv
        for a, b, c in zip(v, pv, ph):
            assert np.array_equal(c, a - b)
        vnorm = geometry.tangent_norm(v)
        assert abs(geometry.metric_inner(pv, ph)) <= 1e-9 * vnorm**2
        unorm = np.sqrt(sum(float(np.vdot(c, c)) for c in u.cores))
        res = geometry.horizontal_residual(u, ph)
        res_norm = np.sqrt(sum(np.linalg.norm(r) ** 2 for r in res))
        assert res_norm <= 1e-8 * vnorm * unorm


def test_dimension_counts_desk_instance():
    # d=3, n=(4,4,4), r=(2,2,2): vertical 11, horizontal 37
    u = tr.random_cores((4, 4, 4), (2, 2, 2), seed=10)
    m = geometry.vertical_map_matrix(u)
    vertical = np.linalg.matrix_rank(m, tol=1e-10)
    assert vertical == 11
    ambient = sum(c.size for c in u.cores)
    assert ambient - vertical == 37
    ranks, dims = u.ranks, u.dims
    formula = sum(
        ranks[k] * dims[k] * ranks[(k + 1) % 3] for k in range(3)
    ) - sum(r * r for r in ranks) + 1
    assert formula == 37


def test_metric_and_retract(rng):
    u = random_injective_cores(rng, d=3)
    x = geometry.random_tangent(u, rng)
    y = geometry.random_tangent(u, rng)
    assert geometry.metric_inner(x, x) == pytest.approx(
        sum(np.linalg.norm(p) ** 2 for p in x), rel=1e-12
    )
    assert geometry.metric_inner(x, y) == pytest.approx(geometry.metric_inner(y, x))
    same = geometry.retract(u, tuple(np.zeros(c.shape) for c in u.cores), 0.7)
    for a, b in zip(u.cores, same.cores):
        assert np.array_equal(a, b)
    stepped = geometry.retract(u, x, 1e-3)
    assert tr.injectivity_check(stepped).injective  # small steps stay injective
