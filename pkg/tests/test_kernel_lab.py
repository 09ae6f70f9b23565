import itertools
import math

import numpy as np
import pytest

from eemcs import kernel_lab as kl
from eemcs.target import FiniteModel, LadderConfig, ring_indices


def _random_kernel(rng, S, zeros=False):
    P = rng.random((S, S))
    if zeros:
        P[rng.random((S, S)) < 0.3] = 0.0
        P[np.arange(S), np.arange(S)] += 0.1
    return P / P.sum(axis=1, keepdims=True)


def test_kernel_distance_examples():
    P = np.array([[0.3, 0.7], [0.5, 0.5]])
    assert kl.kernel_distance(P, P) == 0.0
    assert kl.kernel_distance(np.eye(2), np.eye(2)[::-1]) == 2.0


def test_kernel_distance_matches_sign_vector_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        P1, P2 = _random_kernel(rng, 3), _random_kernel(rng, 3)
        brute = max(abs((P1[x] - P2[x]) @ np.array(f))
                    for x in range(3) for f in itertools.product((-1, 1), repeat=3))
        assert kl.kernel_distance(P1, P2) == pytest.approx(brute, rel=1e-12)


def test_check_kernel_rejects_bad_input():
    with pytest.raises(kl.KernelLabError):
        kl.check_kernel([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(kl.KernelLabError):
        kl.check_kernel([[1.2, -0.2], [0.5, 0.5]])
    with pytest.raises(kl.KernelLabError):
        kl.check_kernel([[1.0, 0.0]])


def test_stationary_examples():
    D = np.array([[0.2, 0.5, 0.3], [0.5, 0.1, 0.4], [0.3, 0.4, 0.3]])
    np.testing.assert_allclose(kl.stationary(D), [1 / 3] * 3, atol=1e-14)
    flip = np.array([[0.7, 0.3], [0.6, 0.4]])
    np.testing.assert_allclose(kl.stationary(flip), [2 / 3, 1 / 3], rtol=1e-13)


def test_stationary_solve_agrees_with_power_iteration():
    rng = np.random.default_rng(1)
    for _ in range(10):
        P = _random_kernel(rng, 5)
        pi = kl.stationary(P)
        assert np.abs(pi @ P - pi).sum() < 1e-14
        np.testing.assert_allclose(pi, kl.stationary_power(P), atol=1e-12)


def test_stationary_rejects_reducible_and_periodic():
    with pytest.raises(kl.KernelLabError, match="reducible"):
        kl.stationary(np.eye(2))
    with pytest.raises(kl.KernelLabError, match="periodic"):
        kl.stationary(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert kl.period(np.roll(np.eye(4), 1, axis=1)) == 4
    assert kl.period(np.array([[0.5, 0.5], [1.0, 0.0]])) == 1


def test_minorization_examples():
    nu = np.array([0.2, 0.5, 0.3])
    cert = kl.minorization_certificate(np.tile(nu, (3, 1)))
    assert cert.epsilon == pytest.approx(1.0)
    np.testing.assert_allclose(cert.nu, nu)
    P = np.array([[0.1, 0.9], [0.8, 0.2]])
    cert = kl.minorization_certificate(P)
    assert cert.epsilon == pytest.approx(0.3, rel=1e-12)
    np.testing.assert_allclose(cert.nu, [1 / 3, 2 / 3])
    assert cert.holds(P)


def test_auto_certificate_is_maximal_over_simplex_grid():
    h = np.array([0.0, 0.7, 0.2, 1.5])
    P = kl.mh_kernel(h, 1.0, np.full((4, 4), 0.25))
    auto = kl.minorization_certificate(P).epsilon
    best = 0.0
    grid = 20
    for a in range(grid + 1):
        for b in range(grid + 1 - a):
            for c in range(grid + 1 - a - b):
                nu = np.array([a, b, c, grid - a - b - c]) / grid
                best = max(best, kl.minorization_certificate(P, nu=nu).epsilon)
    assert auto >= best - 1e-12
    assert best > 0.8 * auto


def test_permutation_is_vacuous():
    cert = kl.minorization_certificate(np.roll(np.eye(3), 1, axis=1))
    assert cert.epsilon == 0.0 and cert.vacuous


def test_geometric_rate_examples():
    pi = np.array([0.25, 0.5, 0.25])
    rep = kl.geometric_rate_check(kl.rank_one(pi), 0.5, horizon=10)
    assert np.all(rep.distances < 1e-15) and rep.passed
    rng = np.random.default_rng(3)
    P = _random_kernel(rng, 4)
    eps = kl.minorization_certificate(P).epsilon
    rep = kl.geometric_rate_check(P, 1 - eps, horizon=30)
    n = np.arange(1, 31)
    assert np.all(rep.distances <= 2 * (1 - eps) ** n + 1e-13)
    assert rep.passed
    with pytest.raises(kl.KernelLabError):
        kl.geometric_rate_check(P, 1.0)


def test_mh_kernel_detailed_balance():
    h = np.array(kl.SIX_STATE_ENERGIES)
    Q = np.random.default_rng(4).random((6, 6))
    Q /= Q.sum(axis=1, keepdims=True)
    P = kl.mh_kernel(h, 1.7, Q)
    pi = kl.tempered(h, 1.7)
    F = pi[:, None] * P
    np.testing.assert_allclose(F, F.T, atol=1e-16)


def test_mcs_tail_kernel_targets_weighted_law():
    h = np.array(kl.SIX_STATE_ENERGIES)
    rings = np.array([0, 0, 0, 1, 1, 1])
    lp = np.array([0.3, -1.1])
    P = kl.mcs_tail_kernel(h, 2.0, np.full((6, 6), 1 / 6), lp, rings)
    w = np.exp(-h / 2.0 - lp[rings])
    w /= w.sum()
    F = w[:, None] * P
    np.testing.assert_allclose(F, F.T, atol=1e-16)


def test_limit_kernel_reductions(six_state):
    model, ladder, _ = six_state
    Q = np.full((6, 6), 1 / 6)
    S0 = kl.build_ee_limit_kernel(model, ladder, 0.0, 0)
    np.testing.assert_array_equal(S0, kl.mh_kernel(model.table, 1.0, Q))
    top = kl.build_ee_limit_kernel(model, ladder, 0.7, 1)
    np.testing.assert_array_equal(top, kl.mh_kernel(model.table, 2.5, Q))


def test_jump_kernel_flat_energies_draws_restricted_proposal():
    m = FiniteModel([1.0] * 4)
    lad = LadderConfig((0.0,), (1.0, 3.0))
    T = kl.ee_jump_kernel(m, lad, 0, 0)
    np.testing.assert_allclose(T, np.full((4, 4), 0.25), atol=1e-15)


def test_jump_kernel_zero_mass_ring_is_an_error():
    m = FiniteModel([0.0, 0.5, math.inf])
    lad = LadderConfig((0.0, 1.0), (1.0, 2.0), ring_policy="strict")
    with pytest.raises(kl.KernelLabError, match="zero mass"):
        kl.ee_jump_kernel(m, lad, 0, 1)


@pytest.mark.parametrize("p_ee", [0.1, 0.5, 0.9])
def test_limit_kernel_stationary_and_minorized(six_state, p_ee):
    model, ladder, _ = six_state
    Q = np.full((6, 6), 1 / 6)
    for i in range(2):
        pi = kl.tempered(model.table, ladder.temperatures[i])
        S = kl.build_ee_limit_kernel(model, ladder, p_ee, i)
        assert np.abs(pi @ S - pi).sum() <= 1e-12
        eps_mh = kl.minorization_certificate(kl.mh_kernel(model.table, ladder.temperatures[i],
                                                          Q)).epsilon
        floor = (1 - p_ee) * eps_mh if i == 0 else eps_mh
        assert kl.minorization_certificate(S).epsilon >= floor - 1e-15


def test_limit_kernel_matches_jump_operator_on_exact_buffer(six_state):
    # a buffer holding each hot-ring state in proportion to its weight reproduces S
    from eemcs.ee import RingBufferSet, empirical_jump_operator
    model, ladder, _ = six_state
    h = model.table
    rings = ring_indices(ladder, h)
    hot = kl.tempered(h, ladder.temperatures[1])
    scale = 1000
    counts = np.round(hot * scale).astype(int)
    b = RingBufferSet(2, 2, 1)
    for s in range(6):
        for _ in range(counts[s]):
            b.append(1, [float(s)], h[s], int(rings[s]))
    Tj = np.zeros((6, 6))
    for x in range(6):
        for y in range(6):
            f = lambda z, y=y: float(int(z[0]) == y)
            Tj[x, y] = empirical_jump_operator(0, [float(x)], f, b, model, ladder)
    prop = counts * 1.0
    exact = np.zeros((6, 6))
    for j in (0, 1):
        mask = rings == j
        hot_c = prop * mask
        hot_c /= hot_c.sum()
        b_ = 1 / ladder.temperatures[0] - 1 / ladder.temperatures[1]
        for x in np.nonzero(mask)[0]:
            a = np.exp(np.minimum((h[x] - h) * b_, 0.0))
            exact[x] = hot_c * a
            exact[x, x] += 1 - exact[x].sum()
    np.testing.assert_allclose(Tj, exact, atol=1e-12)
    limit = np.zeros((6, 6))
    for j in (0, 1):
        limit[rings == j] = kl.ee_jump_kernel(model, ladder, 0, j)[rings == j]
    assert np.abs(Tj - limit).max() < 2e-3


def test_constant_sequence_converges_to_stationary():
    rng = np.random.default_rng(5)
    P = _random_kernel(rng, 4)
    traj = kl.nonhomogeneous_product([1, 0, 0, 0], [P] * 200)
    assert np.abs(traj[-1] - kl.stationary(P)).sum() < 1e-12
    with pytest.raises(kl.KernelLabError):
        kl.nonhomogeneous_product([1, 0, 0], [P])


def test_interpolated_sequence_passes_conditions():
    model, ladder, Qu = kl.six_state_model()
    P = kl.mh_kernel(model.table, 1.0, Qu)
    Q = kl.mh_kernel(model.table, 1.0, np.array([kl.tempered(model.table, 3.0)] * 6))
    ks = kl.interpolated_sequence(P, Q, 400)
    assert len(ks) == 401
    np.testing.assert_array_equal(ks[0], Q)
    np.testing.assert_allclose(ks[1], Q)
    rep = kl.check_product_conditions(ks, P, 2.0)
    assert rep.passed
    steps = rep.step_distances[1:]
    n = np.arange(2, 401)
    # ||P_n - P_{n-1}|| = ||P - Q|| / (n (n - 1))
    np.testing.assert_allclose(steps, kl.kernel_distance(P, Q) / (n * (n - 1)), rtol=1e-9)


def test_non_ergodic_sequence_is_flagged():
    perm = np.roll(np.eye(3), 1, axis=1)
    rep = kl.check_product_conditions([perm] * 5, perm, 2.0)
    assert not rep.uniform_minorization and not rep.passed


def test_azuma_bound_value():
    r = kl.azuma_tail_check(0.9, 0.5, 100, 10, np.full((2, 2), 0.5), [True, True])
    assert r.union_bound == pytest.approx(100 * math.exp(-12.5), rel=1e-12)
    assert r.union_bound == pytest.approx(3.73e-4, rel=1e-3)


def test_azuma_on_iid_coin_chain():
    K = np.array([[0.7, 0.3], [0.7, 0.3]])
    r = kl.azuma_tail_check(0.7, 0.2, 200, 20_000, K, [True, False], rng=1)
    assert r.tail <= r.bound / 10
    assert r.occupation <= r.occupation_cap
    assert r.occupation == pytest.approx(1 / 0.7, rel=0.02)


def test_azuma_argument_errors():
    K = np.array([[0.7, 0.3], [0.2, 0.8]])
    with pytest.raises(kl.KernelLabError):
        kl.azuma_tail_check(0.5, 0.6, 10, 10, K, [True, False])
    with pytest.raises(kl.KernelLabError, match="drops"):
        kl.azuma_tail_check(0.5, 0.1, 10, 10, K, [True, False])


def test_integral_convergence_harness():
    f = np.array([1.0, -0.5, 0.25])
    mu = np.array([0.2, 0.3, 0.5])
    ns = np.arange(1, 200)
    fs = [f * (1 - 1 / (n + 1)) for n in ns]
    mus = [(1 - 1 / n) * mu + np.array([1.0, 0, 0]) / n for n in ns]
    err = kl.integral_convergence(fs, mus, f, mu)
    assert err[-1] < 0.02 and err[-1] < err[0]
    with pytest.raises(kl.KernelLabError):
        kl.integral_convergence([2 * f], [mu], f, mu)


def test_simulate_chain_frequencies():
    P = np.array([[0.9, 0.1], [0.4, 0.6]])
    paths = kl.simulate_chain(P, 50, 4000, 0)
    freq = (paths == 0).mean()
    assert abs(freq - 0.8) < 0.01
    assert kl.simulate_chain(P, 5, 3, 0, x0=1)[:, 0].tolist() == [1, 1, 1]


def test_occupation_chain_has_large_delta():
    K, mask, delta = kl.occupation_chain()
    assert delta > 0.5
    assert K[:, mask].sum(axis=1).min() >= delta - 1e-12


def test_custom_scenario_from_file(tmp_path):
    P = np.array([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]])
    np.savetxt(tmp_path / "k.txt", P)
    rep = kl.run_scenario("custom", kernel_file=str(tmp_path / "k.txt"))
    assert rep.passed, rep.summary()
    rep.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().startswith("scenario,check,passed")
    with pytest.raises(kl.KernelLabError):
        kl.run_scenario("nope")


def test_limit_kernel_scenario_passes():
    rep = kl.run_scenario("limit-kernel")
    assert rep.passed, rep.summary()
