import csv
import math

import numpy as np
import pytest

from eemcs import estimate
from eemcs.estimate import (ComparisonTable, ReplicationResult, SamplerSettings, choose_sources,
                            combine, comparison_table, conditional_reweighted_mean, improvement,
                            ring_decomposed_estimate, ring_probs_from_samples,
                            ring_probs_from_weights)
from eemcs.mcs import WeightTable
from eemcs.samples import SampleSet
from eemcs.target import FiniteModel, LadderConfig, ring_index


def _table(phi):
    t = WeightTable.zeros(1, len(phi))
    t.log_phi[0] = np.log(phi)
    return t


def test_ring_probs_from_weights_examples():
    np.testing.assert_allclose(ring_probs_from_weights(_table([2.0, 2.0])), [0.5, 0.5], rtol=1e-12)
    np.testing.assert_allclose(ring_probs_from_weights(_table([3.0, 1.0])), [0.75, 0.25],
                               rtol=1e-12)


def test_ring_probs_from_samples():
    s = SampleSet([0, 0, 0, 1], [0, 1, 2, 0], [0, 1, 1, 0], [[0.0], [1.0], [1.0], [0.0]])
    np.testing.assert_allclose(ring_probs_from_samples(s, 3), [1 / 3, 2 / 3, 0.0])
    with pytest.raises(ValueError):
        ring_probs_from_samples(s, 3, chain=2)


def _set(chain, ring, x):
    return SampleSet(chain, np.arange(len(chain)), ring, np.asarray(x, dtype=float)[:, None])


def test_unit_temperature_gives_plain_average():
    m = FiniteModel([0.0, 1.0, 2.0, 3.0])
    lad = LadderConfig((0.0,), (1.0, 2.0))
    s = _set([0, 0, 0], [0, 0, 0], [0, 1, 3])
    g = lambda X, model: X[:, 0] * 10
    assert conditional_reweighted_mean(s, g, 0, m, lad, 0) == pytest.approx(40 / 3, rel=1e-12)


def test_single_sample_returns_g():
    m = FiniteModel([0.0, 7.0])
    lad = LadderConfig((0.0,), (1.0, 5.0))
    s = _set([1], [0], [1])
    assert conditional_reweighted_mean(s, lambda X, _: X[:, 0] + 2.5, 0, m, lad, 1) == 3.5


def test_two_sample_hand_computed_weights():
    m = FiniteModel([1.0, 3.0])
    lad = LadderConfig((0.0,), (1.0, 2.0))
    s = _set([1, 1], [0, 0], [0, 1])
    # log w = -h/2 -> weights e^{-1/2}, e^{-3/2}
    w0, w1 = math.exp(-0.5), math.exp(-1.5)
    expect = (w0 * 4.0 + w1 * 9.0) / (w0 + w1)
    got = conditional_reweighted_mean(s, np.array([4.0, 9.0]), 0, m, lad, 1)
    assert got == pytest.approx(expect, rel=1e-12)


def test_empty_ring_is_missing_and_reduces_coverage():
    m = FiniteModel([0.0, 2.0])
    lad = LadderConfig((0.0, 1.0), (1.0,), ring_policy="strict")
    s = _set([0, 0], [0, 0], [0, 0])
    assert math.isnan(conditional_reweighted_mean(s, lambda X, _: X[:, 0], 1, m, lad, 0))
    est = ring_decomposed_estimate(s, lambda X, _: X[:, 0] + 1, [0.7, 0.3], m, lad)
    assert est.missing.tolist() == [False, True]
    assert est.coverage == pytest.approx(0.7)
    assert est.combined == pytest.approx(0.7)


def test_combine_examples_and_errors():
    assert combine([1.0], [4.2]) == 4.2
    assert combine([0.5, 0.5], [0.0, 2.0]) == 1.0
    with pytest.raises(ValueError, match="length mismatch"):
        combine([0.5, 0.5], [1.0])


def test_choose_sources_prefers_coldest_with_enough_samples():
    chain = [0] * 3 + [1] * 30 + [2] * 5
    ring = [0] * 3 + [0] * 30 + [1] * 5
    s = _set(chain, ring, np.zeros(len(chain)))
    assert choose_sources(s, 3, 3, min_ring_samples=25).tolist() == [1, 2, -1]


def test_ring_decomposition_exact_on_finite_model():
    # h = -log(m) so chain-0 samples with multiplicity m are an exact draw
    mult = np.array([3, 1, 2, 4, 6, 1])
    h = -np.log(mult / mult.max())
    m = FiniteModel(h)
    lad = LadderConfig((0.0, 0.5, 1.2), (1.0,), ring_policy="strict")
    states = np.repeat(np.arange(6), mult)
    rings = np.array([ring_index(lad, v) for v in h[states]])
    s = _set(np.zeros(len(states), dtype=int), rings, states)
    g_vals = np.array([1.5, -2.0, 0.25, 3.0, 7.0, -1.0])
    g = lambda X, _: g_vals[X[:, 0].astype(int)]
    pi = mult / mult.sum()
    p = np.bincount([ring_index(lad, v) for v in h], weights=pi, minlength=3)
    est = ring_decomposed_estimate(s, g, p, m, lad)
    assert abs(est.combined - pi @ g_vals) < 1e-12
    assert est.coverage == pytest.approx(1.0, abs=1e-12)
    assert abs(est.p_hat.sum() - 1.0) < 1e-12


def test_improvement_examples():
    assert improvement(1.1377, 1.0) == pytest.approx(13.77, rel=1e-12)
    assert improvement(2.0, 2.0) == 0.0
    assert improvement(0.5, 1.0) == -50.0
    assert math.isnan(improvement(1.0, 0.0))


def test_identical_seeds_give_zero_sigma(mixture4):
    model, ladder = mixture4
    settings = SamplerSettings(burn_in_N=100)
    seed = np.random.SeedSequence(4)
    for sampler in ("EE", "MCS"):
        res = estimate.replication_experiment(model, ladder, settings, sampler, 2, N=800,
                                              seeds=[seed, seed])
        assert np.all(res.sigma == 0.0)
        table = comparison_table([res], [res])
        assert all(math.isnan(v) for v in table.rows[800])


def test_identical_result_sets_give_zero_table():
    est = np.array([[1.0, 2.0], [1.5, 2.5], [0.5, 2.25]])
    a = ReplicationResult("EE", 100, ("mean_x1", "mean_x2"), est, est)
    b = ReplicationResult("MCS", 100, ("mean_x1", "mean_x2"), est.copy(), est)
    assert comparison_table([a], [b]).rows[100].tolist() == [0.0, 0.0]


def test_comparison_table_validation():
    est = np.ones((3, 1))
    a = ReplicationResult("EE", 100, ("mean_x1",), est, est)
    with pytest.raises(ValueError):
        comparison_table([a], [ReplicationResult("MCS", 200, ("mean_x1",), est, est)])
    with pytest.raises(ValueError):
        comparison_table([a], [ReplicationResult("MCS", 100, ("mean_x2",), est, est)])
    with pytest.raises(ValueError):
        comparison_table([a], [ReplicationResult("MCS", 100, ("mean_x1",), est[:2], est[:2])])


def test_comparison_csv_schema(tmp_path):
    t = ComparisonTable(estimate.DEFAULT_FUNCTIONALS,
                        {10_000: np.array([13.77, 12.53, 8.98, -63.49]),
                         50_000: np.array([1.0, math.nan, 0.0, 2.0])})
    t.to_csv(tmp_path / "c.csv")
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == ["N", "E(X1)", "E(X2)", "E(X2^2)", "Pr(X in B)"]
    assert rows[1] == ["10000", "13.77", "12.53", "8.98", "-63.49"]
    assert rows[2][2] == "undefined"


def test_replication_argument_errors(mixture4):
    model, ladder = mixture4
    with pytest.raises(ValueError):
        estimate.replication_experiment(model, ladder, SamplerSettings(), "PT", 3)
    with pytest.raises(ValueError):
        estimate.replication_experiment(model, ladder, SamplerSettings(), "EE", 1)


def test_replication_experiment_is_deterministic(mixture4):
    model, ladder = mixture4
    s = SamplerSettings(burn_in_N=100, s0=0.15)
    a = estimate.replication_experiment(model, ladder, s, "MCS", 3, master_seed=5, N=1000)
    b = estimate.replication_experiment(model, ladder, s, "MCS", 3, master_seed=5, N=1000)
    np.testing.assert_array_equal(a.estimates, b.estimates)
    c = estimate.replication_experiment(model, ladder, s, "MCS", 3, master_seed=5, N=1000,
                                        jobs=2)
    np.testing.assert_array_equal(a.estimates, c.estimates)


def test_ee_ring_estimate_agrees_with_chain0_average(mixture4):
    model, ladder = mixture4
    s = SamplerSettings(burn_in_N=500, s0=0.15)
    out = estimate.estimate_ee(model, ladder, s, 5000, 3, ("mean_x1", "prob_discs"))
    for name, (ring_est, plain) in out.items():
        assert ring_est.combined == pytest.approx(plain, abs=1e-12)


def test_mcs_pipeline_near_truth(mixture4):
    model, ladder = mixture4
    s = SamplerSettings(burn_in_N=500, s0=0.15)
    res = estimate.replication_experiment(model, ladder, s, "MCS", 6, master_seed=2, N=5000,
                                          functionals=("mean_x1", "mean_x2_sq"))
    exact = model.exact_moments()
    for k, name in enumerate(res.functionals):
        se = res.sigma[k] / math.sqrt(6)
        assert abs(res.estimates[:, k].mean() - exact[name]) < 4 * se + 1e-3


def test_write_raw_estimates(tmp_path):
    est = np.array([[1.0], [2.0]])
    a = ReplicationResult("EE", 10, ("mean_x1",), est, est + 1)
    b = ReplicationResult("MCS", 10, ("mean_x1",), est, np.full_like(est, math.nan))
    estimate.write_raw_estimates(tmp_path / "raw.csv", [a, b])
    rows = list(csv.DictReader(open(tmp_path / "raw.csv")))
    assert len(rows) == 4
    assert rows[1]["plain_estimate"] == "3.0" and rows[3]["plain_estimate"] == ""
