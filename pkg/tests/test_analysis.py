import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from rank1crit import analysis
from rank1crit.exploration import decompose, explore
from rank1crit.graph import GraphSample, RankedSizes, TiltParams, components_union_find
from rank1crit.weights import WeightSequence

ranked = st.lists(st.floats(0, 100), max_size=12).map(lambda v: np.sort(np.array(v))[::-1])
samples = st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60)


def test_rescaled_sizes():
    r = analysis.rescaled_sizes(RankedSizes(np.array([4, 1])), 8)
    assert np.allclose(r.sizes, [1, 0.25])
    assert len(analysis.rescaled_sizes(RankedSizes(np.zeros(0)), 8)) == 0


def test_l2_examples():
    assert analysis.l2_distance([1, 0], [0, 0]) == 1
    assert analysis.l2_distance([3, 4], [0, 0]) == 5
    assert analysis.l2_distance([3, 4], []) == 5
    assert analysis.l2_distance([2, 1], [2, 1]) == 0


@given(ranked, ranked, ranked)
def test_l2_is_a_metric(x, y, z):
    d = analysis.l2_distance
    assert d(x, y) == pytest.approx(d(y, x))
    assert d(x, x) == 0
    assert d(x, z) <= d(x, y) + d(y, z) + 1e-9


def _decomposition(n=1000, seed=0):
    tr = explore(WeightSequence(np.ones(n)), TiltParams(0, n), seed)
    return tr, decompose(tr)


def test_drift_and_variance_at_zero():
    _, d = _decomposition()
    assert analysis.drift_check(d, 1000, 1, 1, 0, 0.0) == 0
    assert analysis.variance_check(d, 1000, 1, 1, 0.0) == 0


def test_drift_affine_in_t():
    _, d = _decomposition()
    n = 1000
    k = np.arange(int(np.floor(n ** (2 / 3) + 1e-9)) + 1)
    s = k * n ** (-2 / 3)
    for t in (0.0, 1.0, -2.0):
        direct = np.max(np.abs(d.A[k] * n ** (-1 / 3) + s**2 / 2 - s * t))
        assert analysis.drift_check(d, n, 1, 1, t, 1.0) == pytest.approx(direct)


def test_max_jump():
    tr, d = _decomposition(n=1)
    assert analysis.max_jump_check(d, 1) == 1.0
    tr, d = _decomposition()
    assert analysis.max_jump_check(d, 1000) == pytest.approx(1000 ** (-2 / 3) * (1 + tr.child_counts.max()) ** 2)
    assert analysis.max_jump_from_counts(tr.child_counts, 1000) == analysis.max_jump_check(d, 1000)
    assert analysis.max_jump_from_counts([0, 3], 1) > analysis.max_jump_from_counts([0, 2], 1)


def test_poisson_counter():
    dev, arrivals = analysis.poisson_counter_check(WeightSequence([1.0]), seed=0, s_max=2.0)
    assert dev >= 0 and len(arrivals) <= 1
    dev, arrivals = analysis.poisson_counter_check(WeightSequence(np.ones(10**4)), seed=1, s_max=2.0)
    assert np.all(np.diff(arrivals) >= 0)
    # brute-force sup on a fine grid is a lower bound of the exact sup
    n = 10**4
    s = np.linspace(0, 2, 20001)
    N = np.searchsorted(arrivals, s, side="right")
    assert np.max(np.abs(N * n ** (-2 / 3) - s)) <= dev + 1e-12


def test_ks_examples():
    assert analysis.ks_two_sample([1, 2, 3], [1, 2, 3])[0] == 0
    assert analysis.ks_two_sample([0], [1])[0] == 1
    rng = np.random.default_rng(0)
    d, p = analysis.ks_two_sample(rng.random(100), rng.random(100) + 0.5)
    assert abs(d - 0.5) < 0.2 and p < 0.01
    with pytest.raises(ValueError):
        analysis.ks_two_sample([], [1])


@given(samples, samples)
def test_ks_matches_scipy(a, b):
    d, p = analysis.ks_two_sample(a, b)
    ref = ks_2samp(a, b, method="asymp")
    assert d == pytest.approx(ref.statistic, abs=1e-12)
    assert 0 <= d <= 1 and 0 <= p <= 1


def test_ks_self_consistency():
    # equal-law samples of 2000 pass the 1% critical value in >= 95% of repetitions
    crit = analysis.ks_critical_value(2000, 2000, 0.01)
    assert crit == pytest.approx(1.63 * np.sqrt(2 / 2000), rel=0.01)
    rng = np.random.default_rng(3)
    passes = sum(analysis.ks_two_sample(rng.exponential(size=2000), rng.exponential(size=2000))[0] <= crit
                 for _ in range(200))
    assert passes >= 190


def test_compare_to_itself():
    rng = np.random.default_rng(1)
    x = [np.sort(rng.random(5))[::-1] for _ in range(50)]
    rep = analysis.compare_to_limit(x, x, k=3)
    assert rep.ks_stat_per_rank == [0, 0, 0]
    assert rep.all_pass and rep.l2_mean_top10 == 0
    assert rep.padded["replicas"] == 50  # five entries each, padded to ten


def test_compare_pads_and_flags():
    rep = analysis.compare_to_limit([RankedSizes(np.array([3.0]))] * 4, [np.array([3.0, 1.0, 1.0])] * 4, k=3)
    assert rep.ks_stat_per_rank[1] == 1.0
    assert rep.padded == {"replicas": 4, "limit": 4}


def test_compare_rejects_mismatched_parameters():
    with pytest.raises(ValueError, match="mismatch"):
        analysis.compare_to_limit([[1.0]], [[1.0]], graph_params=(1, 1, 0), limit_params=(1, 8, 0))


def test_report_exports(tmp_path):
    rng = np.random.default_rng(2)
    x = rng.random((30, 10))
    y = rng.random((40, 10))
    rep = analysis.compare_to_limit(list(x), list(y), k=2)
    rep.write_json(tmp_path / "r.json")
    js = json.loads((tmp_path / "r.json").read_text())
    assert js["sample_sizes"] == [30, 40] and len(js["ks_stat_per_rank"]) == 2
    analysis.write_rank_ecdfs(tmp_path / "e.csv", x, y, k=2)
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "source,rank,value,ecdf"
    assert len(lines) == 1 + 2 * 30 + 2 * 40


def test_cluster_weights():
    n = 500
    ws = WeightSequence(np.ones(n))
    tr = explore(ws, TiltParams(1, n), seed=3)
    cw, factor = analysis.cluster_weight_sizes(tr, ws)
    g = GraphSample(n, tr.realized_edges, None, tr.params)
    assert np.array_equal(cw.sizes, components_union_find(g).sizes)
    assert factor == pytest.approx(n ** (1 / 3) / n)

    ws = WeightSequence([1.0, 2.0, 3.0])
    g = GraphSample(3, np.array([[0, 1]]), None, TiltParams(0, 3))
    cw, _ = analysis.cluster_weight_sizes(g, ws)
    assert list(cw.sizes) == [3.0, 3.0]
    g = GraphSample(3, np.empty((0, 2), dtype=np.int64), None, TiltParams(0, 3))
    assert list(analysis.cluster_weight_sizes(g, ws)[0].sizes) == [3.0, 2.0, 1.0]
