import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rank1crit.weights import (ConditionThresholds, DistributionSpec, WeightSequence, check_conditions,
                               criticalize, iid_weights, power_sums, quantile_weights)

PARETO = DistributionSpec.pareto(4, 1)

positive_arrays = st.lists(st.floats(min_value=1e-3, max_value=1e3), min_size=1, max_size=60).map(np.array)


def test_pareto_moments_by_integration():
    # E[W^k] = alpha x_min^k / (alpha - k)
    assert PARETO.mu == pytest.approx(4 / 3)
    assert PARETO.moment(2) == pytest.approx(2.0)
    assert PARETO.sigma3 == pytest.approx(4.0)
    assert PARETO.moment(4) == math.inf
    crit = PARETO.scaled(PARETO.critical_scale())
    assert crit.nu == pytest.approx(1.0)
    assert crit.mu == pytest.approx(8 / 9)
    assert crit.sigma3 == pytest.approx(32 / 27)


def test_pareto_guard():
    with pytest.raises(ValueError, match="alpha"):
        DistributionSpec.pareto(3.0)
    DistributionSpec.pareto(3.01)


def test_discrete_probabilities_must_sum_to_one():
    with pytest.raises(ValueError):
        DistributionSpec.discrete([(1, 0.5), (2, 0.4)])
    d = DistributionSpec.discrete([(2, 0.5), (1, 0.5)])
    assert d.atoms == ((1.0, 0.5), (2.0, 0.5))
    assert d.moment(3) == pytest.approx(4.5)


def test_json_roundtrip():
    for d in (PARETO, DistributionSpec.constant(2.5), DistributionSpec.discrete([(1, 0.25), (3, 0.75)]),
              PARETO.scaled(0.5)):
        assert DistributionSpec.from_json(d.to_json()) == d
    with pytest.raises(ValueError):
        DistributionSpec.from_json({"family": "pareto", "alpha": 4, "beta": 1})


def test_empirical_from_file(tmp_path):
    f = tmp_path / "w.txt"
    f.write_text("1\n2\n2\n3\n")
    d = DistributionSpec.empirical(f)
    assert d.atoms == ((1.0, 0.25), (2.0, 0.5), (3.0, 0.25))
    assert d.mu == pytest.approx(2.0)
    assert d.sigma3 == pytest.approx((1 + 16 + 27) / 4)


def test_quantile_pareto_examples():
    ws = quantile_weights(PARETO, 4)
    assert ws.w[0] == pytest.approx(math.sqrt(2))
    assert ws.w[3] == 1.0
    assert ws.provenance == "quantile"
    assert any("infimum" in note for note in ws.notes)
    assert np.all(np.diff(ws.w) <= 0)


def test_quantile_literal_endpoint_is_refused():
    with pytest.raises(ValueError, match="w_n = 0"):
        quantile_weights(PARETO, 4, literal_endpoint=True)


def test_constant_weights():
    assert np.all(quantile_weights(DistributionSpec.constant(1), 7).w == 1)
    assert np.all(iid_weights(DistributionSpec.constant(2), 3, seed=5).w == 2)


def test_iid_deterministic():
    a = iid_weights(PARETO, 1000, seed=9)
    b = iid_weights(PARETO, 1000, seed=9)
    assert np.array_equal(a.w, b.w)
    assert not np.array_equal(a.w, iid_weights(PARETO, 1000, seed=10).w)


def test_iid_pareto_mean():
    n = 10**6
    ws = iid_weights(PARETO, n, seed=1)
    sd = math.sqrt(PARETO.moment(2) - PARETO.mu**2)
    assert abs(ws.S(1) / n - 4 / 3) < 3 * sd / math.sqrt(n)


def test_criticalize_examples():
    ones = WeightSequence(np.ones(3))
    assert criticalize(ones) is ones
    ws = WeightSequence([1.0, 2.0, 3.0])
    assert ws.nu_n == pytest.approx(14 / 6)
    c = criticalize(ws)
    assert np.allclose(c.w, [3 / 7, 6 / 7, 9 / 7])
    assert c.nu_n == pytest.approx(1.0, abs=1e-15)
    assert c.scale == pytest.approx(6 / 14)


@given(positive_arrays)
def test_criticalize_idempotent_and_order_preserving(w):
    ws = criticalize(WeightSequence(w))
    again = criticalize(ws)
    assert again is ws
    assert np.array_equal(np.argsort(w, kind="stable"), np.argsort(ws.w, kind="stable"))


@given(positive_arrays)
def test_power_sums_match_recomputation(w):
    ws = WeightSequence(w)
    for k in range(1, 6):
        direct = float(np.sum(w.astype(np.longdouble) ** k))
        assert ws.S(k) == pytest.approx(direct, rel=1e-9 * w.size)


def test_power_sums_are_compensated():
    w = np.array([1e8] + [1e-8] * 1000)
    assert power_sums(w, 1)[0] == math.fsum(w)


def test_weights_must_be_positive():
    with pytest.raises(ValueError):
        WeightSequence([1.0, 0.0])
    with pytest.raises(ValueError):
        WeightSequence([])


def test_csv_roundtrip(tmp_path):
    ws = criticalize(iid_weights(PARETO, 50, seed=3))
    p = tmp_path / "w.csv"
    ws.to_csv(p)
    back = WeightSequence.from_csv(p)
    assert np.array_equal(back.w, ws.w)
    assert back.provenance == "iid" and back.seed == 3
    assert p.read_text().startswith("# n: 50")


def test_check_conditions_constant():
    n = 1000
    ws = WeightSequence(np.ones(n), dist=DistributionSpec.constant(1))
    rep = check_conditions(ws)
    assert rep.moment_residuals == (0.0, 0.0, 0.0)
    assert rep.max_weight_ratio == pytest.approx(n ** (-1 / 3))
    assert rep.all_pass
    assert rep.nu_n == 1.0


def test_check_conditions_pareto_residuals_shrink():
    resid = [check_conditions(quantile_weights(PARETO, n)).moment_residuals for n in (10**3, 10**4, 10**5)]
    for k in range(3):
        assert resid[0][k] > resid[1][k] > resid[2][k]


def test_check_conditions_infinite_moment():
    d = DistributionSpec.pareto(3.5)
    ws = quantile_weights(d, 100)
    rep = check_conditions(ws)  # third moment finite for alpha=3.5
    assert math.isfinite(rep.moment_residuals[2])
    with pytest.raises(ValueError, match="E\\[W\\^3\\]"):
        check_conditions(ws, dist=_InfiniteThird(d))


class _InfiniteThird:
    # minimal stand-in for a law whose third moment diverges
    def __init__(self, base):
        self.base = base

    def moment(self, k):
        return math.inf if k == 3 else self.base.moment(k)

    def to_json(self):
        return {"family": "test"}


def test_thresholds_from_dict():
    th = ConditionThresholds.from_dict({"third": 0.2})
    assert th.third == 0.2 and th.cdf_gap == 0.05
    ws = quantile_weights(PARETO, 1000)
    strict = check_conditions(ws, thresholds=ConditionThresholds(third=1e-9))
    assert not strict.passes["third_moment"]


def test_quantile_lower_riemann_sum():
    for n in (10, 100, 1000):
        ws = quantile_weights(PARETO, n)
        for s in (1, 2, 3):
            assert ws.S(s) / n <= PARETO.moment(s)


def test_max_weight_ratio_decreases():
    r = [check_conditions(quantile_weights(PARETO, 10**k)).max_weight_ratio for k in (3, 4, 5, 6)]
    assert all(a > b for a, b in zip(r, r[1:]))


@settings(max_examples=30)
@given(st.floats(min_value=3.1, max_value=10), st.floats(min_value=0.1, max_value=5),
       st.floats(min_value=1e-9, max_value=1.0))
def test_pareto_survival_inverse(alpha, x_min, u):
    d = DistributionSpec.pareto(alpha, x_min)
    x = d.survival_inverse(np.array([u]))[0]
    assert 1 - d.cdf(np.array([x]))[0] == pytest.approx(u, rel=1e-6)
