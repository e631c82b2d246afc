import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from onejump.compound import (
    Counter,
    GridLaw,
    TruncationError,
    compound_tail,
    counterexample_probe,
    kesten_constant,
    kesten_series_condition,
    root_probe,
)
from onejump.distributions import Exponential, Pareto
from onejump.gridnum import GridSpec, discretize, estimate_cF, nfold_tail


@pytest.fixture(scope="module")
def pareto2():
    return discretize(Pareto(2.0, 1.0), GridSpec(1e3))


@pytest.mark.parametrize("p", [0.2, 0.5, 0.9])
def test_geometric_exponential_closed_form(p):
    g = discretize(Exponential(1.0), GridSpec(100.0))
    res = compound_tail(g, Counter.geometric(p))
    exact = p * np.exp(-(1 - p) * g.xs)
    small = g.xs <= 4
    np.testing.assert_allclose(res.grid.vals[small], exact[small], rtol=1e-4)
    # further out the quadrature error of high powers dominates
    assert np.max(np.abs(res.grid.vals - exact)) <= res.remainder_bound + 1e-4


def test_deterministic_count_is_nfold(pareto2):
    for n in (1, 2, 4):
        res = compound_tail(pareto2, Counter.deterministic(n))
        np.testing.assert_allclose(res.grid.vals, nfold_tail(pareto2, n).vals, rtol=1e-13)
        assert res.method == "exact"


def test_single_term_lower_bound(pareto2):
    for counter in (Counter.geometric(0.4), Counter.poisson(1.5), Counter.negative_binomial(3.0, 0.2)):
        res = compound_tail(pareto2, counter)
        p1 = float(counter.pmf(np.array([1]))[0])
        assert np.all(res.grid.log_vals >= math.log(p1) + pareto2.log_vals - 1e-12)


def test_kesten_remainder_certificate(pareto2):
    cf = estimate_cF(pareto2).c_F
    short = compound_tail(pareto2, Counter.geometric(0.3), cf)
    long = compound_tail(pareto2, Counter.geometric(0.3), cf, tol=1e-14)
    assert short.method == "kesten"
    assert long.index > short.index
    gap = (long.grid.vals - short.grid.vals) / pareto2.vals
    assert np.all(gap >= -1e-15)
    assert np.all(gap <= short.remainder_bound)


def test_poisson_compound_against_simulation(pareto2):
    res = compound_tail(pareto2, Counter.poisson(1.0))
    rng = np.random.default_rng(17)
    n = 10_000_000
    counts = rng.poisson(1.0, n)
    jumps = Pareto(2.0, 1.0).sample(rng, int(counts.sum()))
    sums = np.bincount(np.repeat(np.arange(n, dtype=np.int64), counts), weights=jumps, minlength=n)
    for x in (2.0, 10.0, 50.0):
        p = float(res.grid.tail_at(np.array(x)))
        emp = float(np.mean(sums > x))
        assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_doubling_the_index_cap_changes_nothing(pareto2):
    counter = Counter.geometric(0.8)
    tol = 1e-9
    a = compound_tail(pareto2, counter, tol=tol, cap=512)
    b = compound_tail(pareto2, counter, tol=tol, cap=1024)
    assert np.max(np.abs(a.grid.vals - b.grid.vals)) <= tol


def test_truncation_error_carries_partial_result(pareto2):
    with pytest.raises(TruncationError) as err:
        compound_tail(pareto2, Counter.geometric(0.99), cap=16)
    e = err.value
    assert e.index == 16
    assert e.remainder == pytest.approx(0.99**17, rel=1e-9)
    assert e.partial.xs.size == pareto2.xs.size


@given(
    kind=st.sampled_from(["poisson", "geometric", "negative_binomial"]),
    a=st.floats(0.05, 0.95),
)
def test_counter_pmf_normalized_and_mean(kind, a):
    counter = {
        "poisson": lambda: Counter.poisson(10 * a),
        "geometric": lambda: Counter.geometric(a),
        "negative_binomial": lambda: Counter.negative_binomial(2.5, a),
    }[kind]()
    ks = np.arange(0, 4000)
    pmf = counter.pmf(ks)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-9)
    assert float((ks * pmf).sum()) == pytest.approx(counter.mean, rel=1e-8)
    assert counter.count_tail(3) == pytest.approx(1 - pmf[:4].sum(), abs=1e-12)


def test_counter_pmfs_match_scipy():
    ks = np.arange(0, 30)
    np.testing.assert_allclose(Counter.poisson(3.0).pmf(ks), stats.poisson(3.0).pmf(ks), rtol=1e-12)
    np.testing.assert_allclose(Counter.geometric(0.3).pmf(ks), 0.7 * 0.3**ks, rtol=1e-12)
    np.testing.assert_allclose(
        Counter.negative_binomial(2.0, 0.4).pmf(ks), stats.nbinom(2.0, 0.6).pmf(ks), rtol=1e-10
    )


def test_counter_sampling(rng):
    c = Counter.negative_binomial(2.0, 0.4)
    s = c.sample(rng, 200_000)
    assert s.mean() == pytest.approx(c.mean, rel=0.02)


def test_counter_validation():
    with pytest.raises(ValueError):
        Counter.geometric(1.0)
    with pytest.raises(ValueError):
        Counter.explicit([0.5, 0.4])
    with pytest.raises(ValueError):
        Counter.deterministic(0)
    c = Counter.from_descriptor(Counter.poisson(2.0).to_descriptor())
    assert c.mean == pytest.approx(2.0)


def test_kesten_series_condition():
    cf = 2.0
    z = cf + 0.1 - 1
    out = kesten_series_condition(Counter.geometric(0.5), cf)
    assert out["finite"] and out["value"] == pytest.approx(0.5 / (1 - 0.5 * z))
    assert not kesten_series_condition(Counter.geometric(0.99), cf)["finite"]
    assert kesten_series_condition(Counter.poisson(3.0), 50.0)["finite"]
    out = kesten_series_condition(Counter.negative_binomial(2.0, 0.3), cf)
    assert out["value"] == pytest.approx((0.7 / (1 - 0.3 * z)) ** 2)


def test_kesten_constant_covers_fit_range(pareto2):
    cf = estimate_cF(pareto2).c_F
    c = kesten_constant(pareto2, cf)
    r = cf + 0.1 - 1
    for n in (1, 2, 3):
        ratio = np.exp(nfold_tail(pareto2, n).log_vals - pareto2.log_vals)
        assert np.all(ratio <= c * r**n)


def test_grid_law_continues_power_tail():
    g = discretize(Pareto(2.0, 1.0), GridSpec(1e3))
    law = GridLaw(g)
    x = np.array([3.0, 500.0, 4000.0])
    np.testing.assert_allclose(law.tail(x), x**-2.0, rtol=1e-3)
    with pytest.raises(NotImplementedError):
        law.sample(np.random.default_rng(0), 3)


def test_root_probe_on_pareto():
    g = discretize(Pareto(1.0, 1.0), GridSpec(1e3))
    res = compound_tail(g, Counter.poisson(1.0))
    probe = root_probe(res.grid, g)
    assert probe["weak_equivalent"] and probe["both_member"]
    assert probe["best_power"] is not None


def test_light_count_bounded_ratio():
    curve, res = counterexample_probe(0.3, spec=GridSpec(40.0))
    assert res.index >= 1
    assert curve.window_limsup < 20
