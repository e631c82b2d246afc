import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from onejump.distributions import (
    BigJumpLight,
    Dirac,
    Empirical,
    Exponential,
    Lognormal,
    Pareto,
    PeterPaul,
    Weibull,
    from_descriptor,
    load_empirical,
    max_of,
    min_of,
    mixture,
    normalizing_constant_bigjumplight,
    shift,
)

CATALOG = [
    Pareto(1.0, 1.0),
    Pareto(2.0, 1.0),
    Exponential(1.0),
    PeterPaul(),
    BigJumpLight(),
    Weibull(0.5, 1.0),
    Lognormal(0.0, 1.0),
]


def test_normalizing_constant_matches_independent_quadrature():
    # oracle: mpmath-free closed form through scipy's quad on the whole half line
    val, _ = integrate.quad(lambda x: math.exp(-x) / (1 + x * x), 0, np.inf, epsabs=1e-14)
    assert normalizing_constant_bigjumplight() == pytest.approx(1 / val, rel=1e-10)
    assert 1.608 <= normalizing_constant_bigjumplight() <= 1.610


def test_bigjumplight_exponential_moment():
    # E e^X = C * integral of 1/(1+x^2) = C pi / 2
    d = BigJumpLight()
    val, _ = integrate.quad(lambda x: math.exp(x) * d.density(np.array(x)), 0, np.inf, limit=400)
    assert val == pytest.approx(d.C * math.pi / 2, rel=1e-6)


def test_bigjumplight_tail_against_quadrature():
    d = BigJumpLight()
    for x in (0.5, 3.0, 19.0, 21.0, 40.0):
        ref, _ = integrate.quad(lambda t: d.C * math.exp(-t) / (1 + t * t), x, np.inf, epsabs=0, epsrel=1e-12)
        assert float(d.tail(np.array(x))) == pytest.approx(ref, rel=1e-8)


def test_pareto_and_exponential_closed_forms():
    x = np.array([0.5, 1.0, 2.0, 10.0])
    np.testing.assert_allclose(Pareto(2.0, 1.0).tail(x), stats.pareto(2.0).sf(x), rtol=1e-14)
    np.testing.assert_allclose(Exponential(3.0).tail(x), stats.expon(scale=1 / 3).sf(x), rtol=1e-14)
    np.testing.assert_allclose(Weibull(0.5, 2.0).tail(x), stats.weibull_min(0.5, scale=2.0).sf(x), rtol=1e-12)
    np.testing.assert_allclose(Lognormal(0.3, 0.8).tail(x), stats.lognorm(0.8, scale=math.exp(0.3)).sf(x), rtol=1e-10)


def test_tail_is_exactly_one_below_support():
    assert float(Pareto(1.0, 2.0).tail(np.array(1.5))) == 1.0
    assert float(Exponential(1.0).tail(np.array(-1.0))) == 1.0
    assert float(Dirac(3.0).tail(np.array(3.0))) == 0.0
    assert float(Dirac(3.0).tail(np.array(2.999))) == 1.0


def test_peterpaul_dyadic_steps():
    d = PeterPaul()
    x = np.array([1.0, 1.99, 2.0, 3.0, 4.0, 1024.0])
    np.testing.assert_allclose(d.tail(x), [1.0, 1.0, 0.5, 0.5, 0.25, 2.0**-10])
    locs, masses = d.atoms(16)
    np.testing.assert_allclose(locs, [2, 4, 8, 16])
    np.testing.assert_allclose(masses, [0.5, 0.25, 0.125, 0.0625])


@pytest.mark.parametrize("dist", CATALOG, ids=lambda d: type(d).__name__)
def test_sampler_matches_tail(dist):
    rng = np.random.default_rng(7)
    n = 1_000_000
    s = np.sort(dist.sample(rng, n))
    probes = np.quantile(s, np.linspace(0.05, 0.995, 10))
    emp = 1 - np.searchsorted(s, probes, side="right") / n
    p = dist.tail(probes)
    se = np.sqrt(p * (1 - p) / n)
    assert np.all(np.abs(emp - p) <= 4 * se + 1e-12)


@pytest.mark.parametrize(
    "dist",
    [Exponential(2.0), Weibull(0.5, 1.0), Lognormal(0.0, 1.0), BigJumpLight(), Pareto(3.0, 1.0)],
    ids=lambda d: type(d).__name__,
)
def test_sample_mean(dist):
    s = dist.sample(np.random.default_rng(41), 100_000)
    assert abs(s.mean() - dist.mean) <= 5 * s.std(ddof=1) / math.sqrt(s.size)


def test_infinite_means():
    assert not math.isfinite(Pareto(1.0, 1.0).mean)
    assert not math.isfinite(PeterPaul().mean)


def test_combinator_identities():
    a, b = Pareto(1.0, 1.0), Exponential(0.5)
    x = np.linspace(0.0, 50.0, 201)
    Fa, Fb = a.tail(x), b.tail(x)
    np.testing.assert_allclose(mixture(a, b, 0.3).tail(x), 0.3 * Fa + 0.7 * Fb, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(max_of(a, b).tail(x), 1 - (1 - Fa) * (1 - Fb), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(min_of(a, b).tail(x), Fa * Fb, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(shift(b, 2.0).tail(x + 2.0), Fb, rtol=1e-12)


@given(
    alpha=st.floats(0.5, 4.0),
    rate=st.floats(0.05, 5.0),
    p=st.floats(0.01, 0.99),
    x=st.floats(0.0, 1e4),
)
def test_mixture_max_bounds(alpha, rate, p, x):
    a, b = Pareto(alpha, 1.0), Exponential(rate)
    xa = np.array(x)
    Fa, Fb = float(a.tail(xa)), float(b.tail(xa))
    mix, mx = float(mixture(a, b, p).tail(xa)), float(max_of(a, b).tail(xa))
    assert mix <= mx + 1e-15
    assert mx <= Fa + Fb + 1e-15
    assert mx >= max(Fa, Fb) * (1 - max(Fa, Fb)) - 1e-15


def test_empirical_right_continuous_steps(tmp_path):
    d = Empirical(np.array([3.0, 1.0, 2.0, 2.0]))
    np.testing.assert_allclose(d.tail(np.array([0.5, 1.0, 2.0, 2.5, 3.0])), [1.0, 0.75, 0.25, 0.25, 0.0])
    locs, masses = d.atoms()
    np.testing.assert_allclose(locs, [1, 2, 3])
    np.testing.assert_allclose(masses, [0.25, 0.5, 0.25])
    path = tmp_path / "claims.txt"
    np.savetxt(path, [1.0, 2.0, 2.0, 3.0])
    np.testing.assert_allclose(load_empirical(path).tail(np.array(2.0)), 0.25)


@pytest.mark.parametrize(
    "desc",
    [
        {"kind": "pareto", "alpha": 1.5, "scale": 2.0},
        {"kind": "exponential", "rate": 2.0},
        {"kind": "peterpaul"},
        {"kind": "bigjumplight"},
        {"kind": "mixture", "a": {"kind": "pareto", "alpha": 1.0}, "b": {"kind": "exp"}, "p": 0.5},
        {"kind": "shift", "base": {"kind": "exp"}, "delta": 1.0},
    ],
)
def test_descriptor_roundtrip(desc):
    d = from_descriptor(json.dumps(desc))
    again = from_descriptor(d.to_descriptor())
    x = np.array([0.5, 3.0, 40.0])
    np.testing.assert_allclose(again.tail(x), d.tail(x))


def test_bad_descriptors():
    with pytest.raises(ValueError):
        from_descriptor({"kind": "cauchy"})
    with pytest.raises(ValueError):
        from_descriptor({"kind": "mixture", "a": {"kind": "exp"}})
    with pytest.raises(ValueError):
        mixture(Exponential(1.0), Exponential(2.0), 1.5)
