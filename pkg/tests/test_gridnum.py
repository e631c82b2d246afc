import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from onejump.distributions import BigJumpLight, Exponential, Pareto, PeterPaul, Weibull
from onejump.gridnum import (
    GridMismatchError,
    GridSpec,
    NonIntegrableTailError,
    convolve_tail,
    discretize,
    estimate_cF,
    fft_convolve_tail,
    nfold_tail,
    ratio_curve,
    tail_integrated,
)


def test_grid_points_hit_endpoints_and_knots():
    spec = GridSpec(100.0).with_knots(7.3)
    xs = spec.points()
    assert xs[0] == 0.0 and xs[-1] == 100.0
    assert 7.3 in xs
    assert np.all(np.diff(xs) > 0)


def test_bad_grid_specs():
    with pytest.raises(ValueError):
        GridSpec(0.5)
    with pytest.raises(ValueError):
        GridSpec(100.0, ratio=1.0)


@pytest.mark.parametrize("n,tol", [(2, 1e-10), (3, 1e-4), (5, 1e-3)])
def test_exponential_nfold_is_gamma(n, tol):
    g = discretize(Exponential(1.0), GridSpec(200.0))
    h = nfold_tail(g, n)
    ref = stats.gamma(n).sf(h.xs)
    m = ref > 1e-300
    np.testing.assert_allclose(h.vals[m], ref[m], rtol=tol)


def test_pareto_two_fold_closed_form():
    # for x >= 2: P(X + Y > x) = 2/x + 2 log(x - 1)/x^2
    h = nfold_tail(discretize(Pareto(1.0, 1.0), GridSpec(1e4)), 2)
    x = h.xs[h.xs >= 2]
    ref = 2 / x + 2 * np.log(x - 1) / x**2
    np.testing.assert_allclose(h.vals[h.xs >= 2], ref, rtol=1e-4)


def test_pareto_two_fold_against_simulation():
    spec = GridSpec(100.0).with_knots(50.0)
    p = float(nfold_tail(discretize(Pareto(2.0, 1.0), spec), 2).tail_at(np.array(50.0)))
    rng = np.random.default_rng(29)
    n = 10_000_000
    d = Pareto(2.0, 1.0)
    emp = float(np.mean(d.sample(rng, n) + d.sample(rng, n) > 50.0))
    assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_fft_backend_agrees():
    spec = GridSpec(50.0)
    a, b = Pareto(2.0, 1.0), Exponential(1.0)
    fft = fft_convolve_tail(a, b, spec)
    quad = convolve_tail(discretize(a, spec), discretize(b, spec))
    assert np.max(np.abs(fft.vals - quad.vals)) < 1e-3


def test_atomic_convolution_exact():
    # purely atomic law: the grid result is exact, so only sampling error remains
    spec = GridSpec(64.0).with_knots(5.0)
    g = discretize(PeterPaul(), spec)
    h = nfold_tail(g, 2)
    rng = np.random.default_rng(3)
    s = PeterPaul().sample(rng, 2_000_000) + PeterPaul().sample(rng, 2_000_000)
    for x in (5.0, 16.0, 40.0):
        p = float(h.tail_at(np.array(x)))
        emp = float(np.mean(s > x))
        assert abs(emp - p) <= 4 * math.sqrt(p * (1 - p) / s.size) + 1e-12


LAWS = st.one_of(
    st.floats(0.6, 4.0).map(lambda a: Pareto(a, 1.0)),
    st.floats(0.2, 3.0).map(Exponential),
    st.floats(0.3, 0.9).map(lambda k: Weibull(k, 1.0)),
)


@given(LAWS)
def test_convolution_bounds(dist):
    g = discretize(dist, GridSpec(500.0))
    two = nfold_tail(g, 2)
    assert np.all(g.log_vals <= two.log_vals + 1e-9)
    assert np.all(two.log_vals <= math.log(2.0) + g.log_tail_at(g.xs / 2) + 1e-9)
    three = nfold_tail(g, 3)
    assert np.all(two.log_vals <= three.log_vals + 1e-9)


@given(LAWS, LAWS)
def test_convolution_symmetric(a, b):
    spec = GridSpec(300.0)
    ga, gb = discretize(a, spec), discretize(b, spec)
    np.testing.assert_allclose(convolve_tail(ga, gb).vals, convolve_tail(gb, ga).vals, atol=1e-12)


def test_grid_mismatch():
    a = discretize(Exponential(1.0), GridSpec(100.0))
    b = discretize(Exponential(1.0), GridSpec(200.0))
    with pytest.raises(GridMismatchError):
        convolve_tail(a, b)


def test_tail_integrated_closed_forms():
    t = tail_integrated(discretize(Pareto(2.0, 1.0), GridSpec(1e3)))
    x = t.xs
    ref = np.minimum(1.0, np.where(x >= 1, 1 / np.maximum(x, 1e-300), 2 - x))
    np.testing.assert_allclose(t.vals, ref, rtol=1e-4)
    e = tail_integrated(discretize(Exponential(1.0), GridSpec(100.0)), remainder=math.exp(-100))
    np.testing.assert_allclose(e.vals, np.exp(-e.xs), rtol=1e-10)


def test_tail_integrated_refuses_infinite_mean():
    with pytest.raises(NonIntegrableTailError):
        tail_integrated(discretize(Pareto(1.0, 1.0), GridSpec(1e3)))


def test_cF_estimates():
    assert estimate_cF(Pareto(1.0, 1.0), GridSpec(1e4)).c_F == pytest.approx(2.0, rel=1e-3)
    est = estimate_cF(Exponential(1.0), GridSpec(1e3))
    assert est.diverging and not est.finite
    bjl = BigJumpLight()
    assert estimate_cF(bjl, GridSpec(60.0)).c_F == pytest.approx(bjl.C * math.pi, rel=0.05)


def test_ratio_curve_identity():
    g = discretize(Pareto(1.5, 1.0), GridSpec(1e3))
    c = ratio_curve(g, g)
    assert c.window_liminf == c.window_limsup == 1.0
    assert not c.diverging


def test_csv_format(tmp_path):
    g = discretize(Exponential(2.0), GridSpec(10.0))
    g.to_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["x", "tail"]
    assert len(rows) == g.xs.size + 1
    x, v = map(float, rows[5])
    assert v == pytest.approx(math.exp(-2 * x), rel=1e-15)
