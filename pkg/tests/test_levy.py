import json
import math

import numpy as np
import pytest

from onejump.classify import NONMEMBER, ClassifyConfig
from onejump.distributions import Exponential, Pareto, shift
from onejump.gridnum import GridSpec
from onejump.levy import LevySpec, levy_equiv_check, mu_tail


def pareto_spec(lam=1.0, s=0.0):
    return LevySpec(Pareto(2.0, 2.0), lam, s)


def test_mass_at_zero():
    # no jumps with probability exp(-lambda)
    g = mu_tail(pareto_spec(), GridSpec(100.0))
    assert float(g.tail_at(np.array(0.0))) == pytest.approx(1 - math.exp(-1.0), rel=1e-12)
    assert float(g.tail_at(np.array(1e-9))) == pytest.approx(1 - math.exp(-1.0), rel=1e-9)


def test_small_rate_matches_single_jump():
    g = mu_tail(pareto_spec(0.01), GridSpec(1e3))
    x = g.xs[g.xs >= 10]
    ratio = g.vals[g.xs >= 10] / (0.01 * Pareto(2.0, 2.0).tail(x))
    assert np.all(np.abs(ratio - 1) <= 0.02)


def test_against_simulation():
    g = mu_tail(pareto_spec(), GridSpec(200.0))
    rng = np.random.default_rng(23)
    n = 10_000_000
    counts = rng.poisson(1.0, n)
    jumps = Pareto(2.0, 2.0).sample(rng, int(counts.sum()))
    owner = np.repeat(np.arange(n, dtype=np.int64), counts)
    sums = np.bincount(owner, weights=jumps, minlength=n)
    for x in (10.0, 50.0):
        p = float(g.tail_at(np.array(x)))
        emp = float(np.mean(sums > x))
        assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_monotone_in_rate():
    spec = GridSpec(500.0)
    lo, hi = mu_tail(pareto_spec(0.5), spec), mu_tail(pareto_spec(2.0), spec)
    assert np.all(hi.vals >= lo.vals - 1e-15)


def test_shift_translates_tail():
    spec = GridSpec(200.0).with_knots(10.0, 13.0, 50.0, 53.0)
    base = mu_tail(pareto_spec(), spec)
    moved = mu_tail(pareto_spec(s=3.0), spec)
    for x in (10.0, 50.0):
        assert float(moved.tail_at(np.array(x + 3.0))) == pytest.approx(float(base.tail_at(np.array(x))), rel=1e-9)
    assert float(moved.tail_at(np.array(2.0))) == pytest.approx(1.0, abs=1e-14)


def test_strong_equivalence_and_verdicts(tmp_path):
    rep = levy_equiv_check(pareto_spec(), GridSpec(1e4))
    lo, hi = rep.strong.window_liminf, rep.strong.window_limsup
    assert 0.9 <= lo <= hi <= 1.1
    assert rep.j_agree and rep.weak_equivalent and rep.strong_applicable
    rep.write(tmp_path)
    data = json.loads((tmp_path / "verdicts.json").read_text())
    assert data["j_agree"]


def test_light_jumps_not_in_class():
    spec = LevySpec(shift(Exponential(1.0), 1.0), 1.0)
    rep = levy_equiv_check(spec, GridSpec(1e3), ClassifyConfig(x_max=1e3))
    assert rep.verdicts["nu1"]["J"] == NONMEMBER
    assert rep.verdicts["mu"]["J"] == NONMEMBER
    assert not rep.strong_applicable


def test_invalid_specs():
    with pytest.raises(ValueError):
        LevySpec(Pareto(2.0, 2.0), 0.0)
    with pytest.raises(ValueError):
        LevySpec(Pareto(2.0, 2.0), 1.0, -1.0)
    with pytest.raises(ValueError):
        LevySpec(Exponential(1.0), 1.0)


def test_descriptor_roundtrip():
    s = pareto_spec(0.7, 0.2)
    again = LevySpec.from_descriptor(json.dumps(s.to_descriptor()))
    assert again.lambda1 == 0.7 and again.small_jump_mean == 0.2
