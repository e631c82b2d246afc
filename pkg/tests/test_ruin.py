import json
import math

import numpy as np
import pytest

from onejump.distributions import Dirac, Exponential, Pareto
from onejump.gridnum import GridSpec, NonIntegrableTailError
from onejump.ruin import (
    RiskModel,
    RuinCertainError,
    f_I,
    increment_tail,
    net_profit,
    pve_check,
    simulate_ladder,
    simulate_ruin,
    supremum_tail_ladder,
)


def classical(c=2.0):
    return RiskModel.classical(Exponential(1.0), 1.0, c)


def cl_psi(u, c=2.0):
    # exponential claims, unit rates: psi(u) = (1/c) exp(-(1 - 1/c) u)
    return np.exp(-(1 - 1 / c) * np.asarray(u)) / c


@pytest.fixture(scope="module")
def ladder():
    return simulate_ladder(classical(), seed=3, n_paths=100_000)


def test_drift_and_net_profit():
    assert classical().drift == pytest.approx(-1.0)
    with pytest.raises(RuinCertainError):
        net_profit(classical(c=1.0))
    assert net_profit(classical(c=0.5), strict=False) == pytest.approx(0.5)


def test_increment_tail_closed_form():
    g = increment_tail(classical(), GridSpec(40.0))
    np.testing.assert_allclose(g.vals, np.exp(-g.xs) / 3, rtol=1e-10)


def test_integrated_tail_closed_form():
    g = f_I(classical(), GridSpec(40.0))
    np.testing.assert_allclose(g.vals, np.exp(-g.xs) / 3, rtol=1e-4)


def test_integrated_tail_needs_finite_mean():
    with pytest.raises((NonIntegrableTailError, ValueError)):
        f_I(RiskModel(Pareto(1.0, 1.0), Exponential(1.0), 4.0), GridSpec(100.0))


def test_ladder_probability(ladder):
    # for the classical model the ladder probability equals the load 1/c
    assert abs(ladder.p_hat - 0.5) <= 3 * ladder.p_se
    assert ladder.truncated_fraction > 0


def test_ladder_heights_are_exponential(ladder):
    x = ladder.ladder_tail.xs
    m = x <= 8
    np.testing.assert_allclose(ladder.ladder_tail.vals[m], np.exp(-x[m]), rtol=0.03, atol=1e-3)


def test_supremum_tail_matches_closed_form(ladder):
    sup = supremum_tail_ladder(ladder)
    u = np.array([0.5, 2.0, 5.0])
    est, se = sup.at(u), sup.se_at(u)
    assert np.all(np.abs(est - cl_psi(u)) <= 3 * se)


def test_supremum_at_zero_is_ladder_probability(ladder):
    sup = supremum_tail_ladder(ladder, se=False)
    assert float(sup.at(0.0)) == pytest.approx(ladder.p_hat, rel=1e-6)


def test_light_tails_are_not_equivalent():
    rep = pve_check(classical(), GridSpec(100.0), seed=2, n_paths=20_000)
    assert not rep.equivalences["M_I"]


def test_direct_ruin_matches_closed_form():
    u = [1.0, 2.0, 6.0]
    est = simulate_ruin(classical(), u, seed=9, n_paths=100_000)
    assert np.all(np.abs(est.psi - cl_psi(u)) <= 3 * est.se)
    assert np.all(est.exposure >= 0) and np.all(est.exposure < est.se)


def test_other_premium_rate():
    c = 1.5
    est = simulate_ruin(classical(c), [2.0], seed=4, n_paths=50_000)
    assert abs(est.psi[0] - cl_psi(2.0, c)) <= 3 * est.se[0]


def test_deterministic_arrivals_against_ladder():
    # no closed form; two estimators built on different events must agree
    model = RiskModel(Exponential(1.0), Dirac(1.0), 1.6)
    lad = simulate_ladder(model, seed=1, n_paths=50_000)
    sup = supremum_tail_ladder(lad)
    direct = simulate_ruin(model, [1.0, 4.0], seed=2, n_paths=50_000)
    se = np.hypot(sup.se_at(direct.u), direct.se)
    assert np.all(np.abs(sup.at(direct.u) - direct.psi) <= 3 * se)


def test_same_seed_same_result():
    a = simulate_ruin(classical(), [1.0, 3.0], seed=12, n_paths=5_000)
    b = simulate_ruin(classical(), [1.0, 3.0], seed=12, n_paths=5_000)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    c = simulate_ruin(classical(), [1.0, 3.0], seed=13, n_paths=5_000)
    assert not np.array_equal(a.psi, c.psi)


def test_refusals():
    with pytest.raises(ValueError):
        simulate_ruin(classical(), [1.0], n_paths=999)
    with pytest.raises(ValueError):
        simulate_ladder(classical(), n_paths=10)
    with pytest.raises(RuinCertainError):
        simulate_ruin(classical(c=0.9), [1.0], n_paths=1000)
    with pytest.raises(ValueError):
        RiskModel(Exponential(1.0), Exponential(1.0), 0.0)


def test_descriptor_roundtrip():
    m = RiskModel.classical(Pareto(2.0, 1.0), 1.0, 4.0)
    again = RiskModel.from_descriptor(json.dumps(m.to_descriptor()))
    assert again.drift == pytest.approx(m.drift)


def test_heavy_tailed_equivalence(tmp_path):
    model = RiskModel.classical(Pareto(2.0, 1.0), 1.0, 4.0)
    rep = pve_check(model, GridSpec(1e3), seed=5, n_paths=50_000)
    lo, hi = rep.ratio_window
    assert 0.375 <= lo <= hi <= 0.625
    assert all(rep.equivalences.values())
    rep.write(tmp_path)
    data = json.loads((tmp_path / "verdicts.json").read_text())
    assert (tmp_path / "M_over_I.csv").exists()
    assert set(data["verdicts"]) == {"F_I", "G", "F_M"}
