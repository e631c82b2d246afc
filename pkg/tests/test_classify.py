import json
import math

import numpy as np
import pytest

from onejump.classify import (
    INCONCLUSIVE,
    MEMBER,
    NONMEMBER,
    ClassifyConfig,
    OutsideFamilyError,
    class_ratios,
    classify,
    form_consistency,
    j_profile,
    j_statistic,
    weak_equiv,
)
from onejump.distributions import BigJumpLight, Dirac, Empirical, Exponential, Pareto, PeterPaul
from onejump.gridnum import GridSpec
from onejump.suite import CATALOG, TRUTH


@pytest.mark.parametrize("K,x", [(1.0, 10.0), (2.0, 10.0), (5.0, 50.0)])
def test_exponential_closed_form(K, x):
    # X_1 given S_2 = s is uniform on (0, s)
    est = j_statistic(Exponential(1.0), 2, K, x)
    assert est.value == pytest.approx((x - 2 * K + 1) / (x + 1), rel=1e-6)


def test_zero_threshold_gives_one():
    for dist in (Exponential(1.0), Pareto(1.0, 1.0), BigJumpLight()):
        assert j_statistic(dist, 2, 0.0, 25.0).value == pytest.approx(1.0, abs=1e-9)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        j_statistic(Exponential(1.0), 1, 1.0, 10.0)
    with pytest.raises(ValueError):
        j_statistic(Exponential(1.0), 2, 1.0, 0.0)


def test_pareto_quadrature_against_conditional_mc():
    q = j_statistic(Pareto(1.0, 1.0), 2, 100.0, 1e4)
    mc = j_statistic(Pareto(1.0, 1.0), 2, 100.0, 1e4, method="conditional", seed=11, budget=10_000_000)
    assert mc.hits == 10_000_000
    assert abs(q.value - mc.value) <= 3 * mc.se


def test_rejection_mc_agrees_with_closed_form():
    mc = j_statistic(Exponential(1.0), 2, 1.0, 10.0, method="rejection", seed=5)
    assert abs(mc.value - 9 / 11) <= 3 * mc.se


def test_rejection_budget_exhaustion_is_reported():
    est = j_statistic(Exponential(1.0), 2, 1.0, 60.0, method="rejection", seed=0, budget=100_000)
    assert est.status == "budget" and math.isnan(est.value)


def test_three_fold_quadrature_against_mc():
    q = j_statistic(BigJumpLight(), 3, 5.0, 10.0)
    mc = j_statistic(BigJumpLight(), 3, 5.0, 10.0, method="conditional", seed=3, budget=4_000_000)
    assert abs(q.value - mc.value) <= 3 * mc.se


def test_profile_monotone_in_K_and_bounded():
    jp = j_profile(BigJumpLight(), 2, (1, 2, 5, 10, 25), GridSpec(1e3))
    assert np.all((jp.D >= 0) & (jp.D <= 1))
    assert np.all(np.diff(jp.D, axis=0) <= 1e-12)
    assert jp.window_sup()[-1] < 0.05


def test_exponential_profile_tracks_one_minus_2K_over_x():
    jp = j_profile(Exponential(1.0), 2, (1, 5), GridSpec(500.0))
    i = jp.xs.size - 1
    x = jp.xs[i]
    np.testing.assert_allclose(jp.D[:, i], [(x - 2 * K + 1) / (x + 1) for K in (1, 5)], rtol=1e-6)


@pytest.mark.parametrize("dist,want", [(Pareto(1.0, 1.0), MEMBER), (Exponential(1.0), NONMEMBER)])
def test_form_consistency(dist, want):
    rep = form_consistency(dist, 2, ClassifyConfig(x_max=1e3))
    assert rep["agree"]
    assert rep["J1_verdict"] == want


def test_form_consistency_n_range():
    with pytest.raises(ValueError):
        form_consistency(Pareto(1.0, 1.0), 4)


def test_shift_ratio_exponential():
    c = class_ratios(Exponential(1.0), "L", ClassifyConfig(x_max=1e3))
    np.testing.assert_allclose(c.window_ratio, math.exp(-1), rtol=1e-12)


def test_dominated_ratio_pareto():
    c = class_ratios(Pareto(1.0, 1.0), "D", ClassifyConfig(x_max=1e3))
    np.testing.assert_allclose(c.window_ratio, 2.0, rtol=1e-12)


def test_peterpaul_shift_oscillates():
    c = class_ratios(PeterPaul(), "L", ClassifyConfig(x_max=1e4))
    assert c.window_liminf == pytest.approx(0.5)
    assert c.window_limsup == pytest.approx(1.0)


def test_exponential_gamma_estimate():
    rep = classify(Exponential(1.0), ClassifyConfig(x_max=1e3))
    assert rep["L"].verdict == MEMBER
    assert rep["L"].gamma == pytest.approx(1.0, abs=1e-9)
    assert rep["L"].long_tailed() == NONMEMBER


@pytest.mark.parametrize("name", list(CATALOG))
def test_catalog_verdicts(name):
    rep = classify(CATALOG[name], ClassifyConfig(x_max=1e4))
    row = rep.table() | {"L0": rep["L"].long_tailed()}
    assert not rep.conflicts
    for cid, want in TRUTH[name].items():
        assert row[cid] == want, f"{name} {cid}"


def test_report_written(tmp_path):
    rep = classify(Pareto(2.0, 1.0), ClassifyConfig(x_max=1e3))
    paths = rep.write(tmp_path)
    data = json.loads((tmp_path / "verdicts.json").read_text())
    assert data["verdicts"]["J"]["verdict"] == MEMBER
    assert all((tmp_path / p).exists() for p in paths.values())
    assert data["config"]["x_max"] == 1e3


def test_bounded_support_refused():
    with pytest.raises(OutsideFamilyError):
        classify(Dirac(2.0))
    with pytest.raises(OutsideFamilyError):
        classify(Empirical(np.array([1.0, 2.0, 3.0])))


def test_window_needs_K_below_window():
    with pytest.raises(ValueError):
        classify(Pareto(1.0, 1.0), ClassifyConfig(x_max=5.0, Ks=(1.0,)))


def test_weak_equivalence_examples():
    spec = GridSpec(1e4)
    pp = weak_equiv(PeterPaul(), Pareto(1.0, 1.0), spec)
    assert pp.equivalent
    assert pp.liminf >= 1.0 - 1e-9 and pp.limsup <= 2.0
    same = weak_equiv(Pareto(2.0, 1.0), Pareto(2.0, 1.0), spec)
    assert same.liminf == same.limsup == 1.0
    apart = weak_equiv(Pareto(1.0, 1.0), Exponential(1.0), GridSpec(1e3))
    assert apart.curve.diverging and not apart.equivalent


def test_weak_equivalence_is_symmetric_in_flag():
    spec = GridSpec(1e4)
    a = weak_equiv(PeterPaul(), Pareto(1.0, 1.0), spec)
    b = weak_equiv(Pareto(1.0, 1.0), PeterPaul(), spec)
    assert a.equivalent == b.equivalent
    assert a.liminf * b.limsup == pytest.approx(1.0)


def test_verdicts_deterministic():
    cfg = ClassifyConfig(x_max=1e3)
    a = classify(BigJumpLight(), cfg).to_dict()
    b = classify(BigJumpLight(), cfg).to_dict()
    assert json.dumps(a, sort_keys=True, default=str) == json.dumps(b, sort_keys=True, default=str)
    assert INCONCLUSIVE not in (a["verdicts"]["J"]["verdict"],)
