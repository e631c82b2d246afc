"""The reproduction suite: thirteen numbered criteria with tolerances.

Each criterion returns a ``CriterionResult``.  Numeric artifacts are written
under ``out_dir/acNN``; wall times are kept apart from them so that two runs
with the same seed give byte-identical artifacts.
"""

from __future__ import annotations

import filecmp
import json
import math
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .classify import (
    INCONCLUSIVE,
    MEMBER,
    NONMEMBER,
    ClassifyConfig,
    _j_verdict,
    class_ratios,
    classify,
    j_profile,
    weak_equiv,
)
from .compound import Counter, compound_tail, counterexample_probe
from .distributions import BigJumpLight, Exponential, Pareto, PeterPaul, normalizing_constant_bigjumplight
from .gridnum import GridSpec, discretize, estimate_cF, nfold_tail, ratio_curve
from .levy import LevySpec, levy_equiv_check
from .ruin import RiskModel, pve_check, simulate_ladder, simulate_ruin, supremum_tail_ladder

PASS, FAIL = "PASS", "FAIL"

# expected verdicts; "L0" is the gamma = 0 reading of the shift-ratio verdict
TRUTH: dict[str, dict[str, str]] = {
    "Pareto(1,1)": dict.fromkeys(("J", "S", "L", "L0", "D", "OS", "OL", "K", "Kstar"), MEMBER),
    "Pareto(2,1)": dict.fromkeys(("J", "S", "L", "L0", "D", "OS", "OL", "K", "Kstar"), MEMBER),
    "Exp(1)": {
        "J": NONMEMBER, "S": NONMEMBER, "L": MEMBER, "L0": NONMEMBER, "D": NONMEMBER,
        "OS": NONMEMBER, "OL": MEMBER, "K": NONMEMBER, "Kstar": NONMEMBER,
    },
    "PeterPaul": {
        "J": MEMBER, "S": NONMEMBER, "L": NONMEMBER, "L0": NONMEMBER, "D": MEMBER,
        "OS": MEMBER, "OL": MEMBER, "K": MEMBER, "Kstar": MEMBER,
    },
    "BigJumpLight": {
        "J": MEMBER, "S": NONMEMBER, "L": MEMBER, "L0": NONMEMBER, "D": NONMEMBER,
        "OS": MEMBER, "OL": MEMBER, "K": NONMEMBER, "Kstar": NONMEMBER,
    },
}  # fmt: skip

CATALOG = {
    "Pareto(1,1)": Pareto(1.0, 1.0),
    "Pareto(2,1)": Pareto(2.0, 1.0),
    "Exp(1)": Exponential(1.0),
    "PeterPaul": PeterPaul(),
    "BigJumpLight": BigJumpLight(),
}


@dataclass
class SuiteOptions:
    master_seed: int = 20240601
    x_max_scale: float = 1.0
    quick: bool = False

    @property
    def on_protocol(self) -> bool:
        return self.x_max_scale == 1.0 and not self.quick

    def seed(self, criterion: int) -> np.random.SeedSequence:
        return np.random.SeedSequence([self.master_seed, criterion])

    def paths(self, full: int, quick: int) -> int:
        return quick if self.quick else full


@dataclass
class CriterionResult:
    id: int
    name: str
    status: str
    measured: dict[str, Any]
    target: str
    runtime: float = 0.0
    limit: float = math.inf
    note: str = ""
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def line(self) -> str:
        return f"AC{self.id:<2d} {self.status:<12s} {self.name}: {self.target} | {_short(self.measured)} ({self.runtime:.1f}s)"

    def record(self) -> dict[str, Any]:
        """The deterministic part, without wall time."""
        d = asdict(self)
        d.pop("runtime")
        return d


def _short(d: dict[str, Any]) -> str:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.4g}"
        if isinstance(v, (list, tuple)) and len(v) <= 4:
            return "[" + ", ".join(fmt(u) for u in v) + "]"
        return str(v)

    return ", ".join(f"{k}={fmt(v)}" for k, v in d.items() if not isinstance(v, dict))


def _status(checks: dict[str, bool], opts: SuiteOptions, scaled: bool) -> tuple[str, str]:
    if not all(checks.values()):
        return FAIL, "failed: " + ", ".join(k for k, ok in checks.items() if not ok)
    if scaled and not opts.on_protocol:
        return INCONCLUSIVE, "numbers within tolerance but the run is off protocol (scaled window or quick mode)"
    return PASS, ""


def _dump(out: Path | None, name: str, obj: Any) -> None:
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def ac1(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    normalizing_constant_bigjumplight.cache_clear()
    C = normalizing_constant_bigjumplight()
    checks = {"C in [1.608, 1.610]": 1.608 <= C <= 1.610}
    st, note = _status(checks, opts, False)
    _dump(out, "constant.json", {"C": C})
    return CriterionResult(1, "normalizing constant", st, {"C": C}, "C in [1.608, 1.610]", limit=1.0, note=note, checks=checks)


def ac2(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    spec = GridSpec(60.0 * opts.x_max_scale)
    est = estimate_cF(BigJumpLight(), spec)
    target = normalizing_constant_bigjumplight() * math.pi
    rel = abs(est.c_F - target) / target
    checks = {"within 5%": rel <= 0.05}
    st, note = _status(checks, opts, True)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        est.curve.to_csv(out / "os_ratio.csv")
    m = {"c_F": est.c_F, "target": target, "rel_err": rel, "method": est.method}
    _dump(out, "cf.json", m)
    return CriterionResult(2, "c_F of BigJumpLight", st, m, "within 5% of C*pi", limit=30.0, note=note, checks=checks)


def ac3(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    spec = GridSpec(1e4 * opts.x_max_scale)
    g = discretize(Pareto(1.0, 1.0), spec)
    curve = ratio_curve(nfold_tail(g, 2), g)
    lo, hi = curve.window_liminf, curve.window_limsup
    checks = {"window in [1.9, 2.1]": 1.9 <= lo and hi <= 2.1}
    st, note = _status(checks, opts, True)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        curve.to_csv(out / "two_fold_ratio.csv")
    m = {"liminf": lo, "limsup": hi}
    return CriterionResult(3, "subexponential ratio", st, m, "window in [1.9, 2.1]", limit=30.0, note=note, checks=checks)


def ac4(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    cfg = ClassifyConfig(x_max=1e4 * opts.x_max_scale)
    spec = cfg.grid()
    g = discretize(Exponential(1.0), spec)
    two = nfold_tail(g, 2)
    curve = ratio_curve(two, g, ceiling=cfg.ceiling)
    exact_err = float(np.max(np.abs(np.exp(two.log_vals - g.log_vals) / (1.0 + spec.points()) - 1.0)))
    jp = j_profile(Exponential(1.0), 2, cfg.window_Ks, spec)
    jv = _j_verdict(jp.window_sup(), jp.window_inf(), cfg)
    checks = {"diverging": curve.diverging, "1+x within 1%": exact_err <= 0.01, "J nonmember": jv == NONMEMBER}
    st, note = _status(checks, opts, True)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        curve.to_csv(out / "os_ratio.csv")
    m = {"diverging": curve.diverging, "max_rel_err_vs_1+x": exact_err, "J": jv}
    return CriterionResult(4, "exponential exclusion", st, m, "OS ratio diverging, equal to 1+x within 1%, J nonmember", limit=5.0, note=note, checks=checks)


def ac5(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    cfg = ClassifyConfig(x_max=1e4 * opts.x_max_scale)
    spec = cfg.grid()
    we = weak_equiv(PeterPaul(), Pareto(1.0, 1.0), spec)
    lcurve = class_ratios(PeterPaul(), "L", cfg)
    amp = lcurve.window_limsup / lcurve.window_liminf
    checks = {
        "liminf >= 0.95": we.liminf >= 0.95,
        "limsup <= 2.05": we.limsup <= 2.05,
        "equivalent": we.equivalent,
        "L amplitude >= 1.4": amp >= 1.4,
    }
    st, note = _status(checks, opts, True)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        we.curve.to_csv(out / "peterpaul_over_pareto.csv")
        lcurve.to_csv(out / "peterpaul_shift.csv")
    m = {"liminf": we.liminf, "limsup": we.limsup, "equivalent": we.equivalent, "L_amplitude": amp}
    return CriterionResult(5, "weak equivalence without long tail", st, m, "band [0.95, 2.05], equivalent, amplitude >= 1.4", limit=10.0, note=note, checks=checks)


def ac6(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    cfg = ClassifyConfig(x_max=1e4 * opts.x_max_scale, master_seed=opts.master_seed)
    mism, conflicts, inconclusive, table = [], [], [], {}
    for name, dist in CATALOG.items():
        rep = classify(dist, cfg)
        row = rep.table()
        row["L0"] = rep["L"].long_tailed(cfg.gamma_zero_tol)
        table[name] = row
        conflicts += [f"{name}: {c}" for c in rep.conflicts]
        for cid, want in TRUTH[name].items():
            if row[cid] == INCONCLUSIVE:
                inconclusive.append(f"{name}:{cid}")
            elif row[cid] != want:
                mism.append(f"{name}:{cid}={row[cid]}")
        if out is not None:
            rep.write(out / name.replace("(", "_").replace(")", "").replace(",", "_"))
    checks = {"no mismatches": not mism, "no conflicts": not conflicts}
    st, note = _status(checks, opts, True)
    if st == PASS and inconclusive:
        st, note = INCONCLUSIVE, "inconclusive cells: " + ", ".join(inconclusive)
    _dump(out, "table.json", table)
    m = {"mismatches": mism, "conflicts": conflicts, "inconclusive": inconclusive, "table": table}
    return CriterionResult(6, "classification table", st, m, "all cells match, zero conflicts", limit=300.0, note=note, checks=checks)


def ac7(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    spec = GridSpec(50.0).with_knots(1.0, 2.0, 4.0)
    p = 0.5
    res = compound_tail(discretize(Exponential(1.0), spec), Counter.geometric(p))
    xs = np.array([1.0, 2.0, 4.0])
    got = res.grid.tail_at(xs)
    exact = p * np.exp(-(1 - p) * xs)
    rel = np.abs(got / exact - 1.0)
    checks = {"within 1%": bool(np.all(rel <= 0.01))}
    st, note = _status(checks, opts, False)
    m = {"values": got.tolist(), "exact": exact.tolist(), "max_rel_err": float(rel.max())}
    _dump(out, "compound_geometric.json", m)
    return CriterionResult(7, "compound geometric closed form", st, m, "within 1% of p exp(-(1-p)x)", limit=10.0, note=note, checks=checks)


def ac8(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    spec = GridSpec(60.0 * opts.x_max_scale).with_knots(10.0, 40.0)
    hi_curve, hi_res = counterexample_probe(0.99, spec=spec, cap=2048)
    xs = hi_curve.x
    r10 = float(np.interp(10.0, xs, hi_curve.ratio))
    r40 = float(np.interp(40.0, xs, hi_curve.ratio))
    lo_curve, _ = counterexample_probe(0.3, spec=spec)
    p1 = Counter.geometric(0.3).pmf(1).item()
    checks = {
        "ratio(40)/ratio(10) >= 10": r40 / r10 >= 10.0,
        "p=0.3 ratio within [p1, 20]": lo_curve.window_liminf >= p1 and lo_curve.window_limsup <= 20.0,
    }
    st, note = _status(checks, opts, True)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        hi_curve.to_csv(out / "ratio_p099.csv")
        lo_curve.to_csv(out / "ratio_p03.csv")
    m = {
        "growth_40_over_10": r40 / r10,
        "p099_index": hi_res.index,
        "p03_band": [lo_curve.window_liminf, lo_curve.window_limsup],
        "p1": p1,
    }
    return CriterionResult(8, "geometric compound counterexample", st, m, "growth >= 10; bounded band for p = 0.3", limit=300.0, note=note, checks=checks)


def classical_model() -> RiskModel:
    return RiskModel.classical(Exponential(1.0), 1.0, 2.0)


def heavy_model() -> RiskModel:
    return RiskModel(Pareto(2.0, 1.0), Exponential(1.0), 4.0)


def ac9(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    model = classical_model()
    n = opts.paths(1_000_000, 20_000)
    ss = opts.seed(9).spawn(2)
    spec = GridSpec(30.0).with_knots(2.0)
    est = simulate_ladder(model, ss[0], n, spec=spec)
    sup = supremum_tail_ladder(est, spec)
    direct = simulate_ruin(model, 2.0, ss[1], n)
    exact = 0.5 * math.exp(-1.0)
    psi_l, se_l = float(sup.at(2.0)), float(sup.se_at(2.0))
    psi_d, se_d = float(direct.psi[0]), float(direct.se[0])
    checks = {
        "ladder within 3 SE": abs(psi_l - exact) <= 3 * se_l,
        "direct within 3 SE": abs(psi_d - exact) <= 3 * se_d,
        "p_hat within 3 SE of 0.5": abs(est.p_hat - 0.5) <= 3 * est.p_se,
        "truncation exposure < 1% of psi": float(direct.exposure[0]) < 0.01 * psi_d,
    }
    st, note = _status(checks, opts, True)
    m = {
        "psi_ladder": psi_l, "se_ladder": se_l, "psi_direct": psi_d, "se_direct": se_d,
        "p_hat": est.p_hat, "p_se": est.p_se, "exact": exact, "paths": n,
        "truncated_fraction": direct.truncated_fraction,
    }  # fmt: skip
    _dump(out, "classical.json", m)
    if out is not None:
        sup.grid.to_csv(out / "psi_ladder.csv")
    return CriterionResult(9, "classical ruin", st, m, "within 3 SE of 0.18394; p_hat within 3 SE of 0.5", limit=120.0, note=note, checks=checks)


def ac10(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    model = heavy_model()
    spec = GridSpec(1e3 * opts.x_max_scale)
    n = opts.paths(200_000, 20_000)
    rep = pve_check(model, spec, seed=opts.seed(10), n_paths=n)
    lo, hi = rep.ratio_window
    checks = {
        "F_M/F_I window in [0.375, 0.625]": 0.375 <= lo and hi <= 0.625,
        "pairwise weakly equivalent": all(rep.equivalences.values()),
        "J verdicts member": all(v["J"] == MEMBER for v in rep.verdicts.values()),
    }
    st, note = _status(checks, opts, True)
    if out is not None:
        rep.write(out)
    m = {
        "window": [lo, hi],
        "equivalences": rep.equivalences,
        "J": {k: v["J"] for k, v in rep.verdicts.items()},
        "p_hat": rep.ladder.p_hat,
        "paths": n,
    }
    return CriterionResult(10, "heavy-tailed ruin equivalence", st, m, "window within 0.5 +- 25%, equivalences, J members", limit=600.0, note=note, checks=checks)


def ac11(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    rep = levy_equiv_check(LevySpec(Pareto(2.0, 2.0), 1.0), GridSpec(1e4 * opts.x_max_scale))
    s = rep.strong
    checks = {
        "strong ratio within 10% of 1": 0.9 <= s.window_liminf and s.window_limsup <= 1.1,
        "J verdicts agree": rep.j_agree,
    }
    st, note = _status(checks, opts, True)
    if out is not None:
        rep.write(out)
    m = {"strong_band": [s.window_liminf, s.window_limsup], "J_mu": rep.verdicts["mu"]["J"], "J_nu1": rep.verdicts["nu1"]["J"]}
    return CriterionResult(11, "Levy tail equivalence", st, m, "strong ratio within 10% of 1; J agree", limit=120.0, note=note, checks=checks)


def ac12(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    from .invariants import run_all

    results = run_all(opts.master_seed, quick=opts.quick)
    checks = {k: bool(v["ok"]) for k, v in results.items()}
    st, note = _status(checks, opts, False)
    _dump(out, "invariants.json", results)
    m = {"checked": len(results), "failed": [k for k, ok in checks.items() if not ok]}
    return CriterionResult(12, "invariant suites", st, m, "every invariant holds", limit=600.0, note=note, checks=checks)


DETERMINISM_SET = (2, 7, 9, 10)


def ac13(opts: SuiteOptions, out: Path | None) -> CriterionResult:
    """Run the seeded and deterministic artifact producers twice in quick mode."""
    q = SuiteOptions(opts.master_seed, opts.x_max_scale, quick=True)
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp) / "a", Path(tmp) / "b"
        run_suite(q, a, only=DETERMINISM_SET)
        run_suite(q, b, only=DETERMINISM_SET)
        diffs = _tree_diff(a, b)
        files = sum(1 for p in a.rglob("*") if p.is_file())
    checks = {"byte-identical": not diffs}
    st, note = _status(checks, opts, False)
    m = {"files_compared": files, "differences": diffs, "criteria": list(DETERMINISM_SET)}
    _dump(out, "determinism.json", m)
    return CriterionResult(13, "determinism", st, m, "identical artifacts across reruns", note=note, checks=checks)


VOLATILE = {"manifest.json", "timings.json"}


def _tree_diff(a: Path, b: Path) -> list[str]:
    fa = {p.relative_to(a) for p in a.rglob("*") if p.is_file() and p.name not in VOLATILE}
    fb = {p.relative_to(b) for p in b.rglob("*") if p.is_file() and p.name not in VOLATILE}
    diffs = sorted(str(p) for p in fa ^ fb)
    for p in sorted(fa & fb):
        if not filecmp.cmp(a / p, b / p, shallow=False):
            diffs.append(str(p))
    return diffs


CRITERIA: dict[int, Callable[[SuiteOptions, Path | None], CriterionResult]] = {
    1: ac1, 2: ac2, 3: ac3, 4: ac4, 5: ac5, 6: ac6, 7: ac7,
    8: ac8, 9: ac9, 10: ac10, 11: ac11, 12: ac12, 13: ac13,
}  # fmt: skip


def run_criterion(i: int, opts: SuiteOptions, out_dir: Path | None = None) -> CriterionResult:
    out = None if out_dir is None else Path(out_dir) / f"ac{i:02d}"
    t0 = time.perf_counter()
    try:
        res = CRITERIA[i](opts, out)
    except Exception as exc:  # a crash is a failed criterion, not a crashed suite
        res = CriterionResult(i, CRITERIA[i].__name__, FAIL, {"error": f"{type(exc).__name__}: {exc}"}, "", note="raised")
    res.runtime = time.perf_counter() - t0
    if res.status == PASS and res.runtime > res.limit:
        res.status, res.note = FAIL, f"runtime {res.runtime:.1f}s over the {res.limit:.0f}s limit"
    if out is not None:
        _dump(out, "result.json", res.record())
    return res


def run_suite(
    opts: SuiteOptions, out_dir: str | Path | None = None, only=None, echo: Callable[[str], None] | None = None
) -> list[CriterionResult]:
    ids = sorted(only) if only else sorted(CRITERIA)
    results = []
    for i in ids:
        r = run_criterion(i, opts, None if out_dir is None else Path(out_dir))
        results.append(r)
        if echo:
            echo(r.line())
    if out_dir is not None:
        out = Path(out_dir)
        _dump(out, "summary.json", [r.record() for r in results])
        (out / "timings.json").write_text(json.dumps({f"AC{r.id}": r.runtime for r in results}, indent=2) + "\n")
    return results


def exit_code(results: list[CriterionResult]) -> int:
    if any(r.status == FAIL for r in results):
        return 3
    if any(r.status == INCONCLUSIVE for r in results):
        return 2
    return 0
