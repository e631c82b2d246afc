"""Statistics of the one-big-jump class and the comparison classes.

The central quantity is

    D(K, x) = P(X_{2,n} > K | S_n > x),

the conditional probability that the second largest of n summands exceeds K
given a large sum.  A law belongs to the class when D(K, x) vanishes as x and
then K grow.  Both the numerator and the denominator are computed by grid
quadrature: splitting the summands into those below and above K turns the
numerator into a sum of convolutions of restricted (sub-probability)
measures.  Seeded Monte Carlo estimators are provided as independent checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.special import comb, logsumexp

from .distributions import Distribution
from .gridnum import (
    GridSpec,
    RatioCurve,
    TailGrid,
    convolve_tail,
    curve_from_log_ratio,
    discretize,
    log1mexp,
    nfold_tail,
    ratio_curve,
)

__all__ = [
    "MEMBER",
    "NONMEMBER",
    "INCONCLUSIVE",
    "CLASS_IDS",
    "ClassifyConfig",
    "JEstimate",
    "JStatistics",
    "ClassVerdict",
    "ClassificationReport",
    "WeakEquivalence",
    "OutsideFamilyError",
    "restrict",
    "j_statistic",
    "j_statistic_mc",
    "j_profile",
    "j3_profile",
    "near_max_profile",
    "form_consistency",
    "class_ratios",
    "classify",
    "weak_equiv",
]

MEMBER = "member-consistent"
NONMEMBER = "nonmember-consistent"
INCONCLUSIVE = "inconclusive"
CLASS_IDS = ("J", "S", "L", "D", "OS", "OL", "K", "Kstar")


class OutsideFamilyError(ValueError):
    """The law has bounded support, so the class statistics are meaningless."""


@dataclass(frozen=True)
class ClassifyConfig:
    """Every threshold a verdict depends on; echoed into each report."""

    x_max: float = 1e4
    grid_ratio: float = 1.02
    Ks: tuple[float, ...] = (1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0)
    j_member: float = 0.05
    j_nonmember: float = 0.5
    j_flatness: float = 0.5
    s_tol: float = 0.1
    l_member_spread: float = 0.05
    l_nonmember_spread: float = 0.2
    gamma_zero_tol: float = 0.02
    ceiling: float = 1e3
    lambdas: tuple[float, ...] = (0.01, 0.1, 1.0)
    shift: float = 1.0
    d_u: float = 0.5
    master_seed: int = 0
    mc_budget: int = 10_000_000
    mc_min_hits: int = 200

    @property
    def window_Ks(self) -> tuple[float, ...]:
        """The Ks no larger than the start of the window, the last decade."""
        return tuple(K for K in self.Ks if K <= self.x_max / 10)

    def grid(self) -> GridSpec:
        return GridSpec(self.x_max, self.grid_ratio).with_knots(*self.window_Ks)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["Ks"] = list(self.Ks)
        d["lambdas"] = list(self.lambdas)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ClassifyConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        for key in ("Ks", "lambdas"):
            if key in known:
                known[key] = tuple(float(v) for v in known[key])
        return cls(**known)


# ---------------------------------------------------------------------------
# restricted measures and the quadrature path
# ---------------------------------------------------------------------------


def _log_tail_scalar(dist: Distribution, x: float) -> float:
    if x < 0:
        return 0.0
    if math.isinf(x):
        return -math.inf
    return float(dist.log_tail(np.array(x)))


def restrict(dist: Distribution, spec: GridSpec, lo: float, hi: float = math.inf, label: str = "") -> TailGrid | None:
    """The law restricted to (lo, hi] as a sub-probability TailGrid.

    A negative ``lo`` keeps the mass at the origin.  Returns None when the
    restriction carries no mass.
    """
    xs = spec.points()
    l_hi = _log_tail_scalar(dist, hi)
    a = np.asarray(dist.log_tail(np.maximum(xs, lo) if lo >= 0 else xs), dtype=float)
    with np.errstate(invalid="ignore"):
        vals = np.where((xs < hi) & (a > l_hi), a + log1mexp(l_hi - a), -np.inf)
    if lo >= 0:
        total = float(np.exp(vals[0]))
    else:
        l0 = 0.0
        total = float(np.exp(l0 + log1mexp(l_hi - l0))) if l_hi < 0 else 0.0
    if total <= 0.0:
        return None
    locs, masses = dist.atoms(min(hi, spec.x_max))
    locs, masses = np.asarray(locs, float), np.asarray(masses, float)
    keep = (locs > max(lo, 0.0)) & (locs <= hi) if lo >= 0 else (locs > 0) & (locs <= hi)
    locs, masses = locs[keep], masses[keep]
    if locs.size > 2000:
        locs, masses = np.empty(0), np.empty(0)
    return TailGrid(spec, vals, locs, masses, label or f"{type(dist).__name__}|({lo},{hi}]", total)


def _grid_for(dist: Distribution, spec: GridSpec) -> TailGrid:
    return discretize(dist, spec)


def _log_second_large(dist: Distribution, spec: GridSpec, n: int, K: float, h: float = math.inf) -> np.ndarray:
    """log P(X_{2,n} > K, max <= h, S_n > x) at every grid x."""
    if K < 0:
        whole = restrict(dist, spec, -1.0, h)
        if whole is None:
            return np.full(spec.points().shape, -np.inf)
        return nfold_tail(whole, n).log_vals
    A = restrict(dist, spec, K, h)
    B = restrict(dist, spec, -1.0, K)
    xs = spec.points()
    if A is None:
        return np.full(xs.shape, -np.inf)
    terms = [nfold_tail(A, n).log_vals]
    if B is not None:
        for j in range(2, n):
            conv = convolve_tail(nfold_tail(A, j), nfold_tail(B, n - j))
            terms.append(math.log(comb(n, j, exact=True)) + conv.log_vals)
    with np.errstate(divide="ignore"):
        return logsumexp(np.vstack(terms), axis=0)


def _spec_to(x: float, base: GridSpec | None, *knots: float) -> GridSpec:
    ratio = base.ratio if base else 1.02
    if x <= 1.0:
        spec = GridSpec(x, ratio, linear_step=x / 128, linear_end=x / 2)
    else:
        spec = GridSpec(x, ratio)
    return spec.with_knots(*knots)


@dataclass(frozen=True)
class JEstimate:
    value: float
    se: float
    method: str
    status: str = "ok"
    hits: int | None = None


def j_statistic(
    dist: Distribution,
    n: int,
    K: float,
    x: float,
    method: str = "quadrature",
    seed: int | np.random.SeedSequence = 0,
    budget: int = 10_000_000,
    min_hits: int = 200,
    spec: GridSpec | None = None,
) -> JEstimate:
    """Estimate D(K, x) = P(X_{2,n} > K | S_n > x).

    ``method`` is ``"quadrature"`` (deterministic, any n), ``"rejection"`` or
    ``"conditional"`` (seeded Monte Carlo).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if x <= 0:
        raise ValueError("x must be positive")
    if method != "quadrature":
        return j_statistic_mc(dist, n, K, x, seed, method, budget, min_hits)
    if K < 0:
        return JEstimate(1.0, 0.0, "quadrature")
    sp = _spec_to(x, spec, K)
    num = _log_second_large(dist, sp, n, K)[-1]
    den = nfold_tail(_grid_for(dist, sp), n).log_vals[-1]
    if not np.isfinite(den):
        return JEstimate(math.nan, math.nan, "quadrature", "underflow")
    return JEstimate(float(np.clip(np.exp(num - den), 0.0, 1.0)), 0.0, "quadrature")


def j_statistic_mc(
    dist: Distribution,
    n: int,
    K: float,
    x: float,
    seed: int | np.random.SeedSequence = 0,
    method: str = "rejection",
    budget: int = 10_000_000,
    min_hits: int = 200,
    chunk: int = 200_000,
) -> JEstimate:
    """Monte Carlo estimate of D(K, x).

    ``rejection`` keeps samples with S_n > x.  ``conditional`` uses the
    representation P(S_n > x, A) = n E[F(max(M_{n-1}, x - S_{n-1})) ; A]
    where the last summand is the maximum; it needs a law without atoms
    and falls back to rejection otherwise.
    """
    rng = np.random.default_rng(seed)
    has_atoms = dist.atoms(x)[0].size > 0
    if method == "conditional" and not has_atoms:
        total = max(budget // max(n - 1, 1), 1)
        # running sums of z, w, z^2, w^2, z w over memory-sized chunks
        acc = np.zeros(5)
        done = 0
        while done < total:
            m = min(total - done, 2_000_000)
            s = dist.sample(rng, (n - 1) * m).reshape(m, n - 1)
            mx = s.max(axis=1)
            z = n * dist.tail(np.maximum(mx, x - s.sum(axis=1)))
            w = z * (mx > K)
            acc += [z.sum(), w.sum(), (z * z).sum(), (w * w).sum(), (z * w).sum()]
            done += m
        mz, mw = acc[0] / done, acc[1] / done
        if mz <= 0:
            return JEstimate(math.nan, math.nan, "conditional", "underflow")
        d = mw / mz
        # delta method for a ratio of means
        vz, vw, czw = acc[2] / done - mz * mz, acc[3] / done - mw * mw, acc[4] / done - mz * mw
        var = (vw - 2 * d * czw + d * d * vz) / (done * mz * mz)
        return JEstimate(float(d), float(math.sqrt(max(var, 0.0))), "conditional", hits=done)
    hits = 0
    good = 0
    drawn = 0
    while drawn < budget and hits < 50 * min_hits:
        size = min(chunk, budget - drawn)
        s = dist.sample(rng, size * n).reshape(size, n)
        drawn += size
        sel = s.sum(axis=1) > x
        if not sel.any():
            continue
        second = np.sort(s[sel], axis=1)[:, -2]
        hits += int(sel.sum())
        good += int((second > K).sum())
        if hits >= min_hits and drawn >= min(budget, 2_000_000):
            break
    if hits < min_hits:
        return JEstimate(math.nan, math.nan, "rejection", "budget", hits)
    d = good / hits
    return JEstimate(d, math.sqrt(max(d * (1 - d), 1.0 / hits) / hits), "rejection", hits=hits)


@dataclass
class JStatistics:
    """D(K, x) on a (K, x) lattice with window summaries."""

    n: int
    Ks: np.ndarray
    xs: np.ndarray
    D: np.ndarray
    form_used: str
    window: tuple[int, int]
    se: np.ndarray | None = None

    def window_sup(self) -> np.ndarray:
        """Per K, the sup of D over the window (one minus the liminf of the complement)."""
        return self.D[:, self.window[0] : self.window[1]].max(axis=1)

    def window_inf(self) -> np.ndarray:
        """Per K, the inf of D over the window points at least 10 K."""
        xs = self.xs[self.window[0] : self.window[1]]
        D = self.D[:, self.window[0] : self.window[1]]
        out = np.empty(len(self.Ks))
        for i, K in enumerate(self.Ks):
            out[i] = D[i, xs >= min(10.0 * K, xs[-1])].min()
        return out

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write("K,x,D\n")
            for i, K in enumerate(self.Ks):
                for j, x in enumerate(self.xs):
                    fh.write(f"{float(K)!r},{float(x)!r},{float(self.D[i, j])!r}\n")


def _window(xs: np.ndarray) -> tuple[int, int]:
    return int(np.searchsorted(xs, xs[-1] / 10)), xs.size


def j_profile(
    dist: Distribution, n: int = 2, Ks: Sequence[float] = (1, 2, 5, 10, 25, 50), spec: GridSpec | None = None
) -> JStatistics:
    """D(K, x) for every K and every grid x by quadrature."""
    spec = (spec or GridSpec()).with_knots(*Ks)
    xs = spec.points()
    den = nfold_tail(_grid_for(dist, spec), n).log_vals
    rows = []
    for K in Ks:
        num = _log_second_large(dist, spec, n, float(K))
        with np.errstate(invalid="ignore"):
            rows.append(np.clip(np.exp(num - den), 0.0, 1.0))
    D = np.vstack(rows)
    pos = xs > 0
    return JStatistics(n, np.asarray(Ks, float), xs[pos], D[:, pos], f"J1(n={n})", _window(xs[pos]))


def j3_profile(
    dist: Distribution, n: int = 2, Ks: Sequence[float] = (1, 2, 5, 10, 25, 50), xs: Sequence[float] = (1e3, 1e4)
) -> JStatistics:
    """Complement of the third form: P(X_{1,n} <= x - K | S_n > x)."""
    out = np.zeros((len(Ks), len(xs)))
    for j, x in enumerate(xs):
        sp = _spec_to(float(x), None, *[x - K for K in Ks if 0 < x - K])
        den = nfold_tail(_grid_for(dist, sp), n).log_vals[-1]
        for i, K in enumerate(Ks):
            part = restrict(dist, sp, -1.0, x - K)
            if part is None:
                continue
            out[i, j] = float(np.clip(np.exp(nfold_tail(part, n).log_vals[-1] - den), 0.0, 1.0))
    return JStatistics(n, np.asarray(Ks, float), np.asarray(xs, float), out, f"J3(n={n})", (0, len(xs)))


def near_max_profile(dist: Distribution, n: int, c: float, Ks: Sequence[float], x: float) -> np.ndarray:
    """P(X_{1,n} > x - c, X_{2,n} > K | S_n > x) for each K at a fixed x."""
    sp = _spec_to(float(x), None, *Ks, x - c)
    den = nfold_tail(_grid_for(dist, sp), n).log_vals[-1]
    out = []
    for K in Ks:
        full = _log_second_large(dist, sp, n, float(K))[-1]
        capped = _log_second_large(dist, sp, n, float(K), x - c)[-1] if x - c > K else -np.inf
        diff = np.exp(full - den) - np.exp(capped - den)
        out.append(float(np.clip(diff, 0.0, 1.0)))
    return np.asarray(out)


def _j_verdict(sup_by_K: np.ndarray, inf_by_K: np.ndarray, cfg: ClassifyConfig) -> str:
    top = float(sup_by_K[-1])
    if top < cfg.j_member:
        return MEMBER
    if float(inf_by_K[-1]) > cfg.j_nonmember and inf_by_K[-1] >= cfg.j_flatness * inf_by_K[0]:
        return NONMEMBER
    return INCONCLUSIVE


def form_consistency(dist: Distribution, n: int = 2, config: ClassifyConfig | None = None) -> dict[str, Any]:
    """Compare the first and third forms at n, and the first form at n and n + 1."""
    if n not in (2, 3):
        raise ValueError("form consistency is checked for n in {2, 3}")
    cfg = config or ClassifyConfig()
    spec = cfg.grid()
    j1 = j_profile(dist, n, cfg.window_Ks, spec)
    j1_next = j_profile(dist, n + 1, cfg.window_Ks, spec)
    probe_x = tuple(float(v) for v in np.geomspace(cfg.x_max / 10, cfg.x_max, 3))
    j3 = j3_profile(dist, n, cfg.window_Ks, probe_x)
    v1 = _j_verdict(j1.window_sup(), j1.window_inf(), cfg)
    v_next = _j_verdict(j1_next.window_sup(), j1_next.window_inf(), cfg)
    v3 = _j_verdict(j3.window_sup(), j3.window_inf(), cfg)
    idx = np.searchsorted(j1.xs, probe_x)
    idx = np.minimum(idx, j1.xs.size - 1)
    return {
        "n": n,
        "J1_verdict": v1,
        "J3_verdict": v3,
        "next_verdict": v_next,
        "agree": v1 == v3 == v_next,
        "J1_sup": j1.window_sup().tolist(),
        "J3_sup": j3.window_sup().tolist(),
        "next_sup": j1_next.window_sup().tolist(),
        "gap_J1_J3": float(np.max(np.abs(j1.D[:, idx] - j3.D))),
        "gap_n_next": float(np.max(np.abs(j1.window_sup() - j1_next.window_sup()))),
        "Ks": list(cfg.window_Ks),
        "probe_x": list(probe_x),
    }


# ---------------------------------------------------------------------------
# class ratios
# ---------------------------------------------------------------------------


def _probe_points(dist: Distribution, cfg: ClassifyConfig) -> np.ndarray:
    xs = cfg.grid().points()
    xs = xs[xs >= 1.0]
    locs = dist.atoms(cfg.x_max)[0]
    locs = locs[(locs > 1.0) & (locs <= cfg.x_max)]
    if locs.size:
        xs = np.union1d(xs, np.concatenate([locs, locs - 0.5 * cfg.shift]))
    return xs


def class_ratios(
    dist: Distribution, class_id: str, config: ClassifyConfig | None = None, grid: TailGrid | None = None
) -> RatioCurve | dict[float, RatioCurve]:
    """The defining ratio of a class as a curve.

    K and Kstar return one curve of exp(lambda x) F(x) per probe lambda.
    """
    cfg = config or ClassifyConfig()
    _require_family(dist)
    cid = class_id.upper().replace("*", "STAR")
    if cid in ("S", "OS"):
        g = grid if grid is not None else discretize(dist, cfg.grid())
        return ratio_curve(nfold_tail(g, 2), g, ceiling=cfg.ceiling)
    x = _probe_points(dist, cfg)
    lx = np.asarray(dist.log_tail(x), float)
    if cid == "L":
        lr = np.asarray(dist.log_tail(x + cfg.shift)) - lx
        return curve_from_log_ratio(x, lr, cfg.ceiling, label="shift")
    if cid == "OL":
        lr = np.asarray(dist.log_tail(x - cfg.shift)) - lx
        return curve_from_log_ratio(x, lr, cfg.ceiling, label="backshift")
    if cid == "D":
        lr = np.asarray(dist.log_tail(cfg.d_u * x)) - lx
        return curve_from_log_ratio(x, lr, cfg.ceiling, label="dominated")
    if cid in ("K", "KSTAR"):
        return {lam: curve_from_log_ratio(x, lam * x + lx, cfg.ceiling, label=f"exp{lam}") for lam in cfg.lambdas}
    raise ValueError(f"unknown class {class_id!r}")


@dataclass
class ClassVerdict:
    class_id: str
    verdict: str
    evidence: dict[str, Any] = field(default_factory=dict)
    gamma: float | None = None
    note: str = ""
    curves: dict[str, RatioCurve] = field(default_factory=dict, repr=False)
    jstats: JStatistics | None = field(default=None, repr=False)

    def long_tailed(self, tol: float = 0.02) -> str:
        """Verdict for the gamma = 0 class, derived from an L verdict."""
        if self.verdict == MEMBER:
            return MEMBER if self.gamma is not None and abs(self.gamma) < tol else NONMEMBER
        return self.verdict

    def to_dict(self) -> dict[str, Any]:
        d = {"class": self.class_id, "verdict": self.verdict, "evidence": self.evidence}
        if self.gamma is not None:
            d["gamma"] = self.gamma
        if self.note:
            d["note"] = self.note
        return d


def _bounded(curve: RatioCurve, cfg: ClassifyConfig) -> str:
    if curve.diverging:
        return NONMEMBER
    if curve.window_limsup <= cfg.ceiling:
        return MEMBER
    return INCONCLUSIVE


def _require_family(dist: Distribution):
    if not dist.unbounded:
        raise OutsideFamilyError(f"{type(dist).__name__} has bounded support; the classes need unbounded support")


@dataclass
class ClassificationReport:
    verdicts: dict[str, ClassVerdict]
    conflicts: list[str]
    config: ClassifyConfig
    distribution: dict[str, Any] | None = None

    def __getitem__(self, key: str) -> ClassVerdict:
        return self.verdicts[key]

    def table(self) -> dict[str, str]:
        return {k: v.verdict for k, v in self.verdicts.items()}

    @property
    def inconclusive(self) -> bool:
        return any(v.verdict == INCONCLUSIVE for v in self.verdicts.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "distribution": self.distribution,
            "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
            "long_tailed": self.verdicts["L"].long_tailed(self.config.gamma_zero_tol),
            "conflicts": self.conflicts,
            "config": self.config.to_dict(),
        }

    def write(self, out_dir: str | Path) -> dict[str, str]:
        """Write the JSON report and evidence CSVs; returns the evidence paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for cid, v in self.verdicts.items():
            for name, curve in v.curves.items():
                p = out / f"{cid}_{name}.csv"
                curve.to_csv(p)
                paths[f"{cid}_{name}"] = p.name
            if v.jstats is not None:
                p = out / f"{cid}_D.csv"
                v.jstats.to_csv(p)
                paths[f"{cid}_D"] = p.name
        report = self.to_dict()
        report["evidence_files"] = paths
        (out / "verdicts.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n")
        return paths


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


# inclusions A subset B checked after the per-class verdicts; "L0" is the gamma = 0 reading of L
_INCLUSIONS = (
    ("J", "OS"),
    ("S", "J"),
    ("S", "OS"),
    ("S", "L0"),
    ("L0", "Kstar"),
    ("D", "Kstar"),
    ("Kstar", "K"),
    ("D", "J"),
    ("OS", "OL"),
    ("L", "OL"),
)


def _repair(verdicts: dict[str, ClassVerdict], cfg: ClassifyConfig) -> list[str]:
    conflicts = []

    def status(cid):
        if cid == "L0":
            return verdicts["L"].long_tailed(cfg.gamma_zero_tol)
        return verdicts[cid].verdict

    def downgrade(cid, why):
        key = "L" if cid == "L0" else cid
        if verdicts[key].verdict != INCONCLUSIVE:
            verdicts[key].verdict = INCONCLUSIVE
            verdicts[key].note = why

    for a, b in _INCLUSIONS:
        if status(a) == MEMBER and status(b) == NONMEMBER:
            why = f"{a} member but {b} nonmember contradicts {a} within {b}"
            conflicts.append(why)
            downgrade(a, why)
            downgrade(b, why)
    if status("J") == MEMBER and status("L0") == MEMBER and status("S") == NONMEMBER:
        why = "J and long-tailed members but S nonmember contradicts J and L giving S"
        conflicts.append(why)
        for cid in ("J", "L0", "S"):
            downgrade(cid, why)
    return conflicts


def classify(dist: Distribution, config: ClassifyConfig | None = None) -> ClassificationReport:
    """Verdicts for all eight classes plus an inclusion-consistency repair pass."""
    cfg = config or ClassifyConfig()
    _require_family(dist)
    if not cfg.window_Ks:
        raise ValueError("no K lies below the window start; raise x_max")
    spec = cfg.grid()
    grid = discretize(dist, spec)
    v: dict[str, ClassVerdict] = {}

    jp = j_profile(dist, 2, cfg.window_Ks, spec)
    sup, inf = jp.window_sup(), jp.window_inf()
    v["J"] = ClassVerdict(
        "J",
        _j_verdict(sup, inf, cfg),
        {"Ks": list(cfg.window_Ks), "D_window_sup": sup.tolist(), "D_window_inf": inf.tolist(), "form": jp.form_used},
        jstats=jp,
    )

    two = class_ratios(dist, "S", cfg, grid)
    lo, hi = two.window_liminf, two.window_limsup
    if two.diverging or hi > 2 + 2 * cfg.s_tol or lo < 2 - 2 * cfg.s_tol:
        s_verdict = NONMEMBER
    elif lo >= 2 - cfg.s_tol and hi <= 2 + cfg.s_tol:
        s_verdict = MEMBER
    else:
        s_verdict = INCONCLUSIVE
    v["S"] = ClassVerdict("S", s_verdict, two.summary(), curves={"ratio": two})

    shift = class_ratios(dist, "L", cfg)
    lo, hi = shift.window_liminf, shift.window_limsup
    spread = (hi - lo) / hi if hi > 0 else math.inf
    gamma = -math.log(math.sqrt(lo * hi)) / cfg.shift if lo > 0 else math.inf
    if spread <= cfg.l_member_spread:
        l_verdict = MEMBER
    elif spread > cfg.l_nonmember_spread:
        l_verdict = NONMEMBER
    else:
        l_verdict = INCONCLUSIVE
    ev = shift.summary() | {"amplitude": hi / lo if lo > 0 else math.inf, "spread": spread}
    v["L"] = ClassVerdict("L", l_verdict, ev, gamma=gamma, curves={"ratio": shift})

    dom = class_ratios(dist, "D", cfg)
    v["D"] = ClassVerdict("D", _bounded(dom, cfg), dom.summary(), curves={"ratio": dom})

    os_verdict = _bounded(two, cfg)
    ev = two.summary() | {"c_F": two.extrapolated if two.fit_residual <= 0.01 else two.window_limsup}
    v["OS"] = ClassVerdict("OS", os_verdict, ev, curves={"ratio": two})

    ol = class_ratios(dist, "OL", cfg)
    v["OL"] = ClassVerdict("OL", _bounded(ol, cfg), ol.summary(), curves={"ratio": ol})

    probes = class_ratios(dist, "K", cfg)
    bounded_any = any(not c.diverging and c.window_limsup <= cfg.ceiling for c in probes.values())
    unbounded_all = all(c.window_limsup > cfg.ceiling for c in probes.values())
    diverging_all = all(c.diverging for c in probes.values())
    curves = {f"lambda{lam:g}": c for lam, c in probes.items()}
    ev = {f"lambda{lam:g}": c.summary() for lam, c in probes.items()}
    v["K"] = ClassVerdict("K", NONMEMBER if bounded_any else MEMBER if unbounded_all else INCONCLUSIVE, ev, curves=curves)
    v["Kstar"] = ClassVerdict(
        "Kstar", NONMEMBER if bounded_any else MEMBER if diverging_all else INCONCLUSIVE, ev, curves=curves
    )

    conflicts = _repair(v, cfg)
    try:
        desc = dist.to_descriptor()
    except NotImplementedError:
        desc = None
    return ClassificationReport(v, conflicts, cfg, desc)


# ---------------------------------------------------------------------------
# weak equivalence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeakEquivalence:
    curve: RatioCurve
    liminf: float
    limsup: float
    equivalent: bool

    def to_dict(self) -> dict[str, Any]:
        return {"liminf": self.liminf, "limsup": self.limsup, "equivalent": self.equivalent} | {
            "diverging": self.curve.diverging
        }


def weak_equiv(
    a: TailGrid | Distribution, b: TailGrid | Distribution, spec: GridSpec | None = None, ceiling: float = 1e3
) -> WeakEquivalence:
    """Window bounds of a/b; equivalent when both stay inside (1/ceiling, ceiling)."""
    spec = spec or (a.spec if isinstance(a, TailGrid) else b.spec if isinstance(b, TailGrid) else GridSpec())
    ga = a if isinstance(a, TailGrid) else discretize(a, spec)
    gb = b if isinstance(b, TailGrid) else discretize(b, spec)
    curve = ratio_curve(ga, gb, ceiling=ceiling)
    lo, hi = curve.window_liminf, curve.window_limsup
    eq = (not curve.diverging) and lo > 1.0 / ceiling and hi < ceiling
    return WeakEquivalence(curve, lo, hi, bool(eq))
