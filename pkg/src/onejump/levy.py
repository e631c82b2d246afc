"""Infinitely divisible laws on [0, inf) with finite activity beyond 1.

Jumps above 1 form a compound Poisson sum with rate ``lambda1`` and jump law
``nu1``; jumps below 1 are replaced by their mean, which shifts the law.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .classify import MEMBER, ClassifyConfig, classify, weak_equiv
from .compound import Counter, GridLaw, compound_tail
from .distributions import Distribution, from_descriptor
from .gridnum import GridSpec, RatioCurve, TailGrid, discretize, ratio_curve

__all__ = ["LevySpec", "mu_tail", "levy_equiv_check", "LevyReport", "POISSON_CAP"]

POISSON_CAP = 256


@dataclass(frozen=True)
class LevySpec:
    nu1: Distribution
    lambda1: float
    small_jump_mean: float = 0.0

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise ValueError("lambda1 must be positive")
        if self.small_jump_mean < 0:
            raise ValueError("small_jump_mean must be nonnegative")
        if float(self.nu1.tail(np.array(1.0))) < 1.0 - 1e-12:
            raise ValueError("nu1 must put all its mass on (1, inf)")

    @classmethod
    def from_descriptor(cls, d: dict[str, Any] | str) -> "LevySpec":
        if isinstance(d, str):
            d = json.loads(d)
        return cls(from_descriptor(d["nu1"]), float(d["lambda1"]), float(d.get("small_jump_mean", 0.0)))

    def to_descriptor(self) -> dict[str, Any]:
        return {"nu1": self.nu1.to_descriptor(), "lambda1": self.lambda1, "small_jump_mean": self.small_jump_mean}


def _shift_grid(g: TailGrid, s: float, zero_atom: float) -> TailGrid:
    """Law of s + Y from the grid of Y; ``zero_atom`` is P(Y = 0)."""
    if s == 0:
        return g
    xs = g.xs
    lv = np.where(xs < s, 0.0, g.log_tail_at(np.maximum(xs - s, 0.0)))
    locs = g.atom_locs + s
    masses = g.atom_masses
    if zero_atom > 0:
        locs = np.concatenate([[s], locs])
        masses = np.concatenate([[zero_atom], masses])
    keep = locs <= g.spec.x_max
    order = np.argsort(locs[keep])
    return TailGrid(g.spec, lv, locs[keep][order], masses[keep][order], g.label)


def mu_tail(spec: LevySpec, grid_spec: GridSpec | None = None, tol: float = 1e-12) -> TailGrid:
    """Tail of the infinitely divisible law.

    The Poisson series stops once the probability of more jumps is below
    ``tol``; a longer series than ``POISSON_CAP`` terms raises.
    """
    gs = grid_spec or GridSpec(1e4)
    jumps = discretize(spec.nu1, gs, "nu1")
    res = compound_tail(jumps, Counter.poisson(spec.lambda1), tol=tol, cap=POISSON_CAP)
    g = _shift_grid(res.grid, spec.small_jump_mean, math.exp(-spec.lambda1))
    return g.with_label("mu")


@dataclass
class LevyReport:
    verdicts: dict[str, dict[str, str]]
    weak_equivalent: bool
    weak_band: tuple[float, float]
    strong: RatioCurve
    strong_applicable: bool
    grids: dict[str, TailGrid] = field(default_factory=dict, repr=False)

    @property
    def j_agree(self) -> bool:
        return self.verdicts["mu"]["J"] == self.verdicts["nu1"]["J"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdicts": self.verdicts,
            "j_agree": self.j_agree,
            "weak_equivalent": self.weak_equivalent,
            "weak_band": list(self.weak_band),
            "strong_ratio": self.strong.summary(),
            "strong_applicable": self.strong_applicable,
        }

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.strong.to_csv(out / "mu_over_lambda_nu1.csv")
        for name, g in self.grids.items():
            g.to_csv(out / f"tail_{name}.csv")
        (out / "verdicts.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def levy_equiv_check(
    spec: LevySpec, grid_spec: GridSpec | None = None, config: ClassifyConfig | None = None
) -> LevyReport:
    """J and OS verdicts of mu and nu1, their weak equivalence and the strong ratio.

    The strong ratio mu/(lambda1 nu1) is expected to tend to 1 when nu1 is
    subexponential; ``strong_applicable`` records whether nu1 was classified so.
    """
    gs = grid_spec or GridSpec(1e4)
    mu = mu_tail(spec, gs)
    nu = discretize(spec.nu1, gs, "nu1")
    cfg = config or ClassifyConfig(x_max=gs.x_max, grid_ratio=gs.ratio)
    rep_mu = classify(GridLaw(mu), cfg)
    rep_nu = classify(spec.nu1, cfg)
    verdicts = {
        "mu": {k: rep_mu[k].verdict for k in ("J", "OS")},
        "nu1": {k: rep_nu[k].verdict for k in ("J", "OS")},
    }
    we = weak_equiv(mu, nu)
    scaled = TailGrid(gs, nu.log_vals + math.log(spec.lambda1), label="lambda1*nu1")
    strong = ratio_curve(mu, scaled)
    return LevyReport(
        verdicts,
        we.equivalent,
        (we.liminf, we.limsup),
        strong,
        rep_nu["S"].verdict == MEMBER,
        {"mu": mu, "nu1": nu},
    )
