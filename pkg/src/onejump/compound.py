"""Random sums S_N = X_1 + ... + X_N with N independent of the X_i.

The compound tail is the series ``sum_k p_k P(X_1 + ... + X_k > x)`` over
k-fold tails shared with :mod:`onejump.gridnum`.  Truncation uses the Kesten
bound ``F^{k*}(x) <= c r^k F(x)`` with ``r = c_F + eps - 1`` when the weighted
series converges, and the plain count tail ``P(N > K)`` otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp

from .classify import MEMBER, ClassifyConfig, classify, weak_equiv
from .distributions import BigJumpLight, Distribution
from .gridnum import GridSpec, RatioCurve, TailGrid, discretize, estimate_cF, nfold_tail, ratio_curve

__all__ = [
    "Counter",
    "CompoundResult",
    "TruncationError",
    "GridLaw",
    "kesten_constant",
    "compound_tail",
    "kesten_series_condition",
    "counterexample_probe",
    "root_probe",
]


class TruncationError(RuntimeError):
    """The remainder bound did not reach the tolerance within the index cap."""

    def __init__(self, msg: str, partial: TailGrid, index: int, remainder: float):
        super().__init__(msg)
        self.partial = partial
        self.index = index
        self.remainder = remainder


@dataclass(frozen=True)
class Counter:
    """Law of the number of summands.

    kinds: ``poisson`` (c), ``geometric`` (p, weights (1-p) p^k for k >= 0),
    ``negative_binomial`` (r, p, generating function ((1-p)/(1-pz))^r),
    ``deterministic`` (n) and ``explicit`` (weights from k = 0).
    """

    kind: str
    c: float = 1.0
    p: float = 0.5
    r: float = 1.0
    n: int = 1
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        kinds = ("poisson", "geometric", "negative_binomial", "deterministic", "explicit")
        if self.kind not in kinds:
            raise ValueError(f"unknown counter kind {self.kind!r}")
        if self.kind in ("geometric", "negative_binomial") and not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if self.kind == "poisson" and self.c <= 0:
            raise ValueError("poisson rate must be positive")
        if self.kind == "deterministic" and self.n < 0:
            raise ValueError("n must be nonnegative")
        if self.kind == "explicit":
            w = np.asarray(self.weights, float)
            if w.size == 0 or (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("explicit weights must be nonnegative and sum to one")
        if self.pmf(np.array([0]))[0] >= 1.0:
            raise ValueError("the counter must put mass on k >= 1")

    # constructors -----------------------------------------------------------
    @classmethod
    def poisson(cls, c: float) -> "Counter":
        return cls("poisson", c=c)

    @classmethod
    def geometric(cls, p: float) -> "Counter":
        return cls("geometric", p=p)

    @classmethod
    def negative_binomial(cls, r: float, p: float) -> "Counter":
        return cls("negative_binomial", r=r, p=p)

    @classmethod
    def deterministic(cls, n: int) -> "Counter":
        return cls("deterministic", n=int(n))

    @classmethod
    def explicit(cls, weights) -> "Counter":
        return cls("explicit", weights=tuple(float(w) for w in weights))

    @classmethod
    def from_descriptor(cls, d: dict[str, Any]) -> "Counter":
        kind = d["kind"]
        if kind == "poisson":
            return cls.poisson(float(d.get("c", d.get("rate", 1.0))))
        if kind == "geometric":
            return cls.geometric(float(d["p"]))
        if kind == "negative_binomial":
            return cls.negative_binomial(float(d["r"]), float(d["p"]))
        if kind == "deterministic":
            return cls.deterministic(int(d["n"]))
        if kind == "explicit":
            return cls.explicit(d["weights"])
        raise ValueError(f"unknown counter kind {kind!r}")

    def to_descriptor(self) -> dict[str, Any]:
        return {
            "poisson": lambda: {"kind": "poisson", "c": self.c},
            "geometric": lambda: {"kind": "geometric", "p": self.p},
            "negative_binomial": lambda: {"kind": "negative_binomial", "r": self.r, "p": self.p},
            "deterministic": lambda: {"kind": "deterministic", "n": self.n},
            "explicit": lambda: {"kind": "explicit", "weights": list(self.weights)},
        }[self.kind]()

    # weights ----------------------------------------------------------------
    def log_pmf(self, k) -> np.ndarray:
        k = np.asarray(k)
        with np.errstate(divide="ignore"):
            if self.kind == "poisson":
                return k * math.log(self.c) - self.c - gammaln(k + 1)
            if self.kind == "geometric":
                return math.log1p(-self.p) + k * math.log(self.p)
            if self.kind == "negative_binomial":
                return stats.nbinom.logpmf(k, self.r, 1 - self.p)
            if self.kind == "deterministic":
                return np.where(k == self.n, 0.0, -np.inf)
            w = np.asarray(self.weights)
            kk = np.clip(k, 0, w.size - 1)
            return np.where((k >= 0) & (k < w.size), np.log(w[kk]), -np.inf)

    def pmf(self, k) -> np.ndarray:
        return np.exp(self.log_pmf(k))

    def count_tail(self, K: int) -> float:
        """P(N > K)."""
        if self.kind == "poisson":
            return float(stats.poisson.sf(K, self.c))
        if self.kind == "geometric":
            return self.p ** (K + 1)
        if self.kind == "negative_binomial":
            return float(stats.nbinom.sf(K, self.r, 1 - self.p))
        if self.kind == "deterministic":
            return 1.0 if self.n > K else 0.0
        return float(np.sum(self.weights[K + 1 :]))

    @property
    def max_index(self) -> float:
        if self.kind == "deterministic":
            return self.n
        if self.kind == "explicit":
            return len(self.weights) - 1
        return math.inf

    @property
    def mean(self) -> float:
        if self.kind == "poisson":
            return self.c
        if self.kind == "geometric":
            return self.p / (1 - self.p)
        if self.kind == "negative_binomial":
            return self.r * self.p / (1 - self.p)
        if self.kind == "deterministic":
            return float(self.n)
        return float(np.dot(np.arange(len(self.weights)), self.weights))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "poisson":
            return rng.poisson(self.c, size)
        if self.kind == "geometric":
            return rng.geometric(1 - self.p, size) - 1
        if self.kind == "negative_binomial":
            return rng.negative_binomial(self.r, 1 - self.p, size)
        if self.kind == "deterministic":
            return np.full(size, self.n)
        return rng.choice(len(self.weights), size, p=np.asarray(self.weights))

    def weighted_tail_sum(self, z: float, K: int) -> float:
        """sum over k > K of p_k z^k; inf when it diverges."""
        if self.kind == "poisson":
            return math.exp(self.c * (z - 1)) * float(stats.poisson.sf(K, self.c * z))
        if self.kind == "geometric":
            q = self.p * z
            return math.inf if q >= 1 else (1 - self.p) * q ** (K + 1) / (1 - q)
        if self.kind == "negative_binomial":
            q = self.p * z
            if q >= 1:
                return math.inf
            return ((1 - self.p) / (1 - q)) ** self.r * float(stats.nbinom.sf(K, self.r, 1 - q))
        ks = np.arange(K + 1, int(self.max_index) + 1)
        if ks.size == 0:
            return 0.0
        return float(np.sum(self.pmf(ks) * np.power(z, ks)))


def kesten_series_condition(counter: Counter, cF: float, eps: float = 0.1) -> dict[str, Any]:
    """Whether sum_k p_k (c_F + eps - 1)^k is finite, with its value."""
    z = cF + eps - 1.0
    if not math.isfinite(z):
        finite = counter.max_index < 1
        return {"finite": finite, "value": 1.0 if finite else math.inf, "z": z}
    if counter.kind == "geometric":
        finite = counter.p * z < 1
        value = (1 - counter.p) / (1 - counter.p * z) if finite else math.inf
    elif counter.kind == "poisson":
        finite, value = True, math.exp(counter.c * (z - 1))
    elif counter.kind == "negative_binomial":
        finite = counter.p * z < 1
        value = ((1 - counter.p) / (1 - counter.p * z)) ** counter.r if finite else math.inf
    else:
        value = counter.weighted_tail_sum(z, -1)
        finite = math.isfinite(value)
    return {"finite": bool(finite), "value": value, "z": z}


# ---------------------------------------------------------------------------
# compound tails
# ---------------------------------------------------------------------------


def kesten_constant(claim: TailGrid, cF: float, eps: float = 0.1, n_fit: int = 3) -> float:
    """Twice the largest ratio F^{n*}/F / r^n over the grid for n <= n_fit."""
    r = cF + eps - 1.0
    best = 1.0
    ok = claim.log_vals > -np.inf
    for n in range(1, n_fit + 1):
        lr = nfold_tail(claim, n).log_vals[ok] - claim.log_vals[ok]
        best = max(best, float(np.exp(lr.max() - n * math.log(r))))
    return 2.0 * best


@dataclass
class CompoundResult:
    grid: TailGrid
    index: int
    remainder_bound: float
    method: str
    kesten_c: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "truncation_index": self.index,
            "remainder_bound": self.remainder_bound,
            "method": self.method,
            "kesten_c": self.kesten_c,
        } | self.extra


def _truncation_index(counter: Counter, claim: TailGrid, cF: float | None, eps: float, tol: float, cap: int):
    if counter.max_index <= cap:
        return int(counter.max_index), 0.0, "exact", None
    if cF is not None and math.isfinite(cF) and kesten_series_condition(counter, cF, eps)["finite"]:
        c = kesten_constant(claim, cF, eps)
        r = cF + eps - 1.0
        while True:
            K = next((k for k in range(1, cap + 1) if c * counter.weighted_tail_sum(r, k) < tol), None)
            if K is None:
                break
            # the fit on n <= 3 can miss growth at moderate n; refit on every term kept
            c_all = kesten_constant(claim, cF, eps, n_fit=K)
            if c_all <= c:
                return K, c * counter.weighted_tail_sum(r, K), "kesten", c
            c = c_all
    for K in range(1, cap + 1):
        rem = counter.count_tail(K)
        if rem < tol:
            return K, rem, "count", None
    return None, counter.count_tail(cap), "count", None


def compound_tail(
    claim: TailGrid,
    counter: Counter,
    cF: float | None = None,
    eps: float = 0.1,
    tol: float | None = None,
    cap: int = 512,
) -> CompoundResult:
    """Tail of S_N on the claim's grid.

    ``tol`` defaults to 1e-8 times the claim tail at 0.  The Kesten remainder
    is relative to the claim tail at x; the count remainder is absolute.
    """
    tol = 1e-8 * float(claim.vals[0]) if tol is None else tol
    K, rem, method, c = _truncation_index(counter, claim, cF, eps, tol, cap)
    upto = cap if K is None else K
    ks = np.arange(1, upto + 1)
    lp = counter.log_pmf(ks)
    rows = [lp[i] + nfold_tail(claim, int(k)).log_vals for i, k in enumerate(ks) if np.isfinite(lp[i])]
    xs = claim.xs
    with np.errstate(divide="ignore"):
        lv = logsumexp(np.vstack(rows), axis=0) if rows else np.full(xs.shape, -np.inf)
    locs, masses = _compound_atoms(claim, counter, ks, lp)
    grid = TailGrid(claim.spec, np.minimum(lv, 0.0), locs, masses, f"compound[{claim.label}]")
    if K is None:
        raise TruncationError(
            f"remainder {rem:.3g} still above tol {tol:.3g} at index cap {cap}", grid, cap, rem
        )
    return CompoundResult(grid, K, rem, method, c)


def _compound_atoms(claim: TailGrid, counter: Counter, ks, lp):
    locs, masses = [], []
    for i, k in enumerate(ks):
        if not np.isfinite(lp[i]):
            continue
        g = nfold_tail(claim, int(k))
        if g.atom_locs.size:
            locs.append(g.atom_locs)
            masses.append(np.exp(lp[i]) * g.atom_masses)
    if not locs:
        return np.empty(0), np.empty(0)
    loc = np.concatenate(locs)
    uniq, inv = np.unique(loc, return_inverse=True)
    if uniq.size > 10_000:
        return np.empty(0), np.empty(0)
    return uniq, np.bincount(inv, weights=np.concatenate(masses))


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridLaw(Distribution):
    """A law known only through a TailGrid, for feeding grids to the classifier.

    Beyond ``x_max`` the tail is continued log-log linearly from the last
    decade.
    """

    grid: TailGrid = None  # type: ignore[assignment]

    @property
    def lower(self):
        return 0.0

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        g = self.grid
        inside = np.minimum(x, g.spec.x_max)
        lv = g.log_tail_at(inside)
        xs = g.xs
        i0 = int(np.searchsorted(xs, xs[-1] / 10))
        l_end, l_0 = g.log_vals[-1], g.log_vals[i0]
        slope = (l_end - l_0) / math.log(xs[-1] / xs[i0]) if np.isfinite(l_0 - l_end) else -np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            far = l_end + slope * np.log(np.maximum(x, xs[-1]) / xs[-1])
        return np.where(x > g.spec.x_max, far, lv)

    def atoms(self, upper=math.inf):
        keep = self.grid.atom_locs <= upper
        return self.grid.atom_locs[keep], self.grid.atom_masses[keep]

    def sample(self, rng, size):
        raise NotImplementedError("grid laws are not sampled")

    def to_descriptor(self):
        return {"kind": "grid", "label": self.grid.label}


def counterexample_probe(
    p: float,
    claim: Distribution | None = None,
    spec: GridSpec | None = None,
    eps: float = 0.1,
    cap: int = 2048,
    counter: Counter | None = None,
) -> tuple[RatioCurve, CompoundResult]:
    """Compound over claim tail ratio for a geometric(p) count (or ``counter``)."""
    claim = claim or BigJumpLight()
    spec = spec or GridSpec(60.0)
    g = discretize(claim, spec)
    cf = estimate_cF(g)
    res = compound_tail(g, counter or Counter.geometric(p), cf.c_F, eps, cap=cap)
    res.extra["c_F"] = cf.c_F
    return ratio_curve(res.grid, g), res


def root_probe(
    compound: TailGrid, claim: TailGrid, config: ClassifyConfig | None = None, max_m: int = 8
) -> dict[str, Any]:
    """Weak equivalence of claim and compound, and J-verdict transfer between them.

    Also searches m <= ``max_m`` for the convolution power of the claim that is
    weakly equivalent to the compound with the tightest ratio band.
    """
    cfg = config or ClassifyConfig(x_max=claim.spec.x_max, grid_ratio=claim.spec.ratio)
    we = weak_equiv(claim, compound)
    v_claim = classify(GridLaw(claim), cfg)["J"].verdict
    v_comp = classify(GridLaw(compound), cfg)["J"].verdict
    best = None
    for m in range(1, max_m + 1):
        w = weak_equiv(nfold_tail(claim, m), compound)
        if w.equivalent:
            spread = w.limsup / w.liminf
            if best is None or spread < best[1]:
                best = (m, spread)
    return {
        "weak_equivalent": we.equivalent,
        "liminf": we.liminf,
        "limsup": we.limsup,
        "J_claim": v_claim,
        "J_compound": v_comp,
        "J_transfer": v_claim == v_comp,
        "both_member": v_claim == v_comp == MEMBER,
        "best_power": None if best is None else best[0],
    }
