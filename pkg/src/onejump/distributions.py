"""Distribution abstraction, the concrete catalog of laws, and combinators.

Every law exposes its survival function in log form (``log_tail``) so that
tails far below the double-precision underflow threshold stay representable;
``tail`` is the exponentiated convenience wrapper.  Samplers always take an
explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import integrate, special, stats

__all__ = [
    "Distribution",
    "Pareto",
    "Exponential",
    "PeterPaul",
    "BigJumpLight",
    "Weibull",
    "Lognormal",
    "Empirical",
    "Dirac",
    "Mixture",
    "Maximum",
    "Minimum",
    "Shifted",
    "mixture",
    "max_of",
    "min_of",
    "shift",
    "normalizing_constant_bigjumplight",
    "from_descriptor",
    "load_empirical",
]

_EMPTY = (np.empty(0), np.empty(0))


def _as_array(x):
    return np.asarray(x, dtype=float)


def _log1mexp(a):
    """log(1 - exp(a)) for a <= 0, accurate near both ends."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > -0.6931471805599453, np.log(-np.expm1(a)), np.log1p(-np.exp(a)))
    return out


class Distribution:
    """Base class for laws on the real line.

    Subclasses implement ``log_tail`` and ``sample``; the rest has defaults.
    ``lower``/``upper`` bound the support.
    """

    lower: float = 0.0
    upper: float = math.inf

    def log_tail(self, x) -> np.ndarray:
        raise NotImplementedError

    def tail(self, x) -> np.ndarray:
        """P(X > x)."""
        return np.exp(self.log_tail(x))

    def density(self, x) -> np.ndarray | None:
        return None

    def atoms(self, upper: float = math.inf) -> tuple[np.ndarray, np.ndarray]:
        """(locations, masses) of atoms located at or below ``upper``."""
        return _EMPTY

    @property
    def mean(self) -> float | None:
        return None

    def integrated_tail(self, x) -> np.ndarray | None:
        """Closed form of the integral of the tail over (x, inf), if known."""
        return None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.upper)

    def to_descriptor(self) -> dict[str, Any]:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pareto(Distribution):
    alpha: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.scale <= 0:
            raise ValueError("Pareto needs alpha > 0 and scale > 0")

    @property
    def lower(self):
        return self.scale

    def log_tail(self, x):
        x = _as_array(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            lt = self.alpha * (math.log(self.scale) - np.log(np.maximum(x, self.scale)))
        return np.minimum(lt, 0.0)

    def density(self, x):
        x = _as_array(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.alpha * self.scale**self.alpha / np.maximum(x, self.scale) ** (self.alpha + 1)
        return np.where(x >= self.scale, d, 0.0)

    @property
    def mean(self):
        if self.alpha <= 1:
            return math.inf
        return self.alpha * self.scale / (self.alpha - 1)

    def integrated_tail(self, x):
        if self.alpha <= 1:
            return None
        x = _as_array(x)
        above = self.scale**self.alpha * np.maximum(x, self.scale) ** (1 - self.alpha) / (self.alpha - 1)
        return np.where(x >= self.scale, above, above + (self.scale - x))

    def sample(self, rng, size):
        return self.scale * (1.0 + rng.pareto(self.alpha, size))

    def to_descriptor(self):
        return {"kind": "pareto", "alpha": self.alpha, "scale": self.scale}


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float = 1.0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("Exponential needs rate > 0")

    def log_tail(self, x):
        x = _as_array(x)
        return -self.rate * np.maximum(x, 0.0)

    def density(self, x):
        x = _as_array(x)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    @property
    def mean(self):
        return 1.0 / self.rate

    def integrated_tail(self, x):
        x = _as_array(x)
        return np.where(x >= 0, np.exp(-self.rate * np.maximum(x, 0.0)) / self.rate, 1.0 / self.rate - x)

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def to_descriptor(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class PeterPaul(Distribution):
    """The Peter-and-Paul law: P(X > x) = 2**-k on [2**k, 2**(k+1)).

    Purely atomic with atoms at 2**j (j >= 1) of mass 2**-j.
    """

    lower = 2.0

    def log_tail(self, x):
        x = _as_array(x)
        k = np.floor(np.log2(np.maximum(x, 1.0)))
        return np.where(x < 1.0, 0.0, -k * math.log(2.0))

    def atoms(self, upper=math.inf):
        if upper < 2:
            return _EMPTY
        jmax = min(int(math.floor(math.log2(upper))), 1022) if math.isfinite(upper) else 60
        j = np.arange(1, jmax + 1, dtype=float)
        return np.exp2(j), np.exp2(-j)

    @property
    def mean(self):
        return math.inf

    def sample(self, rng, size):
        return np.exp2(rng.geometric(0.5, size).astype(float))

    def to_descriptor(self):
        return {"kind": "peterpaul"}


@functools.cache
def normalizing_constant_bigjumplight(cutoff: float = 30.0) -> float:
    """C such that C * exp(-x) / (1 + x**2) integrates to one over [0, inf).

    Adaptive quadrature on [0, cutoff]; the neglected remainder is at most
    exp(-cutoff) / (1 + cutoff**2), which has to stay below 1e-12 * C.
    """
    remainder = math.exp(-cutoff) / (1.0 + cutoff * cutoff)
    value, abserr, info = integrate.quad(
        lambda x: math.exp(-x) / (1.0 + x * x), 0.0, cutoff, epsabs=1e-15, epsrel=1e-13, limit=200, full_output=True
    )[:3]
    if abserr > 1e-12 or info["last"] >= 200:
        raise ArithmeticError(f"quadrature did not converge (abserr={abserr:g})")
    if remainder * 2.0 > 1e-12:
        raise ArithmeticError(f"cutoff {cutoff} leaves remainder {remainder:g}")
    # remainder is added analytically to first order: exp(-x)/(1+x^2) ~ const over the tail decay scale
    return 1.0 / (value + remainder)


_LAGUERRE = np.polynomial.laguerre.laggauss(48)


@dataclass(frozen=True)
class BigJumpLight(Distribution):
    """Light-tailed member of the one-big-jump class: density C e^{-x}/(1+x^2)."""

    @property
    def C(self) -> float:
        return normalizing_constant_bigjumplight()

    def log_tail(self, x):
        x = _as_array(x)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros_like(x)
        C = self.C
        small = (x > 0) & (x <= 20.0)
        if small.any():
            # int_x^inf e^{-t}/(1+t^2) dt = Im(e^{-i} E1(x - i))
            xs = x[small]
            val = np.imag(np.exp(-1j) * special.exp1(xs - 1j))
            out[small] = math.log(C) + np.log(val)
        big = x > 20.0
        if big.any():
            nodes, weights = _LAGUERRE
            xb = x[big][:, None]
            integral = (weights / (1.0 + (xb + nodes) ** 2)).sum(axis=1)
            out[big] = math.log(C) - x[big] + np.log(integral)
        return out[0] if scalar else out

    def density(self, x):
        x = _as_array(x)
        return np.where(x >= 0, self.C * np.exp(-np.maximum(x, 0.0)) / (1.0 + x * x), 0.0)

    @property
    def mean(self):
        v, _ = integrate.quad(lambda t: t * math.exp(-t) / (1 + t * t), 0, np.inf, epsabs=0, epsrel=1e-12)
        return self.C * v

    def sample(self, rng, size):
        # exponential proposal, accept with probability 1/(1+x^2)
        out = np.empty(size)
        filled = 0
        while filled < size:
            n = int((size - filled) * 1.7) + 16
            x = rng.exponential(1.0, n)
            keep = x[rng.random(n) * (1.0 + x * x) < 1.0]
            take = min(keep.size, size - filled)
            out[filled : filled + take] = keep[:take]
            filled += take
        return out

    def to_descriptor(self):
        return {"kind": "bigjumplight"}


@dataclass(frozen=True)
class Weibull(Distribution):
    shape: float = 1.0
    scale: float = 1.0

    def log_tail(self, x):
        x = _as_array(x)
        return -((np.maximum(x, 0.0) / self.scale) ** self.shape)

    def density(self, x):
        x = _as_array(x)
        z = np.maximum(x, 0.0) / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.shape / self.scale * z ** (self.shape - 1) * np.exp(-(z**self.shape))
        return np.where(x > 0, d, 0.0)

    @property
    def mean(self):
        return self.scale * math.gamma(1 + 1 / self.shape)

    def sample(self, rng, size):
        return self.scale * rng.weibull(self.shape, size)

    def to_descriptor(self):
        return {"kind": "weibull", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Lognormal(Distribution):
    mu: float = 0.0
    sigma: float = 1.0

    def log_tail(self, x):
        x = _as_array(x)
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(x, 0.0)) - self.mu) / self.sigma
        return np.where(x > 0, stats.norm.logsf(z), 0.0)

    def density(self, x):
        return stats.lognorm.pdf(_as_array(x), self.sigma, scale=math.exp(self.mu))

    @property
    def mean(self):
        return math.exp(self.mu + self.sigma**2 / 2)

    def sample(self, rng, size):
        return rng.lognormal(self.mu, self.sigma, size)

    def to_descriptor(self):
        return {"kind": "lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True, eq=False)
class Empirical(Distribution):
    """Empirical law of a sample; right-continuous step tail."""

    samples: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if s.size == 0:
            raise ValueError("empty sample")
        object.__setattr__(self, "samples", s)

    @property
    def lower(self):
        return float(self.samples[0])

    @property
    def upper(self):
        return float(self.samples[-1])

    def log_tail(self, x):
        x = _as_array(x)
        n = self.samples.size
        above = n - np.searchsorted(self.samples, x, side="right")
        with np.errstate(divide="ignore"):
            return np.log(above / n)

    def atoms(self, upper=math.inf):
        loc, cnt = np.unique(self.samples, return_counts=True)
        keep = loc <= upper
        return loc[keep], cnt[keep] / self.samples.size

    @property
    def mean(self):
        return float(self.samples.mean())

    def sample(self, rng, size):
        return rng.choice(self.samples, size)

    def to_descriptor(self):
        return {"kind": "empirical", "samples": self.samples.tolist()}


@dataclass(frozen=True)
class Dirac(Distribution):
    point: float = 0.0

    @property
    def lower(self):
        return self.point

    @property
    def upper(self):
        return self.point

    def log_tail(self, x):
        x = _as_array(x)
        return np.where(x < self.point, 0.0, -np.inf)

    def atoms(self, upper=math.inf):
        if self.point <= upper:
            return np.array([self.point]), np.array([1.0])
        return _EMPTY

    @property
    def mean(self):
        return self.point

    def integrated_tail(self, x):
        return np.maximum(self.point - _as_array(x), 0.0)

    def sample(self, rng, size):
        return np.full(size, self.point)

    def to_descriptor(self):
        return {"kind": "dirac", "point": self.point}


# ---------------------------------------------------------------------------
# combinators
# ---------------------------------------------------------------------------


def _merge_atoms(locs, masses):
    if len(locs) == 0:
        return _EMPTY
    locs = np.asarray(locs, float)
    masses = np.asarray(masses, float)
    order = np.argsort(locs, kind="stable")
    locs, masses = locs[order], masses[order]
    uniq, inv = np.unique(locs, return_inverse=True)
    return uniq, np.bincount(inv, weights=masses)


def _mass_at(dist: Distribution, pts: np.ndarray) -> np.ndarray:
    loc, mass = dist.atoms(float(pts.max()) if pts.size else 0.0)
    idx = np.searchsorted(loc, pts)
    idx = np.minimum(idx, max(loc.size - 1, 0))
    hit = (loc.size > 0) & (loc[idx] == pts) if loc.size else np.zeros(pts.shape, bool)
    return np.where(hit, mass[idx] if loc.size else 0.0, 0.0)


@dataclass(frozen=True)
class Mixture(Distribution):
    a: Distribution
    b: Distribution
    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"mixture weight must lie in (0, 1), got {self.p}")

    @property
    def lower(self):
        return min(self.a.lower, self.b.lower)

    @property
    def upper(self):
        return max(self.a.upper, self.b.upper)

    def log_tail(self, x):
        return np.logaddexp(math.log(self.p) + self.a.log_tail(x), math.log1p(-self.p) + self.b.log_tail(x))

    def density(self, x):
        da, db = self.a.density(x), self.b.density(x)
        if da is None or db is None:
            return None
        return self.p * da + (1 - self.p) * db

    def atoms(self, upper=math.inf):
        la, ma = self.a.atoms(upper)
        lb, mb = self.b.atoms(upper)
        return _merge_atoms(np.r_[la, lb], np.r_[self.p * ma, (1 - self.p) * mb])

    @property
    def mean(self):
        if self.a.mean is None or self.b.mean is None:
            return None
        return self.p * self.a.mean + (1 - self.p) * self.b.mean

    def sample(self, rng, size):
        pick = rng.random(size) < self.p
        out = self.b.sample(rng, size)
        out[pick] = self.a.sample(rng, int(pick.sum()))
        return out

    def to_descriptor(self):
        return {"kind": "mixture", "a": self.a.to_descriptor(), "b": self.b.to_descriptor(), "p": self.p}


@dataclass(frozen=True)
class Maximum(Distribution):
    """Law of max(X, Y) for independent X ~ a, Y ~ b."""

    a: Distribution
    b: Distribution

    @property
    def lower(self):
        return max(self.a.lower, self.b.lower)

    @property
    def upper(self):
        return max(self.a.upper, self.b.upper)

    def log_tail(self, x):
        la, lb = self.a.log_tail(x), self.b.log_tail(x)
        # ta + tb (1 - ta)
        return np.logaddexp(la, lb + _log1mexp(la))

    def atoms(self, upper=math.inf):
        pts = np.union1d(self.a.atoms(upper)[0], self.b.atoms(upper)[0])
        if pts.size == 0:
            return _EMPTY
        ta, tb = self.a.tail(pts), self.b.tail(pts)
        ma, mb = _mass_at(self.a, pts), _mass_at(self.b, pts)
        # P(max = z) = F_a(z) F_b(z) - F_a(z-) F_b(z-)
        mass = (1 - ta) * (1 - tb) - (1 - ta - ma) * (1 - tb - mb)
        keep = mass > 0
        return pts[keep], mass[keep]

    @property
    def mean(self):
        return None

    def sample(self, rng, size):
        return np.maximum(self.a.sample(rng, size), self.b.sample(rng, size))

    def to_descriptor(self):
        return {"kind": "max", "a": self.a.to_descriptor(), "b": self.b.to_descriptor()}


@dataclass(frozen=True)
class Minimum(Distribution):
    """Law of min(X, Y) for independent X ~ a, Y ~ b."""

    a: Distribution
    b: Distribution

    @property
    def lower(self):
        return min(self.a.lower, self.b.lower)

    @property
    def upper(self):
        return min(self.a.upper, self.b.upper)

    def log_tail(self, x):
        return self.a.log_tail(x) + self.b.log_tail(x)

    def atoms(self, upper=math.inf):
        pts = np.union1d(self.a.atoms(upper)[0], self.b.atoms(upper)[0])
        if pts.size == 0:
            return _EMPTY
        ta, tb = self.a.tail(pts), self.b.tail(pts)
        ma, mb = _mass_at(self.a, pts), _mass_at(self.b, pts)
        mass = (ta + ma) * (tb + mb) - ta * tb
        keep = mass > 0
        return pts[keep], mass[keep]

    @property
    def mean(self):
        return None

    def sample(self, rng, size):
        return np.minimum(self.a.sample(rng, size), self.b.sample(rng, size))

    def to_descriptor(self):
        return {"kind": "min", "a": self.a.to_descriptor(), "b": self.b.to_descriptor()}


@dataclass(frozen=True)
class Shifted(Distribution):
    base: Distribution
    delta: float

    @property
    def lower(self):
        return self.base.lower + self.delta

    @property
    def upper(self):
        return self.base.upper + self.delta

    def log_tail(self, x):
        return self.base.log_tail(_as_array(x) - self.delta)

    def density(self, x):
        return self.base.density(_as_array(x) - self.delta)

    def atoms(self, upper=math.inf):
        loc, mass = self.base.atoms(upper - self.delta)
        return loc + self.delta, mass

    @property
    def mean(self):
        m = self.base.mean
        return None if m is None else m + self.delta

    def sample(self, rng, size):
        return self.base.sample(rng, size) + self.delta

    def to_descriptor(self):
        return {"kind": "shift", "base": self.base.to_descriptor(), "delta": self.delta}


def mixture(a: Distribution, b: Distribution, p: float) -> Mixture:
    return Mixture(a, b, p)


def max_of(a: Distribution, b: Distribution) -> Maximum:
    return Maximum(a, b)


def min_of(a: Distribution, b: Distribution) -> Minimum:
    return Minimum(a, b)


def shift(dist: Distribution, delta: float) -> Shifted:
    return Shifted(dist, delta)


# ---------------------------------------------------------------------------
# descriptors
# ---------------------------------------------------------------------------


def load_empirical(path: str | Path) -> Empirical:
    """Empirical law from a newline-delimited numeric file."""
    values = [float(line) for line in Path(path).read_text().split() if line.strip()]
    return Empirical(np.array(values))


def from_descriptor(desc: dict[str, Any] | str) -> Distribution:
    """Build a law from a JSON descriptor such as ``{"kind": "pareto", "alpha": 1}``."""
    if isinstance(desc, str):
        desc = json.loads(desc)
    d = dict(desc)
    kind = str(d.pop("kind", "")).lower().replace("-", "").replace("_", "")
    try:
        if kind == "pareto":
            return Pareto(float(d.get("alpha", 1.0)), float(d.get("scale", 1.0)))
        if kind in ("exponential", "exp"):
            return Exponential(float(d.get("rate", d.get("lambda", 1.0))))
        if kind in ("peterpaul", "peterandpaul"):
            return PeterPaul()
        if kind == "bigjumplight":
            return BigJumpLight()
        if kind == "weibull":
            return Weibull(float(d.get("shape", 1.0)), float(d.get("scale", 1.0)))
        if kind == "lognormal":
            return Lognormal(float(d.get("mu", 0.0)), float(d.get("sigma", 1.0)))
        if kind == "empirical":
            if "path" in d:
                return load_empirical(d["path"])
            return Empirical(np.asarray(d["samples"], float))
        if kind == "dirac":
            return Dirac(float(d.get("point", 0.0)))
        if kind == "mixture":
            return Mixture(from_descriptor(d["a"]), from_descriptor(d["b"]), float(d["p"]))
        if kind == "max":
            return Maximum(from_descriptor(d["a"]), from_descriptor(d["b"]))
        if kind == "min":
            return Minimum(from_descriptor(d["a"]), from_descriptor(d["b"]))
        if kind == "shift":
            return Shifted(from_descriptor(d["base"]), float(d["delta"]))
    except KeyError as exc:
        raise ValueError(f"descriptor for {kind!r} is missing field {exc}") from None
    raise ValueError(f"unknown distribution kind {desc.get('kind')!r}")
