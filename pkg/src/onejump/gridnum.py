"""Discretized tails and the convolution engine.

A :class:`TailGrid` stores ``log P(X > x)`` on a grid that is linear near the
origin and geometric beyond, together with the atoms of the law inside the
grid.  Working in log space keeps light tails representable far past the
point where ``exp`` underflows, which matters for ratio curves of
exponential-type laws.

Convolution splits ``P(A + B > x)`` symmetrically at ``x/2``::

    P(S > x) = H(x; A, B) + H(x; B, A) + P(A > x/2) P(B > x/2)
    H(x; T, M) = integral over [0, x/2] of P(T > x - y) dM(y)

Inside every cell both the integrand and the measure tail are treated as
log-linear, which makes the rule exact for exponential tails and accurate to
O(h^2) otherwise.  Atoms are integrated exactly.
"""

from __future__ import annotations

import csv
import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.special import logsumexp

from .distributions import Distribution

__all__ = [
    "GridSpec",
    "TailGrid",
    "RatioCurve",
    "CFEstimate",
    "GridMismatchError",
    "NonIntegrableTailError",
    "discretize",
    "convolve_tail",
    "nfold_tail",
    "ratio_curve",
    "estimate_cF",
    "tail_integrated",
    "fft_convolve_tail",
    "log1mexp",
]

_FLOOR = -1e200  # stand-in for log(0) inside interpolation
MAX_ATOMS = 2000
MAX_ATOM_PAIRS = 1_000_000


class GridMismatchError(ValueError):
    pass


class NonIntegrableTailError(ValueError):
    pass


def log1mexp(a):
    """log(1 - exp(a)) for a <= 0; -inf at a = 0."""
    a = np.minimum(np.asarray(a, dtype=float), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > -0.6931471805599453, np.log(-np.expm1(a)), np.log1p(-np.exp(a)))


def _log_phi(z):
    """log((exp(z) - 1) / z), stable for all real z."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    az = np.abs(z)
    small = az < 1e-8
    out[small] = 0.5 * z[small]
    pos = (z > 0) & ~small
    zp = z[pos]
    out[pos] = zp + log1mexp(-zp) - np.log(zp)
    neg = (z < 0) & ~small
    zn = z[neg]
    out[neg] = log1mexp(zn) - np.log(-zn)
    return out


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Linear on [0, linear_end] with ``linear_step``, geometric up to ``x_max``.

    The geometric ratio is shrunk slightly so that ``x_max`` is hit exactly.
    """

    x_max: float = 1e4
    ratio: float = 1.02
    linear_step: float = 1.0 / 64
    linear_end: float = 1.0
    knots: tuple[float, ...] = ()

    def __post_init__(self):
        if self.x_max <= self.linear_end:
            raise ValueError(f"x_max must exceed {self.linear_end}")
        if self.ratio <= 1.0:
            raise ValueError("geometric ratio must exceed 1")
        if self.points().size < 64:
            raise ValueError("grid needs at least 64 points")

    def points(self) -> np.ndarray:
        return _grid_points(self.x_max, self.ratio, self.linear_step, self.linear_end, tuple(sorted(self.knots)))

    def with_knots(self, *knots: float) -> "GridSpec":
        extra = tuple(sorted(set(self.knots) | {float(k) for k in knots if 0 < k < self.x_max}))
        return GridSpec(self.x_max, self.ratio, self.linear_step, self.linear_end, extra)

    def to_dict(self) -> dict[str, Any]:
        return {
            "x_max": self.x_max,
            "ratio": self.ratio,
            "linear_step": self.linear_step,
            "linear_end": self.linear_end,
            "knots": list(self.knots),
        }


@functools.lru_cache(maxsize=64)
def _grid_points(x_max, ratio, step, end, knots=()):
    n_lin = int(round(end / step))
    lin = np.linspace(0.0, end, n_lin + 1)
    n_geo = int(math.ceil(math.log(x_max / end) / math.log(ratio) - 1e-9))
    geo = end * (x_max / end) ** (np.arange(1, n_geo + 1) / n_geo)
    geo[-1] = x_max
    xs = np.concatenate([lin, geo])
    if knots:
        k = np.asarray([t for t in knots if 0 < t < x_max], float)
        near = np.abs(xs[:, None] - k[None, :]).min(axis=1) <= 1e-9 * np.maximum(xs, 1.0)
        xs = np.union1d(xs[~near], k)
    xs.setflags(write=False)
    return xs


# ---------------------------------------------------------------------------
# tail grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TailGrid:
    """Survival function on a grid, kept as logs, plus atoms inside (0, x_max].

    ``total`` is the mass of the measure, 1 for laws and smaller for
    restrictions of a law to a set.  ``atom_locs`` excludes the origin: mass
    at zero is ``total - tail(0)``.  The continuous part is the tail minus
    the atoms above x, so mass of atoms beyond ``x_max`` sits in it as a
    constant.
    """

    spec: GridSpec
    log_vals: np.ndarray
    atom_locs: np.ndarray = field(default_factory=lambda: np.empty(0))
    atom_masses: np.ndarray = field(default_factory=lambda: np.empty(0))
    label: str = ""
    total: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        lv = np.minimum(np.asarray(self.log_vals, dtype=float), 0.0)
        if lv.shape != self.xs.shape:
            raise ValueError("tail values do not match the grid")
        lv.setflags(write=False)
        object.__setattr__(self, "log_vals", lv)
        object.__setattr__(self, "atom_locs", np.asarray(self.atom_locs, dtype=float))
        object.__setattr__(self, "atom_masses", np.asarray(self.atom_masses, dtype=float))

    @property
    def xs(self) -> np.ndarray:
        return self.spec.points()

    @property
    def vals(self) -> np.ndarray:
        return np.exp(self.log_vals)

    @property
    def zero_mass(self) -> float:
        if self.total == 1.0:
            return float(-np.expm1(self.log_vals[0]))
        return max(self.total - float(np.exp(self.log_vals[0])), 0.0)

    def _suffix(self):
        if "suffix" not in self._cache:
            m = self.atom_masses
            self._cache["suffix"] = np.concatenate([np.cumsum(m[::-1])[::-1], [0.0]])
        return self._cache["suffix"]

    def atom_tail_at(self, z) -> np.ndarray:
        """Total mass of the carried atoms strictly above z."""
        if self.atom_locs.size == 0:
            return np.zeros(np.shape(z))
        idx = np.searchsorted(self.atom_locs, z, side="right")
        return self._suffix()[idx]

    @property
    def log_cont(self) -> np.ndarray:
        """Log tail of the continuous part at the grid points (floored)."""
        if "log_cont" not in self._cache:
            if self.atom_locs.size == 0:
                lc = self.log_vals.copy()
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    la = np.log(self.atom_tail_at(self.xs))
                    lc = np.where(la < self.log_vals, self.log_vals + log1mexp(la - self.log_vals), -np.inf)
            self._cache["log_cont"] = np.maximum(lc, _FLOOR)
        return self._cache["log_cont"]

    def log_cont_at(self, z) -> np.ndarray:
        """Log-linear interpolation of the continuous tail; 0 mass below 0."""
        z = np.asarray(z, dtype=float)
        lc = self.log_cont
        return np.where(z < 0, lc[0], np.interp(z, self.xs, lc))

    def log_tail_at(self, z) -> np.ndarray:
        """log P(X > z) at arbitrary z in [.., x_max]; exact steps at atoms."""
        z = np.asarray(z, dtype=float)
        lc = self.log_cont_at(z)
        if self.atom_locs.size:
            with np.errstate(divide="ignore"):
                lc = np.logaddexp(lc, np.log(self.atom_tail_at(z)))
        lc = np.where(lc <= _FLOOR / 2, -np.inf, lc)
        return np.where(z < 0, 0.0, np.minimum(lc, 0.0))

    def tail_at(self, z) -> np.ndarray:
        return np.exp(self.log_tail_at(z))

    def with_label(self, label: str) -> "TailGrid":
        return TailGrid(self.spec, self.log_vals, self.atom_locs, self.atom_masses, label, self.total)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "tail"])
            for x, v in zip(self.xs, self.vals):
                w.writerow([repr(float(x)), repr(float(v))])


def discretize(dist: Distribution, spec: GridSpec | None = None, label: str = "") -> TailGrid:
    """Sample ``dist``'s tail on the grid and copy its atoms within (0, x_max]."""
    spec = spec or GridSpec()
    xs = spec.points()
    lv = np.asarray(dist.log_tail(xs), dtype=float)
    locs, masses = dist.atoms(spec.x_max)
    locs = np.asarray(locs, float)
    masses = np.asarray(masses, float)
    keep = locs > 0
    locs, masses = locs[keep], masses[keep]
    if locs.size > MAX_ATOMS:
        locs, masses = np.empty(0), np.empty(0)
    return TailGrid(spec, lv, locs, masses, label or type(dist).__name__)


def _check(a: TailGrid, b: TailGrid):
    if a.spec != b.spec:
        raise GridMismatchError(f"grid mismatch: {a.spec} vs {b.spec}")


def _half_integral(T: TailGrid, M: TailGrid) -> np.ndarray:
    """log of H(x; T, M) at every grid x."""
    xs = T.xs
    half = xs / 2
    Y = np.minimum(xs[None, :], half[:, None])
    LM = M.log_cont_at(Y)
    lT = T.log_cont_at(xs[:, None] - Y)
    L0, L1 = LM[:, :-1], LM[:, 1:]
    l0, l1 = lT[:, :-1], lT[:, 1:]
    dL = np.maximum(L0 - L1, 0.0)
    # e^{u0} phi(u1 - u0) = e^{u1} phi(u0 - u1): expand around the larger end
    u0, u1 = l0 + L0, l1 + L1
    with np.errstate(divide="ignore", invalid="ignore"):
        logI = np.log(dL) + np.maximum(u0, u1) + _log_phi(-np.abs(u1 - u0))
    logI = np.where(dL > 0, logI, -np.inf)
    parts = [logsumexp(logI, axis=1)]

    m0 = M.zero_mass
    if m0 > 0:
        parts.append(math.log(m0) + T.log_vals)
    if M.atom_locs.size:
        y = M.atom_locs[None, :]
        z = np.where(y <= half[:, None], xs[:, None] - y, 0.0)
        t = T.log_tail_at(z) + np.log(M.atom_masses)[None, :]
        parts.append(logsumexp(np.where(y <= half[:, None], t, -np.inf), axis=1))
    if T.atom_locs.size:
        zk = T.atom_locs[None, :]
        lo = M.log_cont_at(np.maximum(xs[:, None] - zk, 0.0))
        hi = M.log_cont_at(half)[:, None]
        ok = (zk > half[:, None]) & (hi < lo)
        with np.errstate(invalid="ignore"):
            t = lo + log1mexp(np.where(ok, hi - lo, -1.0)) + np.log(T.atom_masses)[None, :]
        parts.append(logsumexp(np.where(ok, t, -np.inf), axis=1))
    return logsumexp(np.vstack(parts), axis=0)


def _combine_atoms(a: TailGrid, b: TailGrid):
    la = np.concatenate([[0.0], a.atom_locs])
    ma = np.concatenate([[a.zero_mass], a.atom_masses])
    lb = np.concatenate([[0.0], b.atom_locs])
    mb = np.concatenate([[b.zero_mass], b.atom_masses])
    if la.size * lb.size > MAX_ATOM_PAIRS:
        return np.empty(0), np.empty(0)
    loc = np.add.outer(la, lb).ravel()
    mass = np.multiply.outer(ma, mb).ravel()
    keep = (loc > 0) & (loc <= a.spec.x_max) & (mass > 0)
    if not keep.any():
        return np.empty(0), np.empty(0)
    uniq, inv = np.unique(loc[keep], return_inverse=True)
    merged = np.bincount(inv, weights=mass[keep])
    if uniq.size > MAX_ATOMS * 5:
        return np.empty(0), np.empty(0)
    return uniq, merged


def convolve_tail(a: TailGrid, b: TailGrid) -> TailGrid:
    """Tail of A + B for independent nonnegative A, B on a shared grid."""
    _check(a, b)
    half = a.xs / 2
    both = a.log_tail_at(half) + b.log_tail_at(half)
    out = np.logaddexp(np.logaddexp(_half_integral(a, b), _half_integral(b, a)), both)
    out = np.minimum(out, 0.0)
    out = np.maximum.accumulate(out[::-1])[::-1]
    locs, masses = _combine_atoms(a, b)
    return TailGrid(a.spec, out, locs, masses, f"({a.label}*{b.label})", a.total * b.total)


def _power(grid: TailGrid, k: int) -> TailGrid:
    """Memoized k-fold convolution power shared by every caller."""
    if k < 1:
        raise ValueError("power must be >= 1")
    if k == 1:
        return grid
    cache = grid._cache.setdefault("powers", {})
    if k not in cache:
        low = k & (-k)
        if low == k:
            h = _power(grid, k // 2)
            cache[k] = convolve_tail(h, h)
        else:
            cache[k] = convolve_tail(_power(grid, k - low), _power(grid, low))
    return cache[k]


def nfold_tail(a: TailGrid, n: int) -> TailGrid:
    """Tail of the n-fold convolution by binary powering."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    return _power(a, int(n))


# ---------------------------------------------------------------------------
# ratio curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatioCurve:
    """Samples of a ratio with window estimates over the last decade of x.

    ``extrapolated`` is a least-squares limit of ``c + a log(x)/x + b/x``
    fitted on the window; ``fit_residual`` is its relative RMS misfit.
    """

    x: np.ndarray
    ratio: np.ndarray
    window: tuple[int, int]
    window_liminf: float
    window_limsup: float
    diverging: bool
    extrapolated: float = math.nan
    fit_residual: float = math.inf
    label: str = ""

    @property
    def window_x(self) -> np.ndarray:
        return self.x[self.window[0] : self.window[1]]

    @property
    def window_ratio(self) -> np.ndarray:
        return self.ratio[self.window[0] : self.window[1]]

    def summary(self) -> dict[str, Any]:
        return {
            "liminf": self.window_liminf,
            "limsup": self.window_limsup,
            "diverging": self.diverging,
            "window": [float(self.x[self.window[0]]), float(self.x[self.window[1] - 1])],
            "extrapolated": self.extrapolated,
            "fit_residual": self.fit_residual,
        }

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "ratio"])
            for x, r in zip(self.x, self.ratio):
                w.writerow([repr(float(x)), repr(float(r))])
        path.with_suffix(".json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def _fit_limit(x, r):
    if x.size < 6 or not np.all(np.isfinite(r)) or r.max() > 1e100:
        return math.nan, math.inf
    A = np.column_stack([np.ones_like(x), np.log(x) / x, 1.0 / x])
    coef, *_ = np.linalg.lstsq(A, r, rcond=None)
    resid = r - A @ coef
    scale = max(float(np.mean(np.abs(r))), 1e-300)
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)) / scale)


def curve_from_log_ratio(
    x: np.ndarray, log_ratio: np.ndarray, ceiling: float = 1e3, decades: float = 1.0, label: str = ""
) -> RatioCurve:
    """Windowed summaries of a ratio given in log form on increasing x.

    Diverging means the last window value exceeds ``ceiling`` and at least
    doubles the window minimum; flags are decided on logs so that huge
    ratios do not saturate.
    """
    x = np.asarray(x, float)
    lr = np.asarray(log_ratio, float)
    ok = np.isfinite(lr) & (x > 0)
    x, lr = x[ok], lr[ok]
    if x.size == 0:
        raise ValueError("no admissible points for the ratio curve")
    r = np.exp(np.minimum(lr, 700.0))
    i0 = int(np.searchsorted(x, x[-1] / 10**decades, side="left"))
    lw = lr[i0:]
    diverging = bool(lw[-1] > math.log(ceiling) and lw[-1] - lw.min() >= math.log(2.0))
    c, res = _fit_limit(x[i0:], r[i0:])
    return RatioCurve(x, r, (i0, x.size), float(np.exp(min(lw.min(), 700.0))), float(np.exp(min(lw.max(), 700.0))), diverging, c, res, label)


def ratio_curve(numer: TailGrid, denom: TailGrid, floor: float = 0.0, ceiling: float = 1e3) -> RatioCurve:
    """Ratio numer/denom where the denominator exceeds ``floor``."""
    _check(numer, denom)
    ld = denom.log_vals
    with np.errstate(divide="ignore"):
        admissible = ld > (math.log(floor) if floor > 0 else -np.inf)
    lr = np.where(admissible, numer.log_vals - ld, np.nan)
    return curve_from_log_ratio(numer.xs, lr, ceiling, label=f"{numer.label}/{denom.label}")


@dataclass(frozen=True)
class CFEstimate:
    curve: RatioCurve
    c_F: float
    diverging: bool
    method: str

    @property
    def finite(self) -> bool:
        return not self.diverging and math.isfinite(self.c_F)


def estimate_cF(
    dist: Distribution | TailGrid, spec: GridSpec | None = None, ceiling: float = 1e3, fit_tol: float = 0.01
) -> CFEstimate:
    """Estimate c_F = limsup of the two-fold tail over the tail.

    The window limsup overstates the limit when the ratio approaches it from
    above slowly; when the window is well described by ``c + a log x/x + b/x``
    the fitted ``c`` is reported instead.
    """
    grid = dist if isinstance(dist, TailGrid) else discretize(dist, spec)
    curve = ratio_curve(nfold_tail(grid, 2), grid, ceiling=ceiling)
    if curve.window[1] - curve.window[0] < 8:
        raise ValueError("denominator underflowed before a stable window formed")
    if curve.diverging:
        return CFEstimate(curve, math.inf, True, "diverging")
    if curve.fit_residual <= fit_tol and math.isfinite(curve.extrapolated):
        return CFEstimate(curve, curve.extrapolated, False, "extrapolated")
    return CFEstimate(curve, curve.window_limsup, False, "window_limsup")


# ---------------------------------------------------------------------------
# integrated tail
# ---------------------------------------------------------------------------


def tail_integrated(tail: TailGrid, remainder: float | None = None, min_index: float = 1.05) -> TailGrid:
    """x -> min(1, integral of the tail over (x, inf)), not normalized.

    Cells are integrated with a log-linear rule.  The part beyond x_max is
    ``remainder`` when known in closed form, otherwise extrapolated from the
    log-log slope of the last decade; slopes flatter than ``min_index`` are
    refused as non-integrable.
    """
    xs = tail.xs
    lv = np.maximum(tail.log_vals, _FLOOR)
    h = np.diff(xs)
    with np.errstate(divide="ignore"):
        cell = np.log(h) + lv[:-1] + _log_phi(lv[1:] - lv[:-1])
    cell = np.where(lv[:-1] <= _FLOOR / 2, -np.inf, cell)
    if remainder is None:
        i0 = int(np.searchsorted(xs, xs[-1] / 10))
        x_end, l_end = xs[-1], tail.log_vals[-1]
        if not np.isfinite(l_end):
            remainder = 0.0
            log_rem = -np.inf
        else:
            slope = (tail.log_vals[-1] - tail.log_vals[i0]) / (math.log(x_end) - math.log(xs[i0]))
            index = -slope
            if index <= min_index:
                raise NonIntegrableTailError(f"tail index {index:.3f} too small for a finite integral")
            log_rem = math.log(x_end) + l_end - math.log(index - 1.0)
    else:
        log_rem = math.log(remainder) if remainder > 0 else -np.inf
    # right-to-left cumulative log-sum
    out = np.empty_like(xs)
    acc = log_rem
    out[-1] = acc
    for i in range(xs.size - 2, -1, -1):
        acc = np.logaddexp(acc, cell[i])
        out[i] = acc
    return TailGrid(tail.spec, np.minimum(out, 0.0), label=f"I[{tail.label}]")


# ---------------------------------------------------------------------------
# FFT oracle
# ---------------------------------------------------------------------------


def fft_convolve_tail(a: Distribution, b: Distribution, spec: GridSpec, step: float = 1e-3) -> TailGrid:
    """Two-fold tail from densities on a uniform grid via FFT.

    Only for laws with densities; serves as an independent check of
    :func:`convolve_tail`.
    """
    from scipy.signal import fftconvolve

    n = int(math.ceil(spec.x_max / step)) + 1
    u = np.arange(n) * step
    fa, fb = a.density(u), b.density(u)
    if fa is None or fb is None:
        raise ValueError("FFT backend needs densities")
    # cell masses by the midpoint rule, corrected to the exact cell mass
    ma = -np.diff(a.tail(np.append(u, u[-1] + step)))
    mb = -np.diff(b.tail(np.append(u, u[-1] + step)))
    conv = np.maximum(fftconvolve(ma, mb)[:n], 0.0)
    cdf = np.cumsum(conv)
    # a cell pair (i, j) lands on [ (i+j) h, (i+j+2) h ); place mass at its midpoint
    tail_u = np.clip(1.0 - cdf, 0.0, 1.0)
    x_mid = u + step
    xs = spec.points()
    vals = np.interp(xs, x_mid, tail_u, left=1.0)
    with np.errstate(divide="ignore"):
        return TailGrid(spec, np.log(np.maximum(vals, 0.0)), label="fft")
