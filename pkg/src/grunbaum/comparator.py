"""Truncated exponential comparators for one-dimensional profiles.

A slice profile g is compared against F(s) = h e^{-beta s} on [psi, inf).
The central quantity is the critical height

    H = max_a  beta e^{beta a} int_a^inf g,

the smallest height for which the untruncated exponential dominates every
upper tail of g.  Fitting beta so that beta * int_0^inf g = g(0) places the
maximum at a = 0 (the objective is concave in a because upper tails of
log-concave functions are log-concave), which identifies H with g(0); the
mass-matched comparator at that height then has barycentre at least that
of g, and recentring it moves the cut to exactly -1/beta.  That chain is
what one_dim_grunbaum walks, step by checked step.

Profiles with closed-form line integrals get their tails and critical
heights from those formulas; anything else falls back to dense-grid
quadrature with Hermite tail interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import AxisSupportError, BracketError, \
    HeightBelowCriticalError, PipelineStepError
from .exactline import exact_family
from .quadrature import QuadConfig, hermite_uniform_eval
from .slicing import Slice1D, _integrate_slice_err, integrate_slice, \
    slice_mass_and_moment

_DENSE = 2049
_SCAN = 101


@dataclass(frozen=True)
class ExpComparator:
    """F(s) = exp(log_h - beta s) for s >= psi, zero below."""

    log_h: float
    beta: float
    psi: float

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValueError("beta must be > 0")

    @property
    def mass(self) -> float:
        return np.exp(self.log_h - self.beta * self.psi) / self.beta

    @property
    def centroid(self) -> float:
        return self.psi + 1.0 / self.beta

    def evaluate(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.where(s >= self.psi,
                        np.exp(self.log_h - self.beta * s), 0.0)

    def closed_mass(self, a: float, b: float) -> float:
        A = max(a, self.psi)
        if b <= A:
            return 0.0
        hi = 0.0 if np.isinf(b) else np.exp(-self.beta * b)
        return np.exp(self.log_h) / self.beta * (np.exp(-self.beta * A) - hi)

    def closed_moment(self, a: float, b: float, center: float = 0.0) -> float:
        """Integral of (s - center) F(s) over [a, b]."""
        A = max(a, self.psi)
        if b <= A:
            return 0.0
        beta = self.beta

        def anti(s):
            if np.isinf(s):
                return 0.0
            return np.exp(-beta * s) * (s / beta + 1.0 / beta ** 2)

        raw = np.exp(self.log_h) * (anti(A) - anti(b))
        return raw - center * self.closed_mass(a, b)

    def upper_tail(self, a) -> np.ndarray:
        """int_a^inf F, vectorized."""
        a = np.asarray(a, dtype=float)
        A = np.maximum(a, self.psi)
        return np.exp(self.log_h - self.beta * A) / self.beta

    def translate(self, delta: float) -> "ExpComparator":
        return ExpComparator(self.log_h + self.beta * delta, self.beta,
                             self.psi + delta)

    def recentered(self) -> "ExpComparator":
        return self.translate(-self.centroid)


def _mass_moment_best(g: Slice1D, cfg: QuadConfig):
    """(mass, moment about 0, error bound), closed-form when available."""
    fam = exact_family(g._batch)
    if fam is not None:
        mass, mom = fam.mass_moment()
        return float(mass[0]), float(mom[0]), \
            3e-13 * float(mass[0] + abs(mom[0]))
    mass, mom, err = slice_mass_and_moment(g, cfg)
    return mass, mom, err


def _upper_tail_best(g: Slice1D, a: float, cfg: QuadConfig) -> float:
    fam = exact_family(g._batch)
    if fam is not None:
        return float(fam.row_upper_tail(0, np.asarray([a]))[0])
    return integrate_slice(g, a, np.inf, cfg)


def fit_beta(g: Slice1D, cfg: QuadConfig) -> float:
    """The rate with beta * int_0^inf g = g(0).

    This normalization matches the comparator's value and positive mass to
    g's at the origin simultaneously, which is what pins the critical
    height's maximizer to the origin on centered profiles.
    """
    if g.empty:
        raise AxisSupportError("axis slice degenerate")
    log_g0 = float(g.log_profile(np.asarray([0.0]))[0])
    if not np.isfinite(log_g0):
        raise AxisSupportError("axis slice degenerate")
    pos = _upper_tail_best(g, 0.0, cfg)
    if not pos > 0.0:
        raise AxisSupportError("axis slice degenerate")
    return float(np.exp(log_g0) / pos)


def comparator_from_mass(beta: float, log_h: float,
                         mass: float) -> ExpComparator:
    """The comparator of given height and rate whose total mass is mass."""
    if not mass > 0.0:
        raise ValueError("mass must be > 0")
    if not beta > 0.0:
        raise ValueError("beta must be > 0")
    psi = (log_h - np.log(beta * mass)) / beta
    return ExpComparator(log_h, beta, psi)


# ---------------------------------------------------------------------------
# crossings

@dataclass(frozen=True)
class CrossingResult:
    points: tuple
    flag: str | None


def intersection_points(g: Slice1D, h: float, beta: float,
                        cfg: QuadConfig | None = None) -> CrossingResult:
    """Sign changes of g(s) - h e^{-beta s}, bisected to 1e-12.

    The exponential is the untruncated one, so a log-concave profile can
    cross it at most twice; more sign changes indicate a log-concavity
    violation in the input and are reported with a flag rather than pruned.
    A support endpoint where g jumps across the exponential counts as a
    crossing and the bisection converges to the jump abscissa.
    """
    cfg = cfg or QuadConfig()
    if not (h > 0.0 and beta > 0.0):
        raise ValueError("h and beta must be positive")
    log_h = float(np.log(h))

    def F(s):
        with np.errstate(over="ignore"):
            return np.exp(log_h - beta * np.asarray(s, dtype=float))

    lo = (g.s_lo if np.isfinite(g.s_lo) else g.w_lo) - 2.0 / beta
    # Beyond this point both curves sit below tail_cut times the peak scale.
    peak_scale = max(float(np.exp(g.log_peak)), h)
    f_out = (log_h - np.log(cfg.tail_cut * peak_scale)) / beta
    hi = max(g.w_hi, f_out) + 1.0 / beta
    s = np.linspace(lo, hi, 512)
    diff = np.exp(g.log_profile(s)) - F(s)
    scale = max(float(np.max(np.abs(diff[np.isfinite(diff)]), initial=0.0)),
                np.exp(g.log_peak))
    if np.all(np.abs(diff) <= 1e-12 * scale):
        return CrossingResult((), "degenerate: identical on overlap")

    sign = np.sign(diff)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    points = []
    for i in flips:
        a, b = float(s[i]), float(s[i + 1])
        fa = float(diff[i])
        for _ in range(64):
            m = 0.5 * (a + b)
            fm = float(np.exp(g.log_profile(np.asarray([m]))[0])
                       - F(np.asarray([m]))[0])
            if fm == 0.0:
                a = b = m
                break
            if (fm > 0) == (fa > 0):
                a, fa = m, fm
            else:
                b = m
            if b - a <= 1e-12:
                break
        points.append(0.5 * (a + b))
    deduped = []
    for p in points:
        if not deduped or p - deduped[-1] > 1e-9:
            deduped.append(p)
    flag = None
    if len(deduped) > 2:
        flag = "more than two crossings: log-concavity violation " \
            "in the inputs"
    return CrossingResult(tuple(deduped), flag)


# ---------------------------------------------------------------------------
# critical height

@dataclass(frozen=True)
class CriticalHeightResult:
    """Critical height with the sampled objective profile that certifies it:
    every scan_values entry is G(a) = beta e^{beta a} int_a^inf g at the
    matching scan_a abscissa, and none exceeds height beyond roundoff."""

    height: float
    a_star: float
    beta: float
    flags: tuple
    scan_a: np.ndarray
    scan_values: np.ndarray


def _critical_height_core(w_lo, w_hi, logv, rate_hi, beta, empty):
    """Vectorized dense-grid critical-height search (quadrature fallback).

    logv holds log g on per-row uniform grids over [w_lo, w_hi] with _DENSE
    nodes.  Returns (H, a_star, plateau, scan_a, scan_phi)."""
    m, N = logv.shape
    h = (w_hi - w_lo) / (N - 1)
    vals = np.exp(logv)
    cum = cumulative_simpson(vals, dx=1.0, axis=1, initial=0.0) * h[:, None]
    total = cum[:, -1]
    tail = np.where(np.isfinite(rate_hi),
                    0.5 * vals[:, -1] / np.where(np.isfinite(rate_hi),
                                                 rate_hi, 1.0), 0.0)
    T = (total[:, None] - cum) + tail[:, None]
    T0 = T[:, 0]
    dT = -vals

    def phi(a):
        q = np.clip(a, w_lo, w_hi)
        Tq = hermite_uniform_eval(w_lo, h, T, dT, q[:, None])[:, 0]
        Tq = np.where(a < w_lo, T0, Tq)
        Tq = np.maximum(Tq, 1e-300)
        return np.log(beta) + beta * a + np.log(Tq)

    scan_lo = w_lo - 10.0 / beta
    u = np.linspace(0.0, 1.0, _SCAN)
    scan_a = scan_lo[:, None] + (w_hi - scan_lo)[:, None] * u[None, :]
    scan_phi = np.stack([phi(scan_a[:, j]) for j in range(_SCAN)], axis=1)
    scan_phi[empty] = -np.inf

    best = np.nanmax(scan_phi, axis=1)
    near = scan_phi >= best[:, None] - 1e-9 * np.maximum(1.0,
                                                         np.abs(best))[:, None]
    first = np.argmax(near, axis=1)
    last = _SCAN - 1 - np.argmax(near[:, ::-1], axis=1)
    plateau = (last - first) > 1

    ia = np.maximum(first - 1, 0)
    ib = np.minimum(first + 1, _SCAN - 1)
    a = np.take_along_axis(scan_a, ia[:, None], axis=1)[:, 0]
    b = np.take_along_axis(scan_a, ib[:, None], axis=1)[:, 0]
    for _ in range(70):
        c = b - 0.6180339887498949 * (b - a)
        d = a + 0.6180339887498949 * (b - a)
        keep_left = phi(c) >= phi(d)
        b = np.where(keep_left, d, b)
        a = np.where(keep_left, a, c)
    a_star = 0.5 * (a + b)
    H = np.exp(phi(a_star))
    H = np.where(empty, 0.0, H)
    return H, a_star, plateau, scan_a, scan_phi


_STATUS_FLAGS = {1: "supremum at support endpoint", 2: "non-unique: plateau"}


def _exact_scan(fam, i: int, beta: float, w_lo: float, w_hi: float):
    scan_a = np.linspace(w_lo - 10.0 / beta, max(w_hi, w_lo), _SCAN)
    with np.errstate(over="ignore"):
        scan_values = beta * np.exp(beta * scan_a) * \
            fam.row_upper_tail(i, scan_a)
    return scan_a, scan_values


def critical_height(g: Slice1D, beta: float,
                    cfg: QuadConfig) -> CriticalHeightResult:
    """The least height at which an exponential of rate beta dominates all
    upper tails of g."""
    if not beta > 0.0:
        raise ValueError("beta must be > 0")
    if g.empty:
        raise BracketError("critical height scan of an empty slice",
                           np.zeros(0), np.zeros(0))
    fam = exact_family(g._batch)
    if fam is not None:
        H, a_star, status = fam.critical_height(beta)
        if not H[0] > 0.0:
            raise BracketError("critical height scan of an empty slice",
                               np.zeros(0), np.zeros(0))
        scan_a, scan_values = _exact_scan(fam, 0, beta, g.w_lo, g.w_hi)
        flags = (_STATUS_FLAGS[int(status[0])],) if status[0] else ()
        return CriticalHeightResult(float(H[0]), float(a_star[0]), beta,
                                    flags, scan_a, scan_values)
    s = np.linspace(g.w_lo, g.w_hi, _DENSE)
    logv = g.log_profile(s)[None, :]
    H, a_star, plateau, scan_a, scan_phi = _critical_height_core(
        np.asarray([g.w_lo]), np.asarray([g.w_hi]), logv,
        np.asarray([g.rate_hi]), beta, np.asarray([False]))
    if not np.isfinite(scan_phi[0]).any():
        raise BracketError("no finite values in critical height scan",
                           scan_a[0], scan_phi[0])
    flags = ("non-unique: plateau",) if plateau[0] else ()
    with np.errstate(over="ignore"):
        scan_values = np.exp(scan_phi[0])
    return CriticalHeightResult(float(H[0]), float(a_star[0]), beta, flags,
                                scan_a[0], scan_values)


def critical_height_batch(batch, beta: float,
                          cfg: QuadConfig) -> tuple[np.ndarray, np.ndarray]:
    """(H, a_star) arrays for every slice of a batch; empty slices get 0."""
    fam = exact_family(batch)
    if fam is not None:
        H, a_star, _ = fam.critical_height(beta)
        return H, a_star
    m = batch.w_lo.size
    u = np.linspace(0.0, 1.0, _DENSE)
    S = batch.w_lo[:, None] + (batch.w_hi - batch.w_lo)[:, None] * u[None, :]
    logv = batch.eval_log(S)
    H, a_star, _, _, _ = _critical_height_core(
        batch.w_lo, batch.w_hi, logv, batch.rate_hi, beta, batch.empty)
    return H, a_star


# ---------------------------------------------------------------------------
# key property

@dataclass(frozen=True)
class KeyPropertyResult:
    surplus: float
    surplus_fubini: float
    discrepancy: float
    height: float
    critical: float
    flags: tuple


def key_property_check(g: Slice1D, F: ExpComparator, cfg: QuadConfig,
                       height_tol: float = 1e-8,
                       mass_tol: float = 1e-6) -> KeyPropertyResult:
    """Certify that the comparator's barycentre dominates the slice's.

    Preconditions checked hard: F at least critically tall and mass-matched
    to g.  The barycentre surplus is then computed twice, directly and as
    the integral of the upper-tail gap (which the critical height makes
    pointwise nonnegative), and both routes are reported.
    """
    Hres = critical_height(g, F.beta, cfg)
    h_val = float(np.exp(F.log_h))
    if h_val < Hres.height * (1.0 - height_tol) - cfg.abs_tol:
        raise HeightBelowCriticalError(
            "comparator height %.12g below critical height %.12g"
            % (h_val, Hres.height))
    mass_g, mom_g, err_g = _mass_moment_best(g, cfg)
    mass_f = F.mass
    if abs(mass_f - mass_g) > mass_tol * max(mass_g, mass_f):
        raise ValueError("comparator mass %.12g does not match slice mass "
                         "%.12g" % (mass_f, mass_g))
    mom_f = F.mass * F.centroid
    surplus = mom_f - mom_g

    # Fubini route: the same surplus as the area between upper tails.
    beta = F.beta
    A0 = min(F.psi, g.w_lo) - 1.0 / beta
    B = max(g.w_hi, F.psi + np.log(1.0 / cfg.tail_cut) / beta)
    s = np.linspace(g.w_lo, g.w_hi, _DENSE)
    vals = np.exp(g.log_profile(s))
    h = (g.w_hi - g.w_lo) / (_DENSE - 1)
    cum = cumulative_simpson(vals, dx=1.0, initial=0.0) * h
    tail = 0.0
    if np.isfinite(g.rate_hi):
        tail = 0.5 * vals[-1] / g.rate_hi
    T = (cum[-1] - cum) + tail
    dT = -vals

    a_grid = np.linspace(A0, B, _DENSE)
    fam = exact_family(g._batch)
    if fam is not None:
        Tg = fam.row_upper_tail(0, a_grid)
    else:
        q = np.clip(a_grid, g.w_lo, g.w_hi)
        Tg = hermite_uniform_eval(np.asarray([g.w_lo]), np.asarray([h]),
                                  T[None, :], dT[None, :], q[None, :])[0]
        Tg = np.where(a_grid < g.w_lo, mass_g, Tg)
        if np.isfinite(g.rate_hi):
            above = a_grid > g.w_hi
            Tg = np.where(above,
                          tail * np.exp(-g.rate_hi * (a_grid - g.w_hi)), Tg)
    gap = F.upper_tail(a_grid) - np.minimum(Tg, mass_g)
    ha = (B - A0) / (_DENSE - 1)
    area = float(cumulative_simpson(gap, dx=1.0, initial=0.0)[-1] * ha)
    # Beyond B both tails are exponential; add their closed-form areas.
    area += F.upper_tail(np.asarray([B]))[0] / beta
    if fam is not None:
        lam_out = max(float(fam.final_rate()[0]), 1e-300) \
            if np.isfinite(fam.hi[0]) is False else None
        if lam_out is not None and fam.eps <= 1e-100:
            area -= float(Tg[-1]) / lam_out
    elif np.isfinite(g.rate_hi):
        area -= float(Tg[-1]) / g.rate_hi
    surplus_fubini = area

    disc = abs(surplus - surplus_fubini)
    return KeyPropertyResult(float(surplus), float(surplus_fubini),
                             float(disc), h_val, Hres.height, Hres.flags)


# ---------------------------------------------------------------------------
# the one-dimensional chain

@dataclass(frozen=True)
class OneDimReport:
    mass: float
    centroid: float
    beta: float
    height: float
    critical: float
    psi: float
    ratio_before: float
    ratio_comparator: float
    ratio_after_shift: float
    surplus: float
    flags: tuple
    comparator: ExpComparator


def one_dim_grunbaum(g: Slice1D, cfg: QuadConfig,
                     tol: float = 1e-6) -> OneDimReport:
    """Walk the one-dimensional argument on a centered profile.

    The input slice must already have its barycentre at the origin (checked,
    not silently fixed: recentring belongs to the caller, where the ambient
    translation bookkeeping lives).  A comparator is fitted at the origin
    and every link is verified numerically: the fitted height agrees with
    the critical height, the comparator's barycentre surplus is
    nonnegative, its positive ray mass reproduces the slice's, and the
    recentred comparator's ray ratio is exactly 1/e.  The measured ratio of
    g must then come out at least 1/e - tol.
    """
    if g.empty:
        raise AxisSupportError("axis misses support")
    mass, mom, _ = _mass_moment_best(g, cfg)
    if not mass > 0.0:
        raise AxisSupportError("axis slice has no mass")
    c = mom / mass
    c_tol = 1e-6 * max(1.0, abs(g.w_lo), abs(g.w_hi))
    if abs(c) > c_tol:
        raise ValueError(
            "slice barycentre %.6g is not at the origin; recenter before "
            "running the one-dimensional chain" % (c,))

    log_g0 = float(g.log_profile(np.asarray([0.0]))[0])
    if not np.isfinite(log_g0):
        raise AxisSupportError("axis slice degenerate")
    pos = _upper_tail_best(g, 0.0, cfg)
    if not pos > 0.0:
        raise AxisSupportError("axis slice degenerate")
    beta = float(np.exp(log_g0) / pos)

    Hres = critical_height(g, beta, cfg)
    # Theory puts the tail maximum at the origin for this beta, where the
    # objective value is g(0); verify rather than assume.
    expected = np.exp(log_g0)
    if abs(Hres.height - expected) > tol * max(expected, 1.0):
        raise PipelineStepError(
            "critical height %.12g disagrees with fitted height %.12g"
            % (Hres.height, expected))

    F = comparator_from_mass(beta, log_g0, mass)
    kp = key_property_check(g, F, cfg)
    surplus_centered = F.centroid
    if surplus_centered < -tol:
        raise PipelineStepError(
            "comparator barycentre fell below the slice barycentre by %.3g"
            % (-surplus_centered,))

    ratio_before = float(pos / mass)
    ratio_comp = F.closed_mass(0.0, np.inf) / mass
    if abs(ratio_comp - ratio_before) > 1e-8 * max(ratio_before, 1e-300):
        raise PipelineStepError(
            "comparator ray ratio %.12g does not reproduce the slice ray "
            "ratio %.12g" % (ratio_comp, ratio_before))

    Fc = F.recentered()
    ratio_after = Fc.closed_mass(0.0, np.inf) / Fc.mass
    if abs(ratio_after - np.exp(-1.0)) > 1e-12:
        raise PipelineStepError(
            "recentred comparator ratio %.15g is not 1/e" % (ratio_after,))
    if ratio_before < np.exp(-1.0) - tol:
        raise PipelineStepError(
            "ray ratio %.12g fell below 1/e" % (ratio_before,))
    return OneDimReport(mass=float(mass), centroid=float(c), beta=beta,
                        height=float(np.exp(F.log_h)),
                        critical=Hres.height, psi=F.psi,
                        ratio_before=ratio_before,
                        ratio_comparator=float(ratio_comp),
                        ratio_after_shift=float(ratio_after),
                        surplus=float(kp.surplus),
                        flags=Hres.flags + kp.flags,
                        comparator=F)
