"""One-dimensional restrictions of densities and their integrals.

A slice g(s) = f(x' + s*theta) of a log-concave density is log-concave, so
its profile has a single peak, an effective window outside which it falls
below tail_cut relative to that peak, and chord-slope decay bounds that turn
the clipped tails into explicit error terms.  The batch builder locates
peaks and windows for many parallel slices at once with vectorized golden
section and bisection, which is what keeps grid quadrature affordable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AxisSupportError
from .geometry import complement_basis
from .quadrature import QuadConfig, adaptive_integral, adaptive_integral_multi

_GOLDEN = 0.6180339887498949


class _SliceBatch:
    """Peak/window data for a family of parallel slices.

    All arrays are indexed by slice.  Coordinates: s measures arc length
    along the common direction u from each line's origin; origins are stored
    in representation coordinates so that identical densities at different
    translations produce bitwise-identical batches.
    """

    def __init__(self, f, theta: np.ndarray, origins_rep: np.ndarray,
                 tail_cut: float):
        self.f = f
        self.u = theta
        self.origins = origins_rep
        m = origins_rep.shape[0]
        rep = f.rep

        lp = rep.line_params(origins_rep, theta)
        self.hard_lo, self.hard_hi = lp.lo.copy(), lp.hi.copy()
        self.exact_log_h = lp.exp_log_h
        self.exact_rate = lp.exp_rate

        box_lo, box_hi = rep.support_box(tail_cut)
        s_lo = np.full(m, -np.inf)
        s_hi = np.full(m, np.inf)
        for d in range(f.n):
            ud = theta[d]
            od = origins_rep[:, d]
            if abs(ud) > 1e-14:
                e0 = (box_lo[d] - od) / ud
                e1 = (box_hi[d] - od) / ud
                s_lo = np.maximum(s_lo, np.minimum(e0, e1))
                s_hi = np.minimum(s_hi, np.maximum(e0, e1))
            else:
                outside = (od < box_lo[d] - 1e-12) | (od > box_hi[d] + 1e-12)
                s_lo = np.where(outside, np.inf, s_lo)
                s_hi = np.where(outside, -np.inf, s_hi)

        A = np.maximum(self.hard_lo, s_lo)
        B = np.minimum(self.hard_hi, s_hi)
        self.empty = ~(A < B)
        A = np.where(self.empty, 0.0, A)
        B = np.where(self.empty, 1.0, B)

        if self.exact_rate is not None:
            s_peak = np.where(self.exact_rate >= 0, A, B)
            log_peak = self.exact_log_h - self.exact_rate * s_peak
        else:
            s_peak, log_peak = self._golden_peak(A, B)
        self.empty |= ~np.isfinite(log_peak)
        self.s_peak = np.where(self.empty, 0.0, s_peak)
        self.log_peak = np.where(self.empty, 0.0, log_peak)

        target = self.log_peak + np.log(tail_cut)
        self.w_hi, hard_cut_hi = self._window_edge(B, target, +1)
        self.w_lo, hard_cut_lo = self._window_edge(A, target, -1)
        self.rate_hi = self._chord_rate(self.w_hi, hard_cut_hi, +1)
        self.rate_lo = self._chord_rate(self.w_lo, hard_cut_lo, -1)

    def eval_log(self, S: np.ndarray) -> np.ndarray:
        """log g at per-slice abscissas S of shape (m,) or (m, k)."""
        S2 = S[:, None] if S.ndim == 1 else S
        pts = self.origins[:, None, :] + S2[:, :, None] * self.u[None, None, :]
        vals = self.f.rep.log_density_batch(pts.reshape(-1, self.f.n))
        vals = vals.reshape(S2.shape)
        return vals[:, 0] if S.ndim == 1 else vals

    def _golden_peak(self, A, B):
        a, b = A.copy(), B.copy()
        for _ in range(70):
            c = b - _GOLDEN * (b - a)
            d = a + _GOLDEN * (b - a)
            fc = self.eval_log(c)
            fd = self.eval_log(d)
            left = fc >= fd
            b = np.where(left, d, b)
            a = np.where(left, a, c)
        mid = 0.5 * (a + b)
        return mid, self.eval_log(mid)

    def _window_edge(self, limit, target, side):
        """Abscissa where log g crosses target, searching from the peak
        toward `limit` (side +1 right, -1 left).  May extend past the box
        clip; stops at hard support cuts.  Returns (edge, at_hard_cut)."""
        hard = self.hard_hi if side > 0 else self.hard_lo
        edge = limit.copy()
        val = self.eval_log(edge)
        alive = ~self.empty & (val > target) & (edge != hard)
        step = np.maximum(np.abs(edge - self.s_peak) / 8.0, 1.0)
        for _ in range(60):
            if not np.any(alive):
                break
            edge = np.where(alive,
                            np.clip(edge + side * step,
                                    np.minimum(hard, edge),
                                    np.maximum(hard, edge)),
                            edge)
            val = np.where(alive, self.eval_log(edge), val)
            step = step * 2.0
            alive &= (val > target) & (edge != hard)
        at_hard = ~self.empty & (edge == hard) & (val > target)

        a = self.s_peak.copy()
        b = edge.copy()
        needs = ~self.empty & ~at_hard & (np.abs(b - a) > 0)
        for _ in range(48):
            if not np.any(needs):
                break
            m = 0.5 * (a + b)
            vm = self.eval_log(m)
            above = vm > target
            a = np.where(needs & above, m, a)
            b = np.where(needs & ~above, m, b)
        out = np.where(at_hard, hard, b)
        return np.where(self.empty, self.s_peak, out), at_hard

    def _chord_rate(self, w, at_hard, side):
        """Decay rate lambda with g(s) <= g(w) e^{-lambda|s-w|} beyond w,
        from the chord slope between the peak-window midpoint and w; valid
        by concavity of log g.  Hard cuts decay infinitely fast."""
        mid = 0.5 * (self.s_peak + w)
        dist = np.abs(w - mid)
        ok = ~self.empty & ~at_hard & (dist > 1e-12)
        rate = np.full(w.shape, np.inf)
        if np.any(ok):
            drop = self.eval_log(mid) - self.eval_log(w)
            lam = np.where(ok, drop / np.maximum(dist, 1e-300), np.inf)
            rate = np.where(ok, np.maximum(lam, 1e-300), rate)
        return rate


@dataclass(frozen=True)
class Slice1D:
    """The profile g(s) = f(x' + s*theta) along one line.

    [s_lo, s_hi] is the hard support interval, [w_lo, w_hi] the effective
    window bracketing {g > tail_cut * peak}; rate_lo/rate_hi are certified
    exponential decay bounds outside the window (inf at hard cuts).  If the
    log-profile is exactly linear, exact_log_h/exact_rate record it.
    """

    parent: object
    base: np.ndarray
    theta: np.ndarray
    s_lo: float
    s_hi: float
    w_lo: float
    w_hi: float
    s_peak: float
    log_peak: float
    rate_lo: float
    rate_hi: float
    empty: bool
    exact_log_h: float | None
    exact_rate: float | None
    _batch: object

    def log_profile(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float).reshape(-1)
        return self._batch.eval_log(s.reshape(1, -1))[0]

    def profile(self, s) -> np.ndarray:
        return np.exp(self.log_profile(s))

    @property
    def peak(self) -> float:
        return float(np.exp(self.log_peak))


def make_slice_batch(f, theta, bases: np.ndarray, cfg: QuadConfig,
                     basis: np.ndarray | None = None,
                     anchor_rep: bool = False) -> _SliceBatch:
    """Build the slice family {s -> f(B x'_i + s theta)}.

    bases holds transverse coordinates (m, n-1) in the orthonormal basis of
    theta-perp (pass basis to reuse one).  With anchor_rep the transverse
    coordinates are interpreted in representation coordinates, which makes
    whole-grid measurements translation equivariant.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if basis is None:
        basis = complement_basis(theta)
    bases = np.asarray(bases, dtype=float)
    if bases.ndim == 1:
        bases = bases.reshape(1, -1)
    origins = bases @ basis.T if basis.size else \
        np.zeros((bases.shape[0], f.n))
    if not anchor_rep:
        origins = origins - f.translation
    return _SliceBatch(f, theta, origins, cfg.tail_cut)


def take_slice(f, x_prime, theta, cfg: QuadConfig) -> Slice1D:
    """The slice of f at transverse position x_prime along theta."""
    x_prime = np.asarray(x_prime, dtype=float).reshape(-1)
    batch = make_slice_batch(f, theta, x_prime.reshape(1, -1), cfg)
    i = 0
    exact_h = exact_r = None
    if batch.exact_log_h is not None:
        exact_h = float(batch.exact_log_h[i])
        exact_r = float(batch.exact_rate[i])
    return Slice1D(parent=f, base=x_prime,
                   theta=np.asarray(theta, dtype=float).reshape(-1),
                   s_lo=float(batch.hard_lo[i]), s_hi=float(batch.hard_hi[i]),
                   w_lo=float(batch.w_lo[i]), w_hi=float(batch.w_hi[i]),
                   s_peak=float(batch.s_peak[i]),
                   log_peak=float(batch.log_peak[i]),
                   rate_lo=float(batch.rate_lo[i]),
                   rate_hi=float(batch.rate_hi[i]),
                   empty=bool(batch.empty[i]),
                   exact_log_h=exact_h, exact_rate=exact_r,
                   _batch=batch)


def _tail_piece(g: Slice1D, a: float, b: float, side: int,
                weight_shift: float = 0.0) -> tuple[float, float]:
    """Estimate and bound for the clipped tail integral of g over [a, b]
    beyond the window on the given side, optionally of (s - c) g with the
    |s - c| envelope folded in via weight_shift = |w - c|."""
    if b <= a:
        return 0.0, 0.0
    w = g.w_hi if side > 0 else g.w_lo
    lam = g.rate_hi if side > 0 else g.rate_lo
    if not np.isfinite(lam):
        return 0.0, 0.0
    gw = float(np.exp(g.log_profile(np.asarray([w]))[0]))
    length = b - a
    decay0 = np.exp(-lam * (a - w)) if side > 0 else np.exp(-lam * (w - b))
    base = gw / lam * decay0 * (1.0 - np.exp(-lam * min(length, 1e300)))
    bound = base * (weight_shift + 1.0 / lam) if weight_shift > 0 else base
    return 0.5 * bound, 0.5 * bound


def integrate_slice(g, a: float, b: float, cfg: QuadConfig) -> float:
    """Integral of the profile over [a, b]; endpoints may be +-inf.

    Slice profiles integrate by adaptive quadrature on the peak-scaled
    window plus certified tail corrections; comparator objects (anything
    with closed_mass) integrate in closed form.
    """
    if b < a:
        raise ValueError("integration bounds out of order")
    if not isinstance(g, Slice1D):
        return g.closed_mass(a, b)
    if g.empty:
        return 0.0
    value, _ = _integrate_slice_err(g, a, b, cfg)
    return value


def _integrate_slice_err(g: Slice1D, a: float, b: float,
                         cfg: QuadConfig) -> tuple[float, float]:
    A = max(a, g.w_lo)
    B = min(b, g.w_hi)
    peak = np.exp(g.log_peak)
    total = 0.0
    err = 0.0
    if A < B:
        def fn(s):
            return np.exp(g.log_profile(s) - g.log_peak)

        scaled_abs = max(cfg.abs_tol / max(peak, 1e-300), 1e-300)
        val, e = adaptive_integral(fn, A, B, scaled_abs, cfg.rel_tol)
        total += val * peak
        err += e * peak
    lo_est, lo_err = _tail_piece(g, max(a, -1e300), min(b, g.w_lo), -1)
    hi_est, hi_err = _tail_piece(g, max(a, g.w_hi), min(b, 1e300), +1)
    total += lo_est + hi_est
    err += lo_err + hi_err
    return total, err


def slice_mass_and_moment(g: Slice1D, cfg: QuadConfig,
                          center: float = 0.0) -> tuple[float, float, float]:
    """(mass, first moment about `center`, error bound) over the full line.

    Mass and moment share one adaptive pass so their panel structure is
    identical; the moment's tail bound carries the |s - center| envelope.
    """
    if g.empty:
        return 0.0, 0.0, 0.0
    peak = np.exp(g.log_peak)

    def fn(s):
        vals = np.exp(g.log_profile(s) - g.log_peak)
        return np.stack([vals, (s - center) * vals])

    scaled_abs = max(cfg.abs_tol / max(peak, 1e-300), 1e-300)
    (mass, mom), (em, eo) = adaptive_integral_multi(fn, g.w_lo, g.w_hi,
                                                    scaled_abs, cfg.rel_tol)
    mass *= peak
    mom *= peak
    err = (em + eo) * peak
    m_lo, e_lo = _tail_piece(g, -1e300, g.w_lo, -1)
    m_hi, e_hi = _tail_piece(g, g.w_hi, 1e300, +1)
    mass += m_lo + m_hi
    # Moment tails can carry either sign depending on where `center`
    # sits, so they contribute only to the error bound.
    mo_lo, eo_lo = _tail_piece(g, -1e300, g.w_lo, -1,
                               weight_shift=abs(g.w_lo - center))
    mo_hi, eo_hi = _tail_piece(g, g.w_hi, 1e300, +1,
                               weight_shift=abs(g.w_hi - center))
    err += e_lo + e_hi + (mo_lo + eo_lo) + (mo_hi + eo_hi)
    return mass, mom, err


def require_nonempty_axis(g: Slice1D) -> None:
    if g.empty:
        raise AxisSupportError("axis misses support")
