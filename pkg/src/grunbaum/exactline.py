"""Closed-form line integrals for the built-in representations.

Every density in the toolkit restricts to lines in one of two shapes: a
piecewise log-linear profile plus a shared quadratic term (max-affine
potentials), or a single-rate exponential on an interval (cone and
weighted-region representations, where the second shape is the first with
one segment and no quadratic).  Both admit machine-precision masses, first
moments, upper tails and critical heights.  Fixed-node quadrature cannot
track the kinks of a max-affine profile below roughly h^2 times the slope
jump, which is orders of magnitude above the tolerances the height-field
and comparator invariants are calibrated to; the closed forms remove that
floor entirely.

Gaussian pieces integrate through erfcx anchored at endpoint profile
values, so no completed square is ever exponentiated: every factor stays on
the order of the profile values themselves and the formulas survive
segments arbitrarily far into the tails.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .density import MaxAffinePotential
from .errors import BracketError

_SQRT_PI = 1.7724538509055160273
# Below this the quadratic term cannot move any double at unit scale and the
# profile integrates as piecewise exponential.
_EPS_EXACT_ZERO = 1e-100
_RATE_MATCH = 1e-12


def _phi1(x: np.ndarray) -> np.ndarray:
    """(1 - exp(-x)) / x, the mean of exp(-t) over [0, x]; phi1(0) = 1."""
    out = np.ones_like(x)
    nz = x != 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        out[nz] = -np.expm1(-x[nz]) / x[nz]
    return out


def _phi2(x: np.ndarray) -> np.ndarray:
    """(1 - (1+x) exp(-x)) / x^2; phi2(0) = 1/2.

    Direct evaluation loses half the digits below |x| ~ 1e-2, where the
    degree-4 Taylor polynomial is accurate to machine precision.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-2
    xs = x[small]
    out[small] = 0.5 + xs * (-1.0 / 6.0 + xs * (1.0 / 24.0 + xs * (
        -1.0 / 120.0 + xs / 720.0)))
    xl = x[~small]
    with np.errstate(over="ignore", invalid="ignore"):
        out[~small] = (1.0 - (1.0 + xl) * np.exp(-xl)) / (xl * xl)
    return out


class ExactSliceFamily:
    """Per-slice segment data for profiles g_i(s) = exp(-pot_i(s)).

    pot_i(s) = q[i,k] + p[i,k] s + eps s^2 on the segment
    [bnd[i,k], bnd[i,k+1]], k < nseg[i]; outside [bnd[i,0], bnd[i,-extent]]
    the profile is zero.  Segment boundaries are padded on the right with the
    support's upper end so every row has the same width.
    """

    def __init__(self, bnd: np.ndarray, p: np.ndarray, q: np.ndarray,
                 nseg: np.ndarray, eps: float):
        self.bnd = bnd
        self.p = p
        self.q = q
        self.nseg = nseg
        self.eps = float(eps)
        self.lo = bnd[:, 0]
        self.hi = bnd[np.arange(bnd.shape[0]), nseg]
        i0, i1 = _segment_integrals(bnd[:, :-1], bnd[:, 1:], p, q, self.eps)
        self._seg_mass = i0
        # suffix[:, k] = integral from bnd[:, k] to the support's upper end
        self.suffix = np.concatenate(
            [np.cumsum(i0[:, ::-1], axis=1)[:, ::-1],
             np.zeros((i0.shape[0], 1))], axis=1)
        self.mass = self.suffix[:, 0].copy()
        self.moment0 = np.sum(i1, axis=1)

    @property
    def m(self) -> int:
        return self.bnd.shape[0]

    def mass_moment(self, center: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Per-slice (mass, first moment about center) over the full line."""
        return self.mass.copy(), self.moment0 - center * self.mass

    def _locate(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a_eff = np.clip(a, self.lo, self.hi)
        k = np.sum(self.bnd <= a_eff[:, None], axis=1) - 1
        k = np.clip(k, 0, np.maximum(self.nseg - 1, 0))
        return a_eff, k

    def value(self, a: np.ndarray) -> np.ndarray:
        """g_i(a_i), zero outside the support interval."""
        a = np.asarray(a, dtype=float)
        a_eff, k = self._locate(a)
        rows = np.arange(self.m)
        pot = self.q[rows, k] + a_eff * (self.p[rows, k] + self.eps * a_eff)
        with np.errstate(over="ignore"):
            g = np.exp(-pot)
        inside = (a >= self.lo) & (a <= self.hi) & (self.nseg > 0)
        return np.where(inside, g, 0.0)

    def upper_tail(self, a: np.ndarray) -> np.ndarray:
        """T_i(a_i) = integral of g_i over [a_i, +inf)."""
        a = np.asarray(a, dtype=float)
        a_eff, k = self._locate(a)
        rows = np.arange(self.m)
        b = self.bnd[rows, k + 1]
        part, _ = _segment_integrals(a_eff, b, self.p[rows, k],
                                     self.q[rows, k], self.eps)
        return part + self.suffix[rows, k + 1]

    def hazard_sign(self, a: np.ndarray, beta: float) -> np.ndarray:
        """True where g(a) > beta * T(a), i.e. right of the critical point."""
        return self.value(a) > beta * self.upper_tail(a)

    def row_value(self, i: int, a: np.ndarray) -> np.ndarray:
        """g_i at many abscissas for one slice."""
        a = np.asarray(a, dtype=float).reshape(-1)
        k = np.clip(np.searchsorted(self.bnd[i], a, side="right") - 1,
                    0, max(self.nseg[i] - 1, 0))
        pot = self.q[i, k] + a * (self.p[i, k] + self.eps * a)
        with np.errstate(over="ignore"):
            g = np.exp(-pot)
        inside = (a >= self.lo[i]) & (a <= self.hi[i]) & (self.nseg[i] > 0)
        return np.where(inside, g, 0.0)

    def row_upper_tail(self, i: int, a: np.ndarray) -> np.ndarray:
        """T_i at many abscissas for one slice."""
        a = np.asarray(a, dtype=float).reshape(-1)
        a_eff = np.clip(a, self.lo[i], self.hi[i])
        k = np.clip(np.searchsorted(self.bnd[i], a_eff, side="right") - 1,
                    0, max(self.nseg[i] - 1, 0))
        part, _ = _segment_integrals(a_eff, self.bnd[i, k + 1],
                                     self.p[i, k], self.q[i, k], self.eps)
        return part + self.suffix[i, k + 1]

    def final_rate(self) -> np.ndarray:
        """Decay rate of the last segment (the eventual rate when eps = 0)."""
        rows = np.arange(self.m)
        return self.p[rows, np.maximum(self.nseg - 1, 0)]

    def critical_height(self, beta: float):
        """Vectorized critical heights H_i = sup_a beta e^{beta a} T_i(a).

        Returns (H, a_star, status) with status 0 for an interior critical
        point, 1 when the supremum sits at the lower support endpoint and
        2 on a maximizer plateau (pure-exponential tail with rate exactly
        beta).  Empty slices report H = 0 with status 0.  Raises
        BracketError when some slice's tail decays slower than beta, which
        makes the objective unbounded.
        """
        beta = float(beta)
        if not beta > 0:
            raise ValueError("beta must be positive")
        m = self.m
        rows = np.arange(m)
        H = np.zeros(m)
        a_star = np.zeros(m)
        status = np.zeros(m, dtype=np.int8)
        live = (self.nseg > 0) & (self.mass > 0) & np.isfinite(self.mass)

        unbounded = live & np.isinf(self.hi)
        if self.eps <= _EPS_EXACT_ZERO and np.any(unbounded):
            lam = self.final_rate()
            slow = unbounded & (lam < beta * (1.0 - _RATE_MATCH))
            if np.any(slow):
                i = int(np.argmax(slow))
                a0 = self.bnd[i, max(self.nseg[i] - 1, 0)]
                a0 = a0 if np.isfinite(a0) else 0.0
                pts = a0 + np.linspace(0.0, 10.0 / beta, 16)
                vals = beta * np.exp(beta * pts) * self.row_upper_tail(i, pts)
                raise BracketError(
                    "objective is unbounded: tail decay rate "
                    f"{lam[i]:.6g} is below beta = {beta:.6g}", pts, vals)
            plateau = unbounded & (np.abs(lam - beta) <= _RATE_MATCH * beta)
            if np.any(plateau):
                a0 = self.bnd[rows, np.maximum(self.nseg - 1, 0)]
                a0 = np.where(np.isfinite(a0), a0, 0.0)
                t0 = self.upper_tail(a0)
                status[plateau] = 2
                a_star[plateau] = a0[plateau]
                H[plateau] = (beta * np.exp(beta * a0) * t0)[plateau]
                live = live & ~plateau

        # Supremum at the lower endpoint: the hazard already meets beta there.
        lo_f = np.isfinite(self.lo)
        g_lo = self.value(self.lo)
        at_lo = live & lo_f & (g_lo >= beta * self.mass)
        status[at_lo] = 1
        a_star[at_lo] = self.lo[at_lo]
        H[at_lo] = (beta * np.exp(beta * self.lo) * self.mass)[at_lo]

        inner = live & ~at_lo
        if np.any(inner):
            a_in, H_in = self._interior_critical(beta, inner)
            a_star[inner] = a_in
            H[inner] = H_in
        return H, a_star, status

    def _interior_critical(self, beta: float, sel: np.ndarray):
        """Bisection on the hazard crossing for the selected slices."""
        lo = self.lo[sel]
        hi = self.hi[sel]
        nseg = self.nseg[sel]
        k = sel.sum()
        idx = np.arange(self.m)[sel]

        # A finite anchor inside the support to start bracket expansion;
        # doubling steps make its position a cost, not a correctness, issue.
        first_bp = self.bnd[idx, 1]
        last_st = self.bnd[idx, np.maximum(nseg - 1, 0)]
        anchor = np.where(np.isfinite(lo), lo, np.where(
            np.isfinite(first_bp), first_bp, np.where(
                np.isfinite(last_st), last_st, 0.0)))

        def sign_at(a):
            full = np.zeros(self.m)
            full[idx] = a
            return self.hazard_sign(full, beta)[idx]

        # Left bracket: hazard below beta.  Finite lower ends qualify
        # outright (the endpoint case was peeled off above).
        L = np.where(np.isfinite(lo), lo, anchor)
        needs = ~np.isfinite(lo)
        step = np.ones(k)
        for _ in range(80):
            if not np.any(needs):
                break
            high = sign_at(L) & needs
            L = np.where(high, L - step, L)
            step = np.where(high, step * 2.0, step)
            needs = high
        # Right bracket: hazard above beta.  Finite upper ends qualify in
        # the limit; unbounded quadratic tails get there by expansion.
        R = np.where(np.isfinite(hi), hi, anchor)
        needs = ~np.isfinite(hi)
        step = np.ones(k)
        for _ in range(80):
            if not np.any(needs):
                break
            low = needs & ~sign_at(R)
            R = np.where(low, R + step, R)
            step = np.where(low, step * 2.0, step)
            needs = low
        for _ in range(90):
            mid = 0.5 * (L + R)
            above = sign_at(mid)
            R = np.where(above, mid, R)
            L = np.where(above, L, mid)
        a = 0.5 * (L + R)
        full = np.zeros(self.m)
        full[idx] = a
        T = self.upper_tail(full)[idx]
        return a, beta * np.exp(beta * a) * T


def _segment_integrals(A, B, p, q, eps: float):
    """(integral of e^{-(q+ps+eps s^2)}, same with weight s) over [A, B].

    All arrays broadcast elementwise; A may be -inf and B +inf.  Zero-length
    or inverted segments contribute zero.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    p = np.broadcast_to(np.asarray(p, dtype=float), A.shape)
    q = np.broadcast_to(np.asarray(q, dtype=float), A.shape)
    ok = A < B
    if eps > _EPS_EXACT_ZERO:
        i0, i1 = _segment_integrals_gauss(A, B, p, q, eps)
    else:
        i0, i1 = _segment_integrals_exp(A, B, p, q)
    zero = np.zeros_like(i0)
    return np.where(ok, i0, zero), np.where(ok, i1, zero)


def _segment_integrals_gauss(A, B, p, q, eps: float):
    rt = np.sqrt(eps)
    mu = p / (2.0 * eps)
    with np.errstate(over="ignore", invalid="ignore"):
        potA = q + A * (p + eps * A)
        potB = q + B * (p + eps * B)
        gA = np.where(np.isfinite(A), np.exp(-potA), 0.0)
        gB = np.where(np.isfinite(B), np.exp(-potB), 0.0)
        zA = rt * A + p / (2.0 * rt)
        zB = rt * B + p / (2.0 * rt)
        c = _SQRT_PI / (2.0 * rt)
        # Upper/lower Gaussian tails anchored at the endpoint values keep
        # every erfcx argument nonnegative.
        right = A >= -mu          # whole segment right of the peak
        left = B <= -mu           # whole segment left of the peak
        tail_A = np.where(np.isfinite(A), c * special.erfcx(
            np.where(right, zA, np.maximum(-zA, 0.0))) * gA, 0.0)
        tail_B = np.where(np.isfinite(B), c * special.erfcx(
            np.where(left, -zB, np.maximum(zB, 0.0))) * gB, 0.0)
        g_peak = np.exp(-(q - eps * mu * mu))
        i0 = np.where(right, tail_A - tail_B,
                      np.where(left, tail_B - tail_A,
                               2.0 * c * g_peak - tail_A - tail_B))
        i1 = (gA - gB) / (2.0 * eps) - mu * i0
    return i0, i1


def _segment_integrals_exp(A, B, p, q):
    with np.errstate(over="ignore", invalid="ignore"):
        delta = B - A
        finite = np.isfinite(delta)
        d = np.where(finite, delta, 0.0)
        pos = p >= 0.0
        # Anchor at the endpoint with the larger profile value.
        anchor = np.where(pos, A, B)
        anchor = np.where(np.isfinite(anchor), anchor, 0.0)
        g_anc = np.exp(-(q + p * anchor))
        x = np.abs(p) * d
        i0_fin = g_anc * d * _phi1(x)
        w = g_anc * d * d * _phi2(x)
        i1_fin = anchor * i0_fin + np.where(pos, w, -w)
        # Half-infinite segments need |p| > 0 on the unbounded side.
        absp = np.maximum(np.abs(p), 1e-300)
        i0_inf = g_anc / absp
        i1_inf = anchor * i0_inf + np.where(pos, 1.0, -1.0) * g_anc / (
            absp * absp)
        i0 = np.where(finite, i0_fin, i0_inf)
        i1 = np.where(finite, i1_fin, i1_inf)
        # A rate running the wrong way on an unbounded side has no finite
        # integral; report it as such instead of anchoring arbitrarily.
        div = ~np.isfinite(delta) & (
            ((p >= 0) & ~np.isfinite(A)) | ((p <= 0) & ~np.isfinite(B)))
        i0 = np.where(div, np.inf, i0)
        i1 = np.where(div, np.inf, i1)
    return i0, i1


def _upper_envelope(P: np.ndarray, Q: np.ndarray):
    """Row-wise upper envelopes of the lines q + p s.

    Returns (ps, qs, top) where ps/qs[i, :top[i]+1] list the envelope lines
    of row i in slope order; entries beyond the stack top are (0, 1e300) so
    stray reads integrate to zero.  The pop loop is the standard hull trick
    run simultaneously on every row.
    """
    m, k = P.shape
    oq = np.argsort(Q, axis=1, kind="stable")
    P1 = np.take_along_axis(P, oq, axis=1)
    Q1 = np.take_along_axis(Q, oq, axis=1)
    op = np.argsort(P1, axis=1, kind="stable")
    Ps = np.take_along_axis(P1, op, axis=1)
    Qs = np.take_along_axis(Q1, op, axis=1)
    # Equal slopes: stable sorting left them in ascending q, keep the last.
    dup = np.concatenate([Ps[:, 1:] == Ps[:, :-1],
                          np.zeros((m, 1), dtype=bool)], axis=1)

    stk_p = np.zeros((m, k))
    stk_q = np.full((m, k), 1e300)
    top = np.full(m, -1, dtype=np.int64)
    rows = np.arange(m)
    for j in range(k):
        pj = Ps[:, j]
        qj = Qs[:, j]
        valid = ~dup[:, j]
        while True:
            can = valid & (top >= 1)
            if not np.any(can):
                break
            i2 = np.clip(top, 0, k - 1)
            i1 = np.clip(top - 1, 0, k - 1)
            p1 = stk_p[rows, i1]
            q1 = stk_q[rows, i1]
            p2 = stk_p[rows, i2]
            q2 = stk_q[rows, i2]
            # The middle line never surfaces if the newcomer overtakes the
            # line below it no later than the middle one did.
            pop = can & ((q1 - qj) * (p2 - p1) <= (q1 - q2) * (pj - p1))
            if not np.any(pop):
                break
            top = np.where(pop, top - 1, top)
        top = np.where(valid, top + 1, top)
        put = np.clip(top, 0, k - 1)
        stk_p[rows, put] = np.where(valid, pj, stk_p[rows, put])
        stk_q[rows, put] = np.where(valid, qj, stk_q[rows, put])
    return stk_p, stk_q, top


def family_from_max_affine(rep: MaxAffinePotential, origins: np.ndarray,
                           u: np.ndarray, lo: np.ndarray,
                           hi: np.ndarray) -> ExactSliceFamily:
    """Segment data for slices of a max-affine density.

    Along origin + s u the potential is max_j(q_j + p_j s) + eps s^2 with
    p_j = <a_j, u> + 2 eps <origin, u> and q_j = <a_j, origin> + b_j +
    eps |origin|^2; the envelope's breakpoints are the profile kinks.
    """
    m = origins.shape[0]
    ou = origins @ u
    oo = np.sum(origins * origins, axis=1)
    P = np.broadcast_to(rep.slopes @ u, (m, rep.offsets.size)).copy()
    Q = origins @ rep.slopes.T + rep.offsets[None, :]
    if rep.epsilon > 0:
        P += 2.0 * rep.epsilon * ou[:, None]
        Q += rep.epsilon * oo[:, None]

    empty = ~(lo < hi)
    lo = np.where(empty, 0.0, lo)
    hi = np.where(empty, 0.0, hi)

    stk_p, stk_q, top = _upper_envelope(P, Q)
    nseg = np.where(empty, 0, top + 1).astype(np.int64)
    kmax = int(np.max(top)) + 1
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = (stk_q[:, :kmax - 1] - stk_q[:, 1:kmax]) / \
            (stk_p[:, 1:kmax] - stk_p[:, :kmax - 1]) if kmax > 1 else \
            np.zeros((m, 0))
    bnd = np.empty((m, kmax + 1))
    bnd[:, 0] = np.where(empty, 0.0, lo)
    cols = np.arange(1, kmax + 1)
    real = cols[None, :] <= top[:, None]
    inner = np.concatenate([cross, np.zeros((m, 1))], axis=1)
    inner = np.where(np.isfinite(inner), inner, 0.0)
    bnd[:, 1:] = np.where(real & ~empty[:, None],
                          np.clip(inner, lo[:, None], hi[:, None]),
                          hi[:, None])
    return ExactSliceFamily(bnd, stk_p[:, :kmax], stk_q[:, :kmax], nseg,
                            rep.epsilon)


def family_from_exponential(lo: np.ndarray, hi: np.ndarray,
                            log_h: np.ndarray,
                            rate: np.ndarray) -> ExactSliceFamily:
    """One-segment family for profiles h e^{-rate s} on [lo, hi]."""
    empty = ~(lo < hi)
    lo = np.where(empty, 0.0, lo)
    hi = np.where(empty, 0.0, hi)
    bnd = np.stack([lo, hi], axis=1)
    p = rate[:, None].astype(float)
    q = -log_h[:, None].astype(float)
    nseg = np.where(empty, 0, 1).astype(np.int64)
    return ExactSliceFamily(bnd, p, q, nseg, 0.0)


def line_family(f, u: np.ndarray, origins_rep: np.ndarray):
    """Exact per-slice integration data, or None for foreign representations.

    origins_rep are line base points in representation coordinates; support
    ends come from the representation itself, not from any tail box, so the
    family covers the true support.
    """
    rep = f.rep
    lp = rep.line_params(origins_rep, u)
    if isinstance(rep, MaxAffinePotential):
        return family_from_max_affine(rep, origins_rep, u, lp.lo, lp.hi)
    if lp.exact:
        return family_from_exponential(lp.lo, lp.hi, lp.exp_log_h,
                                       lp.exp_rate)
    return None


def exact_family(batch):
    """line_family for a slice batch, memoized on the batch object."""
    fam = getattr(batch, "_exact_family", False)
    if fam is False:
        fam = line_family(batch.f, batch.u, batch.origins)
        batch._exact_family = fam
    return fam
