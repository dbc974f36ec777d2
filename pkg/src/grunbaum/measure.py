"""Masses, centroids, recentring, and ray-mass ratios.

Dispatch by representation:

  * densities with an exact axis of revolution (cones with exponential
    weight, revolution bodies with axial weight) reduce to one radial
    integral;
  * one-dimensional densities integrate directly on their slice window;
  * n = 2 uses adaptive transverse quadrature over batched slice integrals;
  * n = 3 uses tensor-product Simpson with stride-2 Richardson control;
  * epigraph regions admit closed-form slice masses, leaving only the
    transverse sum;
  * Monte Carlo importance sampling cross-checks the grid answers with
    representation-aware proposals.

Every grid is anchored to representation coordinates and ambient moments
are recovered by shifting afterwards, which makes all estimates exactly
translation equivariant: recentring therefore converges in one step up to
float cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .density import ConeExponential, LogConcaveFn, MaxAffinePotential, \
    WeightedRegion
from .errors import AxisSupportError, DegenerateDensityError, \
    QuadratureError, RecenterError
from .exactline import exact_family
from .geometry import complement_basis, unit_ball_volume
from .quadrature import QuadConfig, adaptive_integral_multi, simpson_weights
from .regions import ConeBody, PsiProfile, RevolutionBody
from .slicing import _SliceBatch, _integrate_slice_err, take_slice


@dataclass(frozen=True)
class MassEstimate:
    """An integral value with an error figure: a bound for grid methods,
    one standard error for Monte Carlo."""

    value: float
    error: float


@dataclass(frozen=True)
class RatioResult:
    ratio: float
    mass_pos: float
    mass_neg: float
    error: float


# ---------------------------------------------------------------------------
# batched fixed-order slice integration (inner loop of the grid paths)

def _batch_mass_axmom(batch: _SliceBatch, nodes: int):
    """Per-slice (mass, first axial moment about s=0, error bound).

    Representations with closed-form line integrals bypass quadrature
    entirely, leaving only a roundoff allowance; anything else falls back to
    composite Simpson on each window with stride-2 Richardson control and
    certified exponential tails.  nodes must be 1 mod 4."""
    if (nodes - 1) % 4:
        raise ValueError("nodes must be 1 mod 4")
    fam = exact_family(batch)
    if fam is not None:
        mass, mom = fam.mass_moment()
        return mass, mom, 3e-13 * (mass + np.abs(mom)) + 1e-300
    live = ~batch.empty
    width = np.where(live, batch.w_hi - batch.w_lo, 0.0)
    u = np.linspace(0.0, 1.0, nodes)
    S = batch.w_lo[:, None] + width[:, None] * u[None, :]
    logv = batch.eval_log(S)
    scale = np.where(live, np.exp(batch.log_peak), 0.0)
    vals = np.exp(np.clip(logv - batch.log_peak[:, None], -746.0, 50.0))
    vals[~live] = 0.0
    h = width / (nodes - 1)

    wf = simpson_weights(nodes)
    wc = simpson_weights((nodes - 1) // 2 + 1)

    def composite(y):
        full = h * (y @ wf)
        coarse = 2.0 * h * (y[:, ::2] @ wc)
        diff = (full - coarse) / 15.0
        return full + diff, np.abs(diff)

    mass_s, mass_e = composite(vals)
    mom_s, mom_e = composite(S * vals)
    mass = mass_s * scale
    mom = mom_s * scale
    err = (mass_e + mom_e) * scale

    # Certified exponential tails outside the windows.
    for w, lam, col in ((batch.w_hi, batch.rate_hi, -1),
                        (batch.w_lo, batch.rate_lo, 0)):
        fin = live & np.isfinite(lam)
        if not np.any(fin):
            continue
        gw = np.where(fin, np.exp(logv[:, col]) * scale, 0.0)
        base = np.where(fin, gw / np.where(fin, lam, 1.0), 0.0)
        mass = mass + 0.5 * base
        err = err + 0.5 * base
        err = err + base * (np.abs(w) + np.where(fin, 1.0 / lam, 0.0))
    return mass, mom, err


# ---------------------------------------------------------------------------
# radial path

def _scalar_peak_window(log_fn, lo: float, tail_cut: float):
    """Peak and window of a unimodal log-profile supported on [lo, inf)."""
    span = 1.0
    t_prev = lo + span
    f_prev = log_fn(t_prev)
    b = None
    for _ in range(200):
        t_next = lo + (t_prev - lo) * 2.0
        f_next = log_fn(t_next)
        if f_next < f_prev:
            b = t_next
            break
        t_prev, f_prev = t_next, f_next
    if b is None:
        raise QuadratureError("radial profile does not decay", np.nan, np.inf)

    a, t = lo, b
    for _ in range(80):
        c = t - 0.6180339887498949 * (t - a)
        d = a + 0.6180339887498949 * (t - a)
        if log_fn(c) >= log_fn(d):
            t = d
        else:
            a = c
    peak = 0.5 * (a + t)
    log_peak = log_fn(peak)
    target = log_peak + np.log(tail_cut)

    hi = peak
    step = max(1.0, peak - lo)
    for _ in range(100):
        if log_fn(hi + step) <= target:
            break
        hi += step
        step *= 2.0
    wa, wb = hi, hi + step
    for _ in range(60):
        m = 0.5 * (wa + wb)
        if log_fn(m) > target:
            wa = m
        else:
            wb = m
    w_hi = wb

    wa, wb = lo, peak
    for _ in range(60):
        m = 0.5 * (wa + wb)
        if log_fn(m) > target:
            wb = m
        else:
            wa = m
    w_lo = wa

    mid = 0.5 * (peak + w_hi)
    lam = (log_fn(mid) - log_fn(w_hi)) / max(w_hi - mid, 1e-300)
    return peak, log_peak, w_lo, w_hi, max(lam, 1e-300)


def _radial_mass_moment(f: LogConcaveFn, cfg: QuadConfig):
    """(mass, axial moment about representation zero, error) for densities
    with an exact axis of revolution."""
    rep = f.rep
    if isinstance(rep, ConeExponential):
        k = rep.n - 1
        t0 = rep.vertex
        lk = np.log(unit_ball_volume(k))

        def log_fn(t):
            if t <= t0:
                return -np.inf
            extent = k * np.log(t - t0) if k else 0.0
            return lk + extent - t
        lo = t0
    else:
        region, beta, w0 = rep.region, rep.beta, rep.log_height
        k = f.n - 1
        lk = np.log(unit_ball_volume(k))
        if isinstance(region, ConeBody):
            s0, R = region.s0, region.R

            def rad(t):
                return R * (t - s0) / (-s0)
        else:
            s0 = region.s0

            def rad(t):
                return float(region.radius(np.asarray([float(t)]))[0])

        def log_fn(t):
            if t <= s0:
                return -np.inf
            r = rad(t)
            if r <= 0.0:
                return -np.inf
            return lk + k * np.log(r) + w0 - beta * t
        lo = s0

    peak, log_peak, w_lo, w_hi, lam = _scalar_peak_window(
        log_fn, lo, cfg.tail_cut)
    pk = np.exp(log_peak)

    def fn(t):
        logs = np.array([log_fn(ti) for ti in t]) - log_peak
        vals = np.exp(np.clip(logs, -746.0, 50.0))
        return np.stack([vals, t * vals])

    scaled_abs = max(cfg.abs_tol / max(pk, 1e-300), 1e-300)
    (mass_s, mom_s), (em, eo) = adaptive_integral_multi(
        fn, w_lo, w_hi, scaled_abs, cfg.rel_tol)
    mass = mass_s * pk
    mom = mom_s * pk
    err = (em + eo) * pk
    gw = np.exp(log_fn(w_hi))
    tail = gw / lam
    mass += 0.5 * tail
    err += 0.5 * tail + tail * (abs(w_hi) + 1.0 / lam)
    left = cfg.tail_cut * pk * max(w_lo - lo, 0.0)
    err += left * (1.0 + abs(w_lo))
    return mass, mom, err


def _is_radial(rep) -> bool:
    if isinstance(rep, ConeExponential):
        return True
    if isinstance(rep, WeightedRegion):
        return isinstance(rep.region, (RevolutionBody, ConeBody)) \
            and not np.any(rep.ell)
    return False


# ---------------------------------------------------------------------------
# grid paths (representation coordinates throughout)

def _axis_vec(n: int) -> np.ndarray:
    e = np.zeros(n)
    e[0] = 1.0
    return e


def _grid_1d(f: LogConcaveFn, cfg: QuadConfig):
    batch = _SliceBatch(f, np.array([1.0]), np.zeros((1, 1)), cfg.tail_cut)
    mass, mom, err = _batch_mass_axmom(batch, 2049)
    return float(mass[0]), np.array([float(mom[0])]), float(err[0])


def _grid_2d(f: LogConcaveFn, cfg: QuadConfig):
    box_lo, box_hi = f.rep.support_box(cfg.tail_cut)
    axis = _axis_vec(2)
    inner_extra = [0.0]

    def fn(xp):
        origins = np.stack([np.zeros_like(xp), xp], axis=-1)
        batch = _SliceBatch(f, axis, origins, cfg.tail_cut)
        mass, mom, err = _batch_mass_axmom(batch, 513)
        inner_extra[0] = max(inner_extra[0], float(np.max(err, initial=0.0)))
        return np.stack([mass, mom, xp * mass])

    (mass, mom1, mom2), errs = adaptive_integral_multi(
        fn, box_lo[1], box_hi[1], cfg.abs_tol, cfg.rel_tol)
    err = float(np.sum(errs)) + inner_extra[0] * (box_hi[1] - box_lo[1])
    return float(mass), np.array([mom1, mom2]), err


def _grid_3d(f: LogConcaveFn, cfg: QuadConfig):
    nt, nodes = (61, 129) if cfg.rel_tol > 3e-9 else (97, 257)
    box_lo, box_hi = f.rep.support_box(cfg.tail_cut)
    gx = np.linspace(box_lo[1], box_hi[1], nt)
    gy = np.linspace(box_lo[2], box_hi[2], nt)
    hx = (gx[-1] - gx[0]) / (nt - 1)
    hy = (gy[-1] - gy[0]) / (nt - 1)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    origins = np.stack([np.zeros(nt * nt), X.ravel(), Y.ravel()], axis=-1)
    batch = _SliceBatch(f, _axis_vec(3), origins, cfg.tail_cut)
    mass_i, mom_i, err_i = _batch_mass_axmom(batch, nodes)

    w1 = simpson_weights(nt)
    W = np.outer(w1, w1).ravel() * hx * hy
    wc = simpson_weights((nt - 1) // 2 + 1)
    Wc = np.outer(wc, wc).ravel() * 4.0 * hx * hy
    idx = (np.arange(nt * nt).reshape(nt, nt)[::2, ::2]).ravel()

    def tensor(values):
        full = float(W @ values)
        coarse = float(Wc @ values[idx])
        diff = (full - coarse) / 15.0
        return full + diff, abs(diff)

    mass, e0 = tensor(mass_i)
    momx1, e1 = tensor(mom_i)
    momx2, e2 = tensor(X.ravel() * mass_i)
    momx3, e3 = tensor(Y.ravel() * mass_i)
    err = e0 + e1 + e2 + e3 + float(W @ err_i)
    return mass, np.array([momx1, momx2, momx3]), err


def _epigraph_mass_moment(f: LogConcaveFn, cfg: QuadConfig):
    """Closed-form slice masses over the profile's own transverse grid."""
    rep = f.rep
    prof: PsiProfile = rep.region
    beta = rep.beta
    k = prof.dim
    axes = prof.axes
    vals = prof.values
    valid = vals < 1e17
    if k == 1:
        xp = axes[0][:, None]
        log_h = rep.log_height + prof_ell_dot(rep.ell, xp)
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        xp = np.stack([X.ravel(), Y.ravel()], axis=-1)
        log_h = rep.log_height + xp @ rep.ell
    psi = np.where(valid, vals, 0.0).ravel()
    node_mass = np.where(valid.ravel(),
                         np.exp(log_h.ravel() - beta * psi) / beta, 0.0)
    node_mom = node_mass * (psi + 1.0 / beta)

    def tensor_sum(values):
        if k == 1:
            h = axes[0][1] - axes[0][0]
            w = simpson_weights(axes[0].size)
            full = h * float(w @ values)
            if (axes[0].size - 1) % 4 == 0:
                wc = simpson_weights((axes[0].size - 1) // 2 + 1)
                coarse = 2 * h * float(wc @ values[::2])
                d = (full - coarse) / 15.0
                return full + d, abs(d)
            return full, abs(full) * 1e-9
        n0, n1 = axes[0].size, axes[1].size
        h0 = axes[0][1] - axes[0][0]
        h1 = axes[1][1] - axes[1][0]
        W = np.outer(simpson_weights(n0), simpson_weights(n1)) * h0 * h1
        full = float(W.ravel() @ values)
        if (n0 - 1) % 4 == 0 and (n1 - 1) % 4 == 0:
            Wc = np.outer(simpson_weights((n0 - 1) // 2 + 1),
                          simpson_weights((n1 - 1) // 2 + 1)) * 4 * h0 * h1
            vv = values.reshape(n0, n1)[::2, ::2].ravel()
            coarse = float(Wc.ravel() @ vv)
            d = (full - coarse) / 15.0
            return full + d, abs(d)
        return full, abs(full) * 1e-9

    mass, e0 = tensor_sum(node_mass)
    mom1, e1 = tensor_sum(node_mom)
    moms = [mom1]
    errs = e0 + e1
    for d in range(k):
        coord = xp[:, d] if k > 1 else xp.ravel()
        md, ed = tensor_sum(coord * node_mass)
        moms.append(md)
        errs += ed
    return mass, np.array(moms), errs


def prof_ell_dot(ell: np.ndarray, xp: np.ndarray) -> np.ndarray:
    return (xp * ell).sum(axis=-1)


# ---------------------------------------------------------------------------
# public operations

def _mass_and_moment(f: LogConcaveFn, cfg: QuadConfig, method: str):
    if method not in ("auto", "grid", "radial", "mc"):
        raise ValueError("unknown method: %r" % (method,))
    rep = f.rep
    if method == "radial" and not _is_radial(rep):
        raise ValueError("radial method requires an axisymmetric "
                         "representation")
    use_radial = method == "radial" or (method == "auto" and _is_radial(rep))
    if use_radial:
        mass, axmom, err = _radial_mass_moment(f, cfg)
        if isinstance(rep, ConeExponential):
            # Transverse symmetry about the axis: the moment is axial.
            mom_rep = axmom * rep.axis
        else:
            mom_rep = np.zeros(f.n)
            mom_rep[0] = axmom
        return mass, mom_rep + mass * f.translation, err
    if method == "auto" and isinstance(rep, WeightedRegion) \
            and isinstance(rep.region, PsiProfile):
        mass, mom_rep, err = _epigraph_mass_moment(f, cfg)
        return mass, mom_rep + mass * f.translation, err
    if f.n == 1:
        mass, mom_rep, err = _grid_1d(f, cfg)
    elif f.n == 2:
        mass, mom_rep, err = _grid_2d(f, cfg)
    elif f.n == 3:
        mass, mom_rep, err = _grid_3d(f, cfg)
    else:
        raise ValueError("grid quadrature supports dimensions 1 to 3; "
                         "use the Monte Carlo path above that")
    return mass, mom_rep + mass * f.translation, err


def total_mass(f: LogConcaveFn, cfg: QuadConfig | None = None,
               method: str = "auto") -> MassEstimate:
    """Integral of f over its space.  method picks the estimator: "auto"
    dispatches on the representation, "grid"/"radial" force a path, "mc"
    delegates to importance sampling."""
    cfg = cfg or QuadConfig()
    if method == "mc":
        return total_mass_mc(f, cfg)
    mass, _, err = _mass_and_moment(f, cfg, method)
    return MassEstimate(float(mass), float(err))


def centroid(f: LogConcaveFn, cfg: QuadConfig | None = None,
             method: str = "auto") -> tuple[np.ndarray, float]:
    """Barycentre of f and an error figure for it."""
    cfg = cfg or QuadConfig()
    if method == "mc":
        raise ValueError("centroid requires a deterministic method")
    mass, mom, err = _mass_and_moment(f, cfg, method)
    if not mass > 0.0:
        raise DegenerateDensityError("density has no measurable mass")
    c = mom / mass
    cerr = err * (1.0 + float(np.linalg.norm(c))) / mass
    return c, float(cerr)


def recenter(f: LogConcaveFn, cfg: QuadConfig | None = None,
             max_iter: int = 20) -> tuple[LogConcaveFn, dict]:
    """Translate f so its measured barycentre is within 10 * abs_tol of the
    origin.  Grid anchoring makes the second pass cancel exactly, so this
    normally converges after one translation."""
    cfg = cfg or QuadConfig()
    tol = 10.0 * cfg.abs_tol
    shifts = np.zeros(f.n)
    g = f
    for it in range(max_iter + 1):
        c, _ = centroid(g, cfg)
        nrm = float(np.linalg.norm(c))
        if nrm <= tol:
            report = {"iterations": it, "centroid_norm": nrm,
                      "translation": shifts.tolist()}
            return g, report
        if it == max_iter:
            break
        g = g.translate(-c)
        shifts = shifts - c
    raise RecenterError("recentring did not converge", nrm)


def grunbaum_ratio(f: LogConcaveFn, theta, cfg: QuadConfig | None = None
                   ) -> RatioResult:
    """Ray-mass ratio along theta: the mass of the slice through the origin
    on the positive ray over its full-line mass."""
    cfg = cfg or QuadConfig()
    theta = np.asarray(theta, dtype=float).reshape(-1)
    g = take_slice(f, np.zeros(f.n - 1), theta, cfg)
    if g.empty:
        raise AxisSupportError("axis misses support")
    pos, ep = _integrate_slice_err(g, 0.0, np.inf, cfg)
    neg, en = _integrate_slice_err(g, -np.inf, 0.0, cfg)
    tot = pos + neg
    if not tot > 0.0:
        raise AxisSupportError("axis slice has no mass")
    ratio = pos / tot
    err = (neg * ep + pos * en) / (tot * tot)
    return RatioResult(float(ratio), float(pos), float(neg), float(err))


# ---------------------------------------------------------------------------
# Monte Carlo

_CHUNK = 1 << 18


def _mc_cone(rep: ConeExponential, rng, m: int):
    k = rep.n - 1
    s = rng.gamma(shape=k + 1.0, scale=1.0 / 0.9, size=m)
    log_qs = k * np.log(np.maximum(s, 1e-300)) - 0.9 * s \
        + (k + 1.0) * np.log(0.9) - gammaln(k + 1.0)
    radii = 1.1 * s
    if k:
        B = complement_basis(rep.axis)
        z = rng.standard_normal((m, k))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = radii * rng.random(m) ** (1.0 / k)
        perp = (z * r[:, None]) @ B.T
        log_qx = -(k * np.log(radii) + np.log(unit_ball_volume(k)))
    else:
        perp = 0.0
        log_qx = np.zeros(m)
    pts = (rep.vertex + s)[:, None] * rep.axis[None, :] + perp
    return pts, log_qs + log_qx


def _mc_max_affine(rep: MaxAffinePotential, rng, m: int,
                   cfg: QuadConfig):
    x_star = rep.peak_point()
    phi0 = -rep.log_peak()
    n = x_star.size
    sig = np.empty(n)
    for d in range(n):
        e = np.zeros(n)
        e[d] = 1.0

        def level(r, sgn):
            return float(rep.potential((x_star + sgn * r * e)[None, :])[0]
                         - phi0 - 2.0)

        radii = []
        for sgn in (+1.0, -1.0):
            a, b = 0.0, 1.0
            for _ in range(60):
                if level(b, sgn) > 0.0 or b > 1e8:
                    break
                b *= 2.0
            for _ in range(60):
                mid = 0.5 * (a + b)
                if level(mid, sgn) > 0.0:
                    b = mid
                else:
                    a = mid
            radii.append(b)
        sig[d] = 0.75 * max(radii)
    box_lo, box_hi = rep.support_box(cfg.tail_cut)
    vol_box = float(np.prod(box_hi - box_lo))

    pick = rng.random(m) < 0.7
    pts = np.empty((m, n))
    ng = int(np.sum(pick))
    pts[pick] = x_star + rng.standard_normal((ng, n)) * sig
    pts[~pick] = box_lo + rng.random((m - ng, n)) * (box_hi - box_lo)
    d2 = ((pts - x_star) / sig) ** 2
    log_norm = -0.5 * d2.sum(axis=1) - np.log(sig).sum() \
        - 0.5 * n * np.log(2.0 * np.pi)
    log_unif = -np.log(vol_box)
    inside = np.all((pts >= box_lo) & (pts <= box_hi), axis=1)
    comp = np.stack([np.log(0.7) + log_norm,
                     np.where(inside, np.log(0.3) + log_unif, -np.inf)])
    return pts, logsumexp(comp, axis=0)


def _mc_revolution(rep: WeightedRegion, rng, m: int, n: int):
    region, beta = rep.region, rep.beta
    k = n - 1
    if isinstance(region, ConeBody):
        s0 = region.s0

        def rad(t):
            return region.R * (t - s0) / (-s0)
    else:
        s0 = region.s0

        def rad(t):
            return region.radius(t)
    span = (40.0 + 5.0 * k) / (0.95 * beta)
    tg = np.linspace(s0, s0 + span, 4097)
    rr = 1.05 * np.asarray(rad(tg), dtype=float)
    log_i = np.where(rr > 0, k * np.log(np.maximum(rr, 1e-300)), -np.inf) \
        - 0.95 * beta * tg
    dens = np.exp(log_i - np.max(log_i))
    cell = 0.5 * (dens[1:] + dens[:-1])
    cdf = np.concatenate([[0.0], np.cumsum(cell)])
    total = cdf[-1]
    h = tg[1] - tg[0]
    u = rng.random(m) * total
    j = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, cell.size - 1)
    frac = (u - cdf[j]) / np.maximum(cell[j], 1e-300)
    t = tg[j] + np.clip(frac, 0.0, 1.0) * h
    log_qt = np.log(np.maximum(cell[j], 1e-300)) - np.log(total * h)

    radii = 1.05 * np.asarray(rad(t), dtype=float)
    radii = np.maximum(radii, 1e-12)
    z = rng.standard_normal((m, k))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = radii * rng.random(m) ** (1.0 / k)
    pts = np.concatenate([t[:, None], z * r[:, None]], axis=1)
    log_qx = -(k * np.log(radii) + np.log(unit_ball_volume(k)))
    return pts, log_qt + log_qx


def total_mass_mc(f: LogConcaveFn, cfg: QuadConfig | None = None
                  ) -> MassEstimate:
    """Importance-sampling mass estimate; error is one standard error."""
    cfg = cfg or QuadConfig()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        cfg.seed)))
    rep = f.rep
    total = 0.0
    total_sq = 0.0
    count = 0
    remaining = cfg.mc_samples
    while remaining > 0:
        m = min(remaining, _CHUNK)
        if isinstance(rep, ConeExponential):
            pts, log_q = _mc_cone(rep, rng, m)
        elif isinstance(rep, MaxAffinePotential):
            pts, log_q = _mc_max_affine(rep, rng, m, cfg)
        elif isinstance(rep, WeightedRegion) and \
                isinstance(rep.region, (RevolutionBody, ConeBody)):
            pts, log_q = _mc_revolution(rep, rng, m, f.n)
        else:
            raise ValueError("no sampler for this representation")
        logf = f.rep.log_density_batch(pts)
        w = np.exp(np.where(np.isfinite(logf), logf - log_q, -np.inf))
        w = np.where(np.isfinite(w), w, 0.0)
        total += float(np.sum(w))
        total_sq += float(np.sum(w * w))
        count += m
        remaining -= m
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    stderr = np.sqrt(var / count)
    return MassEstimate(float(mean), float(stderr))
