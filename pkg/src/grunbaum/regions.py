"""Support regions for weighted densities.

Three region families appear in the transformation chain: the epigraph of a
convex cutoff profile, a body of revolution with a sampled radius profile,
and an infinite cone.  All live in frame coordinates (x1, x') where x1 runs
along the distinguished axis and x' collects the transverse coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator, RegularGridInterpolator

_INVALID = 1e18


def _concave_interval(qfun, s_min: float, s_max: float,
                      n_scan: int = 257) -> tuple[float, float]:
    """Bracket {q >= 0} for a concave q on [s_min, s_max].

    Concavity means the set is a single interval; a coarse scan finds it and
    bisection sharpens the endpoints.  Returns (lo, hi), lo > hi if empty.
    """
    s = np.linspace(s_min, s_max, n_scan)
    q = qfun(s)
    inside = q >= 0.0
    if not np.any(inside):
        return 1.0, 0.0
    idx = np.flatnonzero(inside)
    i0, i1 = idx[0], idx[-1]
    lo = s[i0]
    if i0 > 0:
        a, b = s[i0 - 1], s[i0]
        for _ in range(60):
            m = 0.5 * (a + b)
            if qfun(np.asarray([m]))[0] >= 0.0:
                b = m
            else:
                a = m
        lo = b
    hi = s[i1]
    if i1 < n_scan - 1:
        a, b = s[i1], s[i1 + 1]
        for _ in range(60):
            m = 0.5 * (a + b)
            if qfun(np.asarray([m]))[0] >= 0.0:
                a = m
            else:
                b = m
        hi = a
    return float(lo), float(hi)


@dataclass(frozen=True)
class PsiProfile:
    """Convex cutoff profile on a transverse grid.

    axes: one increasing coordinate array per transverse dimension.
    values: Psi on the tensor grid; entries >= the invalid sentinel mark
    points outside the working domain.  beta is the axial decay rate of the
    density the profile belongs to.  superlinear records whether the outer
    grid rings still steepen (True) or the growth has gone linear, in which
    case off-grid queries extend with the last chord slope either way.
    """

    axes: tuple
    values: np.ndarray
    beta: float
    superlinear: bool = True

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        object.__setattr__(self, "axes", axes)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != tuple(a.size for a in axes):
            raise ValueError("values shape does not match grid axes")
        object.__setattr__(self, "values", vals)
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def dim(self) -> int:
        return len(self.axes)

    def _interp(self):
        cache = getattr(self, "_interp_cache", None)
        if cache is not None:
            return cache
        if self.dim == 1:
            x = self.axes[0]
            valid = self.values < _INVALID
            runs = _longest_true_run(valid)
            xs, vs = x[runs], self.values[runs]
            if xs.size < 2:
                raise ValueError("profile needs at least two valid nodes")
            pch = PchipInterpolator(xs, vs, extrapolate=False)
            lo, hi = xs[0], xs[-1]
            slo = (vs[1] - vs[0]) / (xs[1] - xs[0])
            shi = (vs[-1] - vs[-2]) / (xs[-1] - xs[-2])

            def f(pts):
                pts = np.asarray(pts, dtype=float).reshape(-1)
                out = pch(np.clip(pts, lo, hi))
                left = pts < lo
                right = pts > hi
                out[left] = vs[0] + slo * (pts[left] - lo)
                out[right] = vs[-1] + shi * (pts[right] - hi)
                return out
        else:
            filled = np.where(self.values < _INVALID, self.values, _INVALID)
            rgi = RegularGridInterpolator(self.axes, filled, method="linear",
                                          bounds_error=False,
                                          fill_value=_INVALID)

            def f(pts):
                return rgi(np.atleast_2d(pts))
        object.__setattr__(self, "_interp_cache", f)
        return f

    def evaluate(self, x_prime) -> np.ndarray:
        """Interpolated Psi at transverse points (m, dim) or (m,) in 1-D."""
        x_prime = np.asarray(x_prime, dtype=float)
        if self.dim == 1:
            return self._interp()(x_prime.reshape(-1))
        return self._interp()(x_prime.reshape(-1, self.dim))

    def min_value(self) -> float:
        return float(np.min(self.values))

    def axis_cutoff(self) -> float:
        """Psi at x' = 0, read from grid nodes when 0 is a node."""
        idx = []
        for a in self.axes:
            j = int(np.argmin(np.abs(a)))
            if abs(a[j]) > 1e-12:
                return float(self.evaluate(np.zeros((1, self.dim)))[0])
            idx.append(j)
        return float(self.values[tuple(idx)])

    def line_interval(self, origin: np.ndarray, direction: np.ndarray,
                      s_min: float, s_max: float) -> tuple[float, float]:
        """Parameter interval of {x1 >= Psi(x')} along origin + s*direction."""
        o1, op = origin[0], origin[1:]
        u1, up = direction[0], direction[1:]
        if np.linalg.norm(up) < 1e-14:
            val = float(self.evaluate(op.reshape(1, -1))[0])
            if val >= _INVALID:
                return 1.0, 0.0
            if u1 > 0:
                return max(s_min, (val - o1) / u1), s_max
            if u1 < 0:
                return s_min, min(s_max, (val - o1) / u1)
            return (s_min, s_max) if o1 >= val else (1.0, 0.0)

        def q(s):
            pts = op[None, :] + s[:, None] * up[None, :]
            psi = self.evaluate(pts)
            return (o1 + s * u1) - psi

        return _concave_interval(q, s_min, s_max)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        psi = self.evaluate(pts[:, 1:])
        return (psi < _INVALID) & (pts[:, 0] >= psi)


def _longest_true_run(mask: np.ndarray) -> slice:
    best = slice(0, 0)
    start = None
    for i, m in enumerate(list(mask) + [False]):
        if m and start is None:
            start = i
        elif not m and start is not None:
            if i - start > best.stop - best.start:
                best = slice(start, i)
            start = None
    return best


@dataclass(frozen=True)
class RevolutionBody:
    """Axially symmetric convex region with a sampled radius profile.

    The radius rho is nondecreasing and concave with rho(s0) = 0; beyond the
    last node it extends with the final chord slope.  t_nodes need not be
    uniform (the apex region benefits from a graded grid).
    """

    s0: float
    t_nodes: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_nodes, dtype=float)
        r = np.asarray(self.rho, dtype=float)
        if t.ndim != 1 or t.shape != r.shape or t.size < 2:
            raise ValueError("need matching 1-D node and radius arrays")
        if abs(t[0] - self.s0) > 1e-9 * max(1.0, abs(self.s0)):
            raise ValueError("first node must sit at s0")
        if abs(r[0]) > 1e-7 * max(1.0, float(np.max(r))):
            raise ValueError("radius at the apex must vanish")
        if np.any(np.diff(t) <= 0):
            raise ValueError("nodes must increase")
        if np.any(r < -1e-12):
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "t_nodes", t)
        object.__setattr__(self, "rho", np.maximum(r, 0.0))

    @property
    def t_max(self) -> float:
        return float(self.t_nodes[-1])

    def _interp(self):
        cache = getattr(self, "_interp_cache", None)
        if cache is None:
            cache = PchipInterpolator(self.t_nodes, self.rho,
                                      extrapolate=False)
            object.__setattr__(self, "_interp_cache", cache)
        return cache

    def radius(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        tn, r = self.t_nodes, self.rho
        out = self._interp()(np.clip(t, tn[0], tn[-1]))
        slope_end = (r[-1] - r[-2]) / (tn[-1] - tn[-2])
        out = np.where(t > tn[-1], r[-1] + slope_end * (t - tn[-1]), out)
        return np.where(t < self.s0, 0.0, np.maximum(out, 0.0))

    def translate_axial(self, delta: float) -> "RevolutionBody":
        return RevolutionBody(self.s0 + delta, self.t_nodes + delta, self.rho)

    def validate_shape(self, tol: float = 1e-6) -> dict:
        """Midpoint checks: nondecreasing and concave radius profile."""
        t, r = self.t_nodes, self.rho
        scale = max(float(np.max(r)), 1e-30)
        mono = float(np.min(np.diff(r))) / scale
        lam = (t[1:-1] - t[:-2]) / (t[2:] - t[:-2])
        chord = (1 - lam) * r[:-2] + lam * r[2:]
        conc = float(np.min(r[1:-1] - chord)) / scale
        return {"nondecreasing": mono >= -tol, "concave": conc >= -tol,
                "min_increment": mono, "min_concavity_gap": conc}

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        rad = np.linalg.norm(pts[:, 1:], axis=1)
        return (pts[:, 0] >= self.s0) & (rad <= self.radius(pts[:, 0]))

    def line_interval(self, origin: np.ndarray, direction: np.ndarray,
                      s_min: float, s_max: float) -> tuple[float, float]:
        o1, op = origin[0], origin[1:]
        u1, up = direction[0], direction[1:]

        def q(s):
            t = o1 + s * u1
            pts = op[None, :] + s[:, None] * up[None, :]
            rad = np.linalg.norm(pts, axis=1)
            return np.where(t >= self.s0, self.radius(t) - rad, -1.0)

        return _concave_interval(q, s_min, s_max)


@dataclass(frozen=True)
class ConeBody:
    """Infinite cone along the axis: vertex at abscissa s0 < 0, base radius
    R in the transverse hyperplane through 0, so r(t) = R(t - s0)/(-s0)."""

    s0: float
    R: float
    n: int

    def __post_init__(self):
        if not self.s0 < 0:
            raise ValueError("vertex abscissa must be negative")
        if not self.R > 0:
            raise ValueError("base radius must be positive")
        if self.n < 1:
            raise ValueError("dimension must be >= 1")

    def radius(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t >= self.s0, self.R * (t - self.s0) / (-self.s0),
                        0.0)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        rad = np.linalg.norm(pts[:, 1:], axis=1)
        return (pts[:, 0] >= self.s0) & (rad <= self.radius(pts[:, 0]))

    def line_interval(self, origin: np.ndarray, direction: np.ndarray,
                      s_min: float, s_max: float) -> tuple[float, float]:
        o1, op = origin[0], origin[1:]
        u1, up = direction[0], direction[1:]
        k = self.R / (-self.s0)

        def q(s):
            t = o1 + s * u1
            pts = op[None, :] + s[:, None] * up[None, :]
            rad = np.linalg.norm(pts, axis=1)
            return np.where(t >= self.s0, k * (t - self.s0) - rad, -1.0)

        return _concave_interval(q, s_min, s_max)
