"""Log-concave density representations.

Every density is exp(-phi) with phi convex, possibly cut off by a support
region.  Three representations cover the toolkit's needs:

  MaxAffinePotential   phi = max of affine pieces + eps*|x|^2, optionally
                       restricted to a polytope.  The eps regularizer makes
                       the potential strictly convex and super-exponentially
                       decaying, which the construction's uniqueness and
                       tail arguments rely on.
  ConeExponential      the sharp-constant family: exp(-x1) on the aperture-1
                       cone with vertex (v, 0, ..., 0).
  WeightedRegion       exp(w0 + <ell, x'> - beta*x1) on an epigraph,
                       revolution body, or cone; the intermediate objects of
                       the transformation chain live here.

A LogConcaveFn wraps a representation with a dimension and a translation
offset, so recentering never perturbs the representation's own geometry:
every integration grid anchors to representation coordinates and results
are shifted afterwards, making translation equivariance exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DegenerateDensityError, DimensionMismatchError
from .regions import ConeBody, PsiProfile, RevolutionBody, _INVALID

_BOX_MARGIN = 2.0
_HUGE = np.inf


def _as_2d(x, n: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.shape[1] != n:
        raise DimensionMismatchError(
            f"points have dimension {pts.shape[1]}, expected {n}")
    return pts


@dataclass(frozen=True)
class LineParams:
    """Restriction data of a density to the lines origin_i + s*u.

    lo/hi bracket the hard support (entries +-inf when the support is not
    cut in that direction).  When the log-profile is exactly linear in s,
    exp_log_h and exp_rate hold log g(0) and the decay rate, enabling
    closed-form masses and moments.
    """

    lo: np.ndarray
    hi: np.ndarray
    exp_log_h: np.ndarray | None = None
    exp_rate: np.ndarray | None = None

    @property
    def exact(self) -> bool:
        return self.exp_log_h is not None


class MaxAffinePotential:
    """phi(x) = max_j (<a_j, x> + b_j) + eps*|x|^2 on an optional polytope."""

    kind = "max_affine"

    def __init__(self, slopes, offsets, epsilon=1e-3,
                 poly_normals=None, poly_offsets=None):
        self.slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        self.offsets = np.asarray(offsets, dtype=float).reshape(-1)
        if self.slopes.shape[0] != self.offsets.size:
            raise ValueError("one offset per affine piece required")
        self.epsilon = float(epsilon)
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if poly_normals is None:
            self.poly_normals = None
            self.poly_offsets = None
        else:
            self.poly_normals = np.atleast_2d(
                np.asarray(poly_normals, dtype=float))
            self.poly_offsets = np.asarray(
                poly_offsets, dtype=float).reshape(-1)
            if self.poly_normals.shape[0] != self.poly_offsets.size:
                raise ValueError("one offset per polytope facet required")
        self._box_cache: dict = {}

    @property
    def n(self) -> int:
        return self.slopes.shape[1]

    def potential(self, X: np.ndarray) -> np.ndarray:
        val = np.max(X @ self.slopes.T + self.offsets, axis=1)
        if self.epsilon > 0:
            val = val + self.epsilon * np.sum(X * X, axis=1)
        return val

    def log_density_batch(self, X: np.ndarray) -> np.ndarray:
        out = -self.potential(X)
        if self.poly_normals is not None:
            slack = self.poly_offsets - X @ self.poly_normals.T
            out = np.where(np.all(slack >= -1e-12, axis=1), out, -np.inf)
        return out

    def line_params(self, origins: np.ndarray, u: np.ndarray) -> LineParams:
        m = origins.shape[0]
        lo = np.full(m, -_HUGE)
        hi = np.full(m, _HUGE)
        if self.poly_normals is not None:
            alpha = self.poly_normals @ u
            beta = self.poly_offsets - origins @ self.poly_normals.T
            for j in range(alpha.size):
                a = alpha[j]
                if a > 1e-14:
                    hi = np.minimum(hi, beta[:, j] / a)
                elif a < -1e-14:
                    lo = np.maximum(lo, beta[:, j] / a)
                else:
                    dead = beta[:, j] < -1e-12
                    lo = np.where(dead, 1.0, lo)
                    hi = np.where(dead, 0.0, hi)
        return LineParams(lo, hi)

    def _min_potential(self):
        """Minimize the convex potential; returns (x*, phi*)."""
        key = "min"
        if key in self._box_cache:
            return self._box_cache[key]
        n = self.n
        if self.poly_normals is not None:
            # Chebyshev center gives a strictly interior, deterministic start.
            norms = np.linalg.norm(self.poly_normals, axis=1)
            res = optimize.linprog(
                np.concatenate([np.zeros(n), [-1.0]]),
                A_ub=np.hstack([self.poly_normals, norms[:, None]]),
                b_ub=self.poly_offsets,
                bounds=[(None, None)] * n + [(0, None)],
                method="highs")
            if not res.success or res.x[n] <= 0:
                raise DegenerateDensityError("empty support polytope")
            x_start = res.x[:n]
        else:
            x_start = np.zeros(n)

        def objective(z):
            x, t = z[:n], z[n]
            return t + self.epsilon * float(x @ x)

        def objective_grad(z):
            g = np.zeros(n + 1)
            g[:n] = 2 * self.epsilon * z[:n]
            g[n] = 1.0
            return g

        cons = [{"type": "ineq",
                 "fun": lambda z, a=a, b=b: z[self.n] - (a @ z[:self.n]) - b,
                 "jac": lambda z, a=a: np.concatenate([-a, [1.0]])}
                for a, b in zip(self.slopes, self.offsets)]
        if self.poly_normals is not None:
            cons += [{"type": "ineq",
                      "fun": lambda z, c=c, d=d: d - (c @ z[:self.n]),
                      "jac": lambda z, c=c: np.concatenate([-c, [0.0]])}
                     for c, d in zip(self.poly_normals, self.poly_offsets)]
        t_start = float(np.max(self.slopes @ x_start + self.offsets))
        res = optimize.minimize(objective, np.concatenate([x_start,
                                                           [t_start]]),
                                jac=objective_grad, constraints=cons,
                                method="SLSQP",
                                options={"maxiter": 400, "ftol": 1e-14})
        x_min = res.x[:n]
        if np.linalg.norm(x_min) > 1e6:
            raise DegenerateDensityError("potential is not coercive")
        phi_min = float(self.potential(x_min[None, :])[0])
        self._box_cache[key] = (x_min, phi_min)
        return x_min, phi_min

    def support_box(self, tail_cut: float) -> tuple[np.ndarray, np.ndarray]:
        """Axis box containing {phi <= phi* + log(1/tail_cut)}.

        The max-affine level set is exactly a polyhedron, probed by LPs; for
        eps > 0 strong convexity adds the ball bound phi(x) >= phi* +
        eps*|x - x*|^2, which covers pieces the LPs leave unbounded.
        """
        key = ("box", float(tail_cut))
        if key in self._box_cache:
            return self._box_cache[key]
        x_min, phi_min = self._min_potential()
        level = phi_min + np.log(1.0 / tail_cut) + _BOX_MARGIN
        n = self.n
        a_ub = [self.slopes]
        b_ub = [level - self.offsets]
        if self.poly_normals is not None:
            a_ub.append(self.poly_normals)
            b_ub.append(self.poly_offsets)
        a_ub = np.vstack(a_ub)
        b_ub = np.concatenate(b_ub)
        if self.epsilon > 0:
            r_ball = np.sqrt(max(level - phi_min, 0.0) / self.epsilon)
            ball_lo = x_min - r_ball
            ball_hi = x_min + r_ball
        else:
            ball_lo = np.full(n, -_HUGE)
            ball_hi = np.full(n, _HUGE)
        lo = np.empty(n)
        hi = np.empty(n)
        for d in range(n):
            c = np.zeros(n)
            c[d] = 1.0
            for sign, target in ((1.0, lo), (-1.0, hi)):
                res = optimize.linprog(sign * c, A_ub=a_ub, b_ub=b_ub,
                                       bounds=[(None, None)] * n,
                                       method="highs")
                if res.success:
                    target[d] = sign * res.fun
                elif res.status == 3:
                    target[d] = -_HUGE if sign > 0 else _HUGE
                else:
                    raise DegenerateDensityError(
                        "support probing failed: " + str(res.message))
        lo = np.maximum(lo, ball_lo)
        hi = np.minimum(hi, ball_hi)
        if not np.all(np.isfinite(lo) & np.isfinite(hi)):
            raise DegenerateDensityError(
                "effective support is unbounded; density not integrable")
        self._box_cache[key] = (lo, hi)
        return lo, hi

    def log_peak(self) -> float:
        return -self._min_potential()[1]

    def peak_point(self) -> np.ndarray:
        return self._min_potential()[0]

    def to_dict(self) -> dict:
        rep = {"kind": self.kind,
               "slopes": self.slopes.tolist(),
               "offsets": self.offsets.tolist(),
               "epsilon": self.epsilon}
        if self.poly_normals is not None:
            rep["poly_normals"] = self.poly_normals.tolist()
            rep["poly_offsets"] = self.poly_offsets.tolist()
        return rep


class ConeExponential:
    """exp(-<x, axis>) on the aperture-1 cone with vertex at abscissa v."""

    kind = "cone_exponential"

    def __init__(self, n: int, vertex: float | None = None, axis=None):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self._n = n
        self.vertex = float(-n if vertex is None else vertex)
        if axis is None:
            axis = np.zeros(n)
            axis[0] = 1.0
        axis = np.asarray(axis, dtype=float).reshape(-1)
        if axis.size != n:
            raise DimensionMismatchError("axis dimension mismatch")
        nrm = np.linalg.norm(axis)
        if abs(nrm - 1.0) > 1e-9:
            raise ValueError("axis must be a unit vector")
        self.axis = axis / nrm

    @property
    def n(self) -> int:
        return self._n

    def log_density_batch(self, X: np.ndarray) -> np.ndarray:
        t = X @ self.axis
        r2 = np.sum(X * X, axis=1) - t * t
        inside = (t >= self.vertex - 1e-12) & \
            (r2 <= (t - self.vertex) ** 2 + 1e-12)
        return np.where(inside, -t, -np.inf)

    def line_params(self, origins: np.ndarray, u: np.ndarray) -> LineParams:
        v = self.vertex
        t0 = origins @ self.axis
        ua = float(u @ self.axis)
        w0 = origins - t0[:, None] * self.axis[None, :]
        wu = u - ua * self.axis
        A = float(wu @ wu) - ua * ua
        B = 2.0 * (w0 @ wu) - 2.0 * (t0 - v) * ua
        C = np.sum(w0 * w0, axis=1) - (t0 - v) ** 2

        m = origins.shape[0]
        bp = np.full((m, 3), _HUGE)
        if abs(A) > 1e-13:
            disc = B * B - 4.0 * A * C
            has = disc >= 0
            sq = np.sqrt(np.maximum(disc, 0.0))
            bp[has, 0] = (-B[has] - sq[has]) / (2 * A)
            bp[has, 1] = (-B[has] + sq[has]) / (2 * A)
        else:
            nz = np.abs(B) > 1e-13
            bp[nz, 0] = -C[nz] / B[nz]
        if abs(ua) > 1e-13:
            bp[:, 2] = (v - t0) / ua
        bp = np.sort(bp, axis=1)

        # Probe the midpoint of every real segment between breakpoints; the
        # cone is convex so the inside segments form one contiguous run.
        finite_bp = bp[np.isfinite(bp)]
        far = 10.0 * (1.0 + (np.max(np.abs(finite_bp))
                             if finite_bp.size else 1.0))
        seg_lo = np.column_stack([np.full(m, -_HUGE), bp])
        seg_hi = np.column_stack([bp, np.full(m, _HUGE)])
        valid = seg_lo < seg_hi
        probes = 0.5 * (np.maximum(seg_lo, -far) + np.minimum(seg_hi, far))
        probes = np.where(valid, probes, 0.0)
        pts = (origins[:, None, :]
               + probes[:, :, None] * u[None, None, :]).reshape(-1, self._n)
        ok = np.isfinite(self.log_density_batch(pts)).reshape(m, 4) & valid

        lo = np.full(m, _HUGE)
        hi = np.full(m, -_HUGE)
        for j in range(4):
            sel = ok[:, j]
            lo[sel] = np.minimum(lo[sel], seg_lo[sel, j])
            hi[sel] = np.maximum(hi[sel], seg_hi[sel, j])
        empty = ~np.any(ok, axis=1)
        lo[empty], hi[empty] = 1.0, 0.0
        return LineParams(lo, hi, exp_log_h=-t0, exp_rate=np.full(m, ua))

    def support_box(self, tail_cut: float) -> tuple[np.ndarray, np.ndarray]:
        span = np.log(1.0 / tail_cut) + _BOX_MARGIN
        t_lo, t_hi = self.vertex, self.vertex + span
        ax_lo = np.minimum(t_lo * self.axis, t_hi * self.axis)
        ax_hi = np.maximum(t_lo * self.axis, t_hi * self.axis)
        return ax_lo - span, ax_hi + span

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self._n, "vertex": self.vertex,
                "axis": self.axis.tolist()}


class WeightedRegion:
    """exp(w0 + <ell, x'> - beta*x1) restricted to a support region."""

    kind = "weighted_region"

    def __init__(self, region, beta: float, ell=None, log_height: float = 0.0):
        self.region = region
        self.beta = float(beta)
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if ell is None:
            if isinstance(region, PsiProfile):
                ell = np.zeros(region.dim)
            elif isinstance(region, ConeBody):
                ell = np.zeros(region.n - 1)
            else:
                raise TypeError("a RevolutionBody region does not know its "
                                "ambient dimension; pass ell explicitly or "
                                "use WeightedRegion.on_revolution")
        self.ell = np.asarray(ell, dtype=float).reshape(-1)
        if isinstance(region, PsiProfile) and self.ell.size != region.dim:
            raise DimensionMismatchError("ell dimension mismatch")
        if isinstance(region, ConeBody) and self.ell.size != region.n - 1:
            raise DimensionMismatchError("ell dimension mismatch")
        self.log_height = float(log_height)

    @classmethod
    def on_revolution(cls, body: RevolutionBody, n: int, beta: float,
                      log_height: float = 0.0) -> "WeightedRegion":
        return cls(body, beta, np.zeros(n - 1), log_height)

    @property
    def n(self) -> int:
        return self.ell.size + 1

    def log_weight(self, X: np.ndarray) -> np.ndarray:
        return self.log_height + X[:, 1:] @ self.ell - self.beta * X[:, 0]

    def log_density_batch(self, X: np.ndarray) -> np.ndarray:
        inside = self.region.contains(X)
        return np.where(inside, self.log_weight(X), -np.inf)

    def line_params(self, origins: np.ndarray, u: np.ndarray) -> LineParams:
        m = origins.shape[0]
        log_h = self.log_weight(origins)
        rate = self.beta * u[0] - float(self.ell @ u[1:])
        rates = np.full(m, rate)
        if isinstance(self.region, PsiProfile) and abs(u[0] - 1.0) < 1e-13 \
                and np.max(np.abs(u[1:])) < 1e-13:
            psi = self.region.evaluate(origins[:, 1:])
            lo = psi - origins[:, 0]
            hi = np.full(m, _HUGE)
            dead = psi >= _INVALID
            lo[dead], hi[dead] = 1.0, 0.0
            return LineParams(lo, hi, exp_log_h=log_h, exp_rate=rates)
        blo, bhi = self.support_box(1e-18)
        span = float(np.max(bhi - blo))
        smax = 2.0 * span + 10.0
        lo = np.empty(m)
        hi = np.empty(m)
        for i in range(m):
            lo[i], hi[i] = self.region.line_interval(origins[i], u,
                                                     -smax, smax)
        return LineParams(lo, hi, exp_log_h=log_h, exp_rate=rates)

    def support_box(self, tail_cut: float) -> tuple[np.ndarray, np.ndarray]:
        span = np.log(1.0 / tail_cut) + _BOX_MARGIN
        n = self.n
        if isinstance(self.region, PsiProfile):
            t_lo = self.region.min_value()
            widths = np.array([max(abs(a[0]), abs(a[-1]))
                               for a in self.region.axes])
            tilt = float(np.abs(self.ell) @ widths)
            t_hi = t_lo + (span + 2.0 * tilt) / self.beta
            lo = np.concatenate([[t_lo], -widths])
            hi = np.concatenate([[t_hi], widths])
            return lo, hi
        if isinstance(self.region, RevolutionBody):
            t_lo = self.region.s0
            t_hi = max(self.region.t_max, t_lo) + span / self.beta
            r = float(np.max(self.region.radius(
                np.linspace(t_lo, t_hi, 64))))
        else:
            t_lo = self.region.s0
            t_hi = t_lo + (span + (n - 1) * 10.0) / self.beta
            r = float(self.region.radius(np.asarray([t_hi]))[0])
        lo = np.concatenate([[t_lo], np.full(n - 1, -r)])
        hi = np.concatenate([[t_hi], np.full(n - 1, r)])
        return lo, hi

    def to_dict(self) -> dict:
        region = self.region
        if isinstance(region, PsiProfile):
            reg = {"kind": "psi_epigraph",
                   "axes": [a.tolist() for a in region.axes],
                   "values": region.values.tolist(),
                   "superlinear": region.superlinear}
        elif isinstance(region, RevolutionBody):
            reg = {"kind": "revolution", "s0": region.s0,
                   "t_nodes": region.t_nodes.tolist(),
                   "rho": region.rho.tolist()}
        else:
            reg = {"kind": "cone", "s0": region.s0, "R": region.R,
                   "n": region.n}
        return {"kind": self.kind, "beta": self.beta,
                "ell": self.ell.tolist(), "log_height": self.log_height,
                "region": reg}


@dataclass(frozen=True)
class LogConcaveFn:
    """A representation plus dimension and translation offset."""

    n: int
    rep: object
    translation: np.ndarray = None

    def __post_init__(self):
        t = self.translation
        t = np.zeros(self.n) if t is None else \
            np.asarray(t, dtype=float).reshape(-1)
        if t.size != self.n:
            raise DimensionMismatchError("translation dimension mismatch")
        rep_n = getattr(self.rep, "n", self.n)
        if rep_n != self.n:
            raise DimensionMismatchError(
                f"representation dimension {rep_n} != {self.n}")
        object.__setattr__(self, "translation", t)

    def log_evaluate_batch(self, X) -> np.ndarray:
        pts = _as_2d(X, self.n)
        return self.rep.log_density_batch(pts - self.translation)

    def evaluate(self, x) -> float:
        return float(np.exp(self.log_evaluate_batch(x)[0]))

    def evaluate_batch(self, X) -> np.ndarray:
        return np.exp(self.log_evaluate_batch(X))

    def translate(self, v) -> "LogConcaveFn":
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != self.n:
            raise DimensionMismatchError("translation dimension mismatch")
        return LogConcaveFn(self.n, self.rep, self.translation + v)

    def support_box(self, tail_cut: float) -> tuple[np.ndarray, np.ndarray]:
        """Ambient-coordinate box around the effective support."""
        lo, hi = self.rep.support_box(tail_cut)
        return lo + self.translation, hi + self.translation

    def to_json(self) -> str:
        doc = {"n": self.n, "rep": self.rep.to_dict(),
               "translation": self.translation.tolist()}
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "LogConcaveFn":
        doc = json.loads(text)
        return LogConcaveFn(int(doc["n"]), _rep_from_dict(doc["rep"]),
                            np.asarray(doc.get("translation", []))
                            if doc.get("translation") else None)


def _rep_from_dict(rep: dict):
    kind = rep.get("kind")
    if kind == "max_affine":
        return MaxAffinePotential(rep["slopes"], rep["offsets"],
                                  rep.get("epsilon", 1e-3),
                                  rep.get("poly_normals"),
                                  rep.get("poly_offsets"))
    if kind == "cone_exponential":
        return ConeExponential(int(rep["n"]), rep.get("vertex"),
                               rep.get("axis"))
    if kind == "weighted_region":
        reg = rep["region"]
        rkind = reg.get("kind")
        if rkind == "psi_epigraph":
            region = PsiProfile(tuple(np.asarray(a) for a in reg["axes"]),
                                np.asarray(reg["values"]), rep["beta"],
                                reg.get("superlinear", True))
            return WeightedRegion(region, rep["beta"], rep["ell"],
                                  rep["log_height"])
        if rkind == "revolution":
            body = RevolutionBody(reg["s0"], np.asarray(reg["t_nodes"]),
                                  np.asarray(reg["rho"]))
            return WeightedRegion.on_revolution(
                body, len(rep["ell"]) + 1, rep["beta"], rep["log_height"])
        if rkind == "cone":
            region = ConeBody(reg["s0"], reg["R"], int(reg["n"]))
            return WeightedRegion(region, rep["beta"], rep["ell"],
                                  rep["log_height"])
        raise ValueError(f"unknown region kind: {rkind!r}")
    raise ValueError(f"unknown representation kind: {kind!r}")


def midpoint_logconcavity(f: LogConcaveFn, rng: np.random.Generator,
                          n_pairs: int = 1000,
                          tol: float = 1e-9) -> tuple[bool, float]:
    """Sampled midpoint test: f((x+y)/2)^2 >= f(x) f(y) - tol*scale.

    scale is max(f(x), f(y))^2 per pair.  Returns (all pass, worst margin),
    the margin normalized by scale.
    """
    lo, hi = f.support_box(1e-16)
    X = rng.uniform(lo, hi, size=(n_pairs, f.n))
    Y = rng.uniform(lo, hi, size=(n_pairs, f.n))
    fx = f.evaluate_batch(X)
    fy = f.evaluate_batch(Y)
    fm = f.evaluate_batch(0.5 * (X + Y))
    scale = np.maximum(fx, fy) ** 2
    keep = scale > 0
    if not np.any(keep):
        return True, 0.0
    margin = (fm[keep] ** 2 - fx[keep] * fy[keep]) / scale[keep]
    worst = float(np.min(margin))
    return worst >= -tol, worst
