"""Seeded families of random log-concave densities for stress tests.

Kinds:
  * "max_affine": piecewise-affine potential plus a strong quadratic term,
    smooth bowl with kinks, full-space support;
  * "polytope_exponential": near-linear potential restricted to a bounded
    random polytope, exercising hard support boundaries;
  * "gaussian_mix_potential": gentle facets under a dominant quadratic,
    close to an anisotropic Gaussian.

Identical (n, kind, seed) always reproduce the same density bitwise.
"""

from __future__ import annotations

import numpy as np

from .density import LogConcaveFn, MaxAffinePotential

KINDS = ("max_affine", "polytope_exponential", "gaussian_mix_potential")


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _translation(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(-2.0, 2.0, size=n)


def random_logconcave(n: int, kind: str = "max_affine",
                      seed=0) -> LogConcaveFn:
    """A random log-concave density on R^n of the given kind."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if kind not in KINDS:
        raise ValueError("unknown kind: %r (choose from %s)"
                         % (kind, ", ".join(KINDS)))
    rng = _rng(seed)
    if kind == "max_affine":
        m = int(rng.integers(4, 9))
        slopes = [rng.normal(0.0, 1.5, size=n) for _ in range(m)]
        offsets = [float(rng.uniform(-1.0, 1.0)) for _ in range(m)]
        for d in range(n):
            scale = float(rng.uniform(0.5, 2.0))
            for sgn in (1.0, -1.0):
                e = np.zeros(n)
                e[d] = sgn * scale
                slopes.append(e)
                offsets.append(float(rng.uniform(-1.0, 1.0)))
        # Weak curvature keeps n <= 2 interesting; n = 3 needs enough to
        # hold the support box small for tensor grids.
        if n <= 2:
            eps = float(10.0 ** rng.uniform(-3.0, -0.5))
        else:
            eps = float(rng.uniform(0.15, 0.6))
        rep = MaxAffinePotential(np.array(slopes), np.array(offsets),
                                 epsilon=eps)
    elif kind == "polytope_exponential":
        m = int(rng.integers(1, 4))
        slopes = [rng.normal(0.0, 0.8, size=n) for _ in range(m)]
        offsets = [float(rng.uniform(-0.5, 0.5)) for _ in range(m)]
        normals = []
        poly_offsets = []
        for d in range(n):
            for sgn in (1.0, -1.0):
                e = np.zeros(n)
                e[d] = sgn
                normals.append(e)
                poly_offsets.append(float(rng.uniform(1.0, 3.0)))
        for _ in range(int(rng.integers(2, 6))):
            v = rng.normal(size=n)
            normals.append(v / np.linalg.norm(v))
            poly_offsets.append(float(rng.uniform(0.8, 2.5)))
        rep = MaxAffinePotential(np.array(slopes), np.array(offsets),
                                 epsilon=float(rng.uniform(0.0, 0.08)),
                                 poly_normals=np.array(normals),
                                 poly_offsets=np.array(poly_offsets))
    else:
        m = int(rng.integers(3, 7))
        slopes = [rng.normal(0.0, 0.6, size=n) for _ in range(m)]
        offsets = [float(rng.uniform(-0.5, 0.5)) for _ in range(m)]
        rep = MaxAffinePotential(np.array(slopes), np.array(offsets),
                                 epsilon=float(rng.uniform(0.3, 0.9)))
    return LogConcaveFn(n, rep, translation=_translation(rng, n))
