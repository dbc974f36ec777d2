"""Directions, orthonormal frames of a hyperplane, and ball volumes.

Every transverse grid in the toolkit is expressed in an orthonormal basis of
theta-perp.  The basis is built deterministically (Gram-Schmidt on the
standard basis with the largest-|theta_i| coordinate dropped, lowest index on
ties) so that grids, and therefore reports, are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class Direction:
    """A unit vector in R^n.  The norm must equal 1 within 1e-12."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).reshape(-1)
        if c.size < 1:
            raise ValueError("direction needs dimension >= 1")
        nrm = float(np.linalg.norm(c))
        if abs(nrm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"direction norm {nrm!r} deviates from 1 by more "
                             f"than {UNIT_NORM_TOL}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return int(self.coords.size)

    @classmethod
    def normalized(cls, coords) -> "Direction":
        c = np.asarray(coords, dtype=float).reshape(-1)
        nrm = float(np.linalg.norm(c))
        if nrm == 0.0 or not math.isfinite(nrm):
            raise ValueError("cannot normalize a zero or non-finite vector")
        return cls(c / nrm)

    @classmethod
    def axis(cls, n: int, index: int = 0) -> "Direction":
        c = np.zeros(n)
        c[index] = 1.0
        return cls(c)


def complement_basis(theta) -> np.ndarray:
    """Orthonormal basis of theta-perp as columns of an (n, n-1) matrix.

    Accepts a Direction or a plain unit vector.  Gram-Schmidt on the
    standard basis vectors, in index order, after dropping the coordinate
    where |theta_i| is largest (lowest index wins a tie, which np.argmax
    guarantees).
    """
    t = theta.coords if isinstance(theta, Direction) else \
        np.asarray(theta, dtype=float).reshape(-1)
    nrm = float(np.linalg.norm(t))
    if abs(nrm - 1.0) > UNIT_NORM_TOL:
        raise ValueError("complement_basis needs a unit vector")
    n = t.size
    drop = int(np.argmax(np.abs(t)))
    basis = [t]
    cols = []
    for i in range(n):
        if i == drop:
            continue
        v = np.zeros(n)
        v[i] = 1.0
        for b in basis:
            v = v - np.dot(v, b) * b
        nrm = np.linalg.norm(v)
        v = v / nrm
        basis.append(v)
        cols.append(v)
    if not cols:
        return np.zeros((n, 0))
    return np.column_stack(cols)


def embed_slice_point(theta: Direction, basis: np.ndarray,
                      x_prime, s) -> np.ndarray:
    """Map slice coordinates (x', s) to the ambient point x' . basis + s theta."""
    xp = np.atleast_1d(np.asarray(x_prime, dtype=float))
    return basis @ xp + np.asarray(s, dtype=float) * theta.coords


def unit_ball_volume(k: int) -> float:
    """Volume of the unit k-ball, pi^(k/2) / Gamma(k/2 + 1).  k = 0 gives 1."""
    if k < 0:
        raise ValueError("ball dimension must be >= 0")
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)


def random_direction(n: int, rng: np.random.Generator) -> Direction:
    """Uniform direction on S^(n-1) by normalized Gaussian sampling."""
    while True:
        g = rng.standard_normal(n)
        nrm = np.linalg.norm(g)
        if nrm > 1e-12:
            return Direction(g / nrm)
