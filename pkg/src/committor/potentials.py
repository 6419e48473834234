"""Potential energy landscapes and the metastable-region geometry.

Every potential exposes an analytic gradient; finite differences are only
used in tests to cross-check it.  Points are row vectors: ``x`` may be a
single ``(d,)`` vector or an ``(n, d)`` batch, and outputs follow suit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DoubleWell",
    "QuadraticBowl",
    "RuggedMuller",
    "CustomPotential",
    "MULLER_PARAMS",
    "make_potential",
    "register_potential",
    "Membership",
    "Ball",
    "HalfSpace",
    "membership",
    "signed_distance",
    "contains",
    "regions_disjoint",
    "check_gradient",
]


def _as_batch(x, dimension):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dimension:
        raise ValueError(
            f"expected points of dimension {dimension}, got array of shape {x.shape}"
        )
    return x, single


class Potential:
    """Base class: an energy U(x) with analytic gradient on R^d."""

    dimension: int

    def energy(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.energy(x)


@dataclass(frozen=True)
class DoubleWell(Potential):
    """(x1^2 - 1)^2 plus a quadratic restraint on the remaining coordinates.

    Two wells at x1 = +/-1 separated by a barrier of height 1 at x1 = 0.
    """

    dimension: int
    transverse_stiffness: float = 0.3

    def energy(self, x):
        x, single = _as_batch(x, self.dimension)
        x1 = x[:, 0]
        u = (x1 * x1 - 1.0) ** 2 + self.transverse_stiffness * np.sum(
            x[:, 1:] ** 2, axis=1
        )
        return u[0] if single else u

    def gradient(self, x):
        x, single = _as_batch(x, self.dimension)
        g = np.empty_like(x)
        x1 = x[:, 0]
        g[:, 0] = 4.0 * x1 * (x1 * x1 - 1.0)
        g[:, 1:] = 2.0 * self.transverse_stiffness * x[:, 1:]
        return g[0] if single else g


@dataclass(frozen=True)
class QuadraticBowl(Potential):
    """Isotropic quadratic confinement strength * |x|^2."""

    dimension: int
    strength: float = 10.0

    def energy(self, x):
        x, single = _as_batch(x, self.dimension)
        u = self.strength * np.sum(x * x, axis=1)
        return u[0] if single else u

    def gradient(self, x):
        x, single = _as_batch(x, self.dimension)
        g = 2.0 * self.strength * x
        return g[0] if single else g


#: Four-component Gaussian constants of the Muller surface, one tuple per list.
MULLER_PARAMS = {
    "a": (-1.0, -1.0, -6.5, 0.7),
    "b": (0.0, 0.0, 11.0, 0.6),
    "c": (-10.0, -10.0, -6.5, 0.7),
    "D": (-200.0, -100.0, -170.0, 15.0),
    "X": (1.0, 0.0, -0.5, -1.0),
    "Y": (0.0, 0.5, 1.5, 1.0),
}


@dataclass(frozen=True)
class RuggedMuller(Potential):
    """Muller surface in (x1, x2) plus a sinusoidal perturbation and a
    quadratic well of stiffness 1/(2 sigma^2) in coordinates 3..d.

    ``roughness`` and ``wavenumber`` control the perturbation
    roughness * sin(2 pi k x1) * sin(2 pi k x2); roughness 0 recovers the
    plain Muller surface.
    """

    dimension: int = 2
    roughness: float = 9.0
    wavenumber: float = 5.0
    sigma: float = 0.05

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("RuggedMuller requires dimension >= 2")

    def _gaussian_terms(self, x1, x2):
        p = MULLER_PARAMS
        terms = []
        for i in range(4):
            dx = x1 - p["X"][i]
            dy = x2 - p["Y"][i]
            expo = p["a"][i] * dx * dx + p["b"][i] * dx * dy + p["c"][i] * dy * dy
            terms.append((p["D"][i] * np.exp(expo), dx, dy, i))
        return terms

    def energy(self, x):
        x, single = _as_batch(x, self.dimension)
        x1, x2 = x[:, 0], x[:, 1]
        u = np.zeros(x.shape[0])
        for val, _, _, _ in self._gaussian_terms(x1, x2):
            u += val
        w = 2.0 * np.pi * self.wavenumber
        u += self.roughness * np.sin(w * x1) * np.sin(w * x2)
        if self.dimension > 2:
            u += np.sum(x[:, 2:] ** 2, axis=1) / (2.0 * self.sigma**2)
        return u[0] if single else u

    def gradient(self, x):
        x, single = _as_batch(x, self.dimension)
        x1, x2 = x[:, 0], x[:, 1]
        p = MULLER_PARAMS
        g = np.zeros_like(x)
        for val, dx, dy, i in self._gaussian_terms(x1, x2):
            g[:, 0] += val * (2.0 * p["a"][i] * dx + p["b"][i] * dy)
            g[:, 1] += val * (p["b"][i] * dx + 2.0 * p["c"][i] * dy)
        w = 2.0 * np.pi * self.wavenumber
        g[:, 0] += self.roughness * w * np.cos(w * x1) * np.sin(w * x2)
        g[:, 1] += self.roughness * w * np.sin(w * x1) * np.cos(w * x2)
        if self.dimension > 2:
            g[:, 2:] = x[:, 2:] / self.sigma**2
        return g[0] if single else g


class CustomPotential(Potential):
    """User-supplied energy/gradient callables, gradient-checked on creation."""

    def __init__(self, dimension, energy_fn, gradient_fn, check_points=20, seed=0):
        self.dimension = dimension
        self._energy_fn = energy_fn
        self._gradient_fn = gradient_fn
        if check_points:
            rng = np.random.default_rng(seed)
            pts = rng.standard_normal((check_points, dimension))
            err = check_gradient(self, pts)
            if err > 1e-5:
                raise ValueError(
                    f"custom potential gradient disagrees with finite differences "
                    f"(max relative error {err:.2e})"
                )

    def energy(self, x):
        x, single = _as_batch(x, self.dimension)
        u = np.asarray([self._energy_fn(row) for row in x], dtype=float)
        return u[0] if single else u

    def gradient(self, x):
        x, single = _as_batch(x, self.dimension)
        g = np.asarray([self._gradient_fn(row) for row in x], dtype=float)
        return g[0] if single else g


_REGISTRY = {}


def register_potential(name, factory):
    """Register a factory(dimension, **params) under a custom kind name."""
    _REGISTRY[name] = factory


def make_potential(kind, dimension, params=None):
    params = dict(params or {})
    if kind == "double_well":
        return DoubleWell(dimension=dimension, **params)
    if kind == "quadratic_bowl":
        return QuadraticBowl(dimension=dimension, **params)
    if kind == "rugged_muller":
        return RuggedMuller(dimension=dimension, **params)
    if kind in _REGISTRY:
        return _REGISTRY[kind](dimension, **params)
    raise ValueError(f"unknown potential kind {kind!r}")


def check_gradient(potential, points, step=1e-5):
    """Max relative error between the analytic gradient and central differences."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    worst = 0.0
    for x in points:
        g = potential.gradient(x)
        fd = np.empty_like(g)
        for i in range(len(x)):
            e = np.zeros_like(x)
            e[i] = step
            fd[i] = (potential.energy(x + e) - potential.energy(x - e)) / (2 * step)
        scale = max(np.max(np.abs(g)), np.max(np.abs(fd)), 1e-8)
        worst = max(worst, float(np.max(np.abs(g - fd)) / scale))
    return worst


# --- region geometry -------------------------------------------------------


class Membership(enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class Ball:
    """Ball region; ``outside=True`` flips it to the complement {|x-c| >= r},
    which represents an absorbing region beyond a sphere."""

    center: tuple
    radius: float
    outside: bool = False

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def center_array(self):
        return np.asarray(self.center, dtype=float)

    @property
    def dimension(self):
        return len(self.center)


@dataclass(frozen=True)
class HalfSpace:
    """Half space {x : sign * (x[axis] - threshold) >= 0}."""

    axis: int
    threshold: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("half-space sign must be +1 or -1")


def signed_distance(region, x):
    """Negative inside the region, zero on its boundary (vectorized)."""
    x = np.asarray(x, dtype=float)
    pts = x if x.ndim == 2 else x[None, :]
    if isinstance(region, Ball):
        r = np.linalg.norm(pts - region.center_array, axis=1)
        s = region.radius - r if region.outside else r - region.radius
    elif isinstance(region, HalfSpace):
        s = -region.sign * (pts[:, region.axis] - region.threshold)
    else:
        raise TypeError(f"unknown region type {type(region).__name__}")
    return s if x.ndim == 2 else s[0]


def _scale(region):
    if isinstance(region, Ball):
        return max(region.radius, np.max(np.abs(region.center_array)), 1.0)
    return max(abs(region.threshold), 1.0)


def membership(region, x, tol=1e-12):
    """Classify a point against a region with a relative boundary tolerance."""
    s = signed_distance(region, x)
    cut = tol * _scale(region)
    inside = s < -cut
    boundary = np.abs(s) <= cut
    if np.ndim(s) == 0:
        if boundary:
            return Membership.BOUNDARY
        return Membership.INSIDE if inside else Membership.OUTSIDE
    out = np.full(s.shape, Membership.OUTSIDE, dtype=object)
    out[inside] = Membership.INSIDE
    out[boundary] = Membership.BOUNDARY
    return out


def contains(region, x, tol=1e-12):
    """True where a point is inside or on the boundary of the region."""
    s = signed_distance(region, x)
    return s <= tol * _scale(region)


def regions_disjoint(region_a, region_b):
    a, b = region_a, region_b
    if isinstance(a, Ball) and isinstance(b, Ball):
        gap = np.linalg.norm(a.center_array - b.center_array)
        if not a.outside and not b.outside:
            return gap > a.radius + b.radius
        if a.outside != b.outside:
            inner, outer = (b, a) if a.outside else (a, b)
            return gap + inner.radius < outer.radius
        return False  # two complements always overlap far away
    if isinstance(a, HalfSpace) and isinstance(b, HalfSpace):
        if a.axis != b.axis:
            return False
        if a.sign == b.sign:
            return False
        lo, hi = (a, b) if a.sign < 0 else (b, a)
        return lo.threshold < hi.threshold
    if isinstance(a, Ball) and isinstance(b, HalfSpace):
        return regions_disjoint(b, a)
    if isinstance(a, HalfSpace) and isinstance(b, Ball) and not b.outside:
        s = signed_distance(a, b.center_array)
        return s > b.radius
    return False
