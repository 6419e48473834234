"""Sample generation: equilibrium interior points via overdamped Langevin
simulation, boundary points on spheres and planes, and the stratified
double-well scheme with importance weights.

Determinism contract: a batch is a pure function of (config, seed).  Each
chain owns an independent generator spawned from the seed and the chain
index, and batch assembly merges collection events in chain order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad

from .errors import SamplingBudgetError, SimulationError
from .potentials import Ball, HalfSpace, contains

__all__ = [
    "SamplerConfig",
    "SampleBatch",
    "Box",
    "euler_maruyama_step",
    "sample_equilibrium",
    "sample_boundary_sphere",
    "sample_boundary_plane",
    "sample_stratified_doublewell",
    "sample_uniform_box",
    "with_boundary",
    "write_batch_csv",
    "read_batch_csv",
]

PROVENANCES = ("langevin", "stratified", "uniform")


@dataclass(frozen=True)
class SamplerConfig:
    temperature: float
    dt: float
    burn_in: int = 1000
    thinning: int = 10
    chains: int = 64
    seed: int = 0
    max_steps: int = 2_000_000  # per chain, including burn-in

    def __post_init__(self):
        if self.temperature < 0 or self.dt <= 0:
            raise ValueError("temperature must be >= 0 and dt > 0")
        if self.burn_in < 0 or self.thinning < 1 or self.chains < 1:
            raise ValueError("burn_in >= 0, thinning >= 1, chains >= 1 required")


@dataclass(frozen=True)
class Box:
    """Axis-aligned bounds applied to the leading coordinates."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or any(
            l >= h for l, h in zip(self.lo, self.hi)
        ):
            raise ValueError("box bounds must satisfy lo < hi componentwise")

    def contains(self, x):
        x = np.atleast_2d(x)
        k = len(self.lo)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((x[:, :k] >= lo) & (x[:, :k] <= hi), axis=1)


@dataclass
class SampleBatch:
    interior_points: np.ndarray
    interior_weights: np.ndarray
    boundary_a_points: np.ndarray
    boundary_b_points: np.ndarray
    alpha: float
    provenance: str

    def __post_init__(self):
        self.interior_points = np.atleast_2d(np.asarray(self.interior_points, float))
        self.interior_weights = np.asarray(self.interior_weights, float).ravel()
        d = self.interior_points.shape[1] if self.interior_points.size else None
        self.boundary_a_points = _as_points_or_empty(self.boundary_a_points, d)
        self.boundary_b_points = _as_points_or_empty(self.boundary_b_points, d)
        if self.interior_points.size and len(self.interior_weights) != len(
            self.interior_points
        ):
            raise ValueError("one weight per interior point is required")
        if self.interior_weights.size and (
            np.any(~np.isfinite(self.interior_weights))
            or np.any(self.interior_weights < 0)
        ):
            raise ValueError("interior weights must be finite and nonnegative")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        n_bnd = len(self.boundary_a_points) + len(self.boundary_b_points)
        if n_bnd and self.alpha <= 0:
            raise ValueError("alpha must be positive when boundary points are present")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")

    @property
    def dimension(self):
        for arr in (self.interior_points, self.boundary_a_points, self.boundary_b_points):
            if arr.size:
                return arr.shape[1]
        raise ValueError("batch is empty")

    @property
    def n_interior(self):
        return len(self.interior_points) if self.interior_points.size else 0


def _as_points_or_empty(arr, d):
    arr = np.asarray(arr, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, d if d is not None else 0)
    return np.atleast_2d(arr)


def with_boundary(batch, boundary_a, boundary_b):
    """Attach boundary pools; alpha becomes the per-side count ratio."""
    boundary_a = np.atleast_2d(np.asarray(boundary_a, float))
    boundary_b = np.atleast_2d(np.asarray(boundary_b, float))
    n = batch.n_interior
    alpha = (len(boundary_a) + len(boundary_b)) / (2.0 * n) if n else 0.0
    return replace(
        batch, boundary_a_points=boundary_a, boundary_b_points=boundary_b, alpha=alpha
    )


def euler_maruyama_step(potential, x, dt, temperature, noise):
    """One explicit step x - grad U(x) dt + sqrt(2 T dt) * noise."""
    if dt <= 0 or temperature < 0:
        raise ValueError("dt must be positive and temperature nonnegative")
    x = np.asarray(x, dtype=float)
    out = x - potential.gradient(x) * dt + np.sqrt(2.0 * temperature * dt) * np.asarray(noise)
    if not np.all(np.isfinite(out)):
        raise SimulationError("trajectory produced a non-finite state", state=out)
    return out


def _chain_starts(region_a, region_b, chains, dimension, rngs, temperature):
    """Start each chain on a region boundary, perturbed toward the domain.

    Chains alternate between the two regions so that both metastable
    basins are populated even when barrier crossings are rare.
    """
    eps = 1e-3
    starts = np.empty((chains, dimension))
    for c, rng in enumerate(rngs):
        region = region_a if c % 2 == 0 else region_b
        if isinstance(region, Ball):
            u = rng.standard_normal(dimension)
            u /= np.linalg.norm(u)
            factor = (1.0 - eps) if region.outside else (1.0 + eps)
            starts[c] = region.center_array + region.radius * factor * u
        elif isinstance(region, HalfSpace):
            x = np.zeros(dimension)
            x[region.axis] = region.threshold - region.sign * eps
            scale = np.sqrt(max(temperature, 1e-2))
            jitter = scale * rng.standard_normal(dimension)
            jitter[region.axis] = 0.0
            starts[c] = x + jitter
        else:
            raise TypeError(f"unsupported region type {type(region).__name__}")
    return starts


def _valid_mask(x, region_a, region_b, domain):
    ok = ~contains(region_a, x) & ~contains(region_b, x)
    if domain is not None:
        ok &= domain.contains(x)
    return ok


def sample_equilibrium(potential, region_a, region_b, cfg, n, domain=None):
    """n equilibrium-distributed points outside A and B, unit weights.

    Runs ``cfg.chains`` Langevin chains; after burn-in, every ``thinning``
    steps the current states outside A, B (and inside ``domain`` if given)
    are collected, in chain order, until n points are gathered.
    """
    if n <= 0:
        raise ValueError("sample count must be positive")
    d = potential.dimension
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.chains)]
    x = _chain_starts(region_a, region_b, cfg.chains, d, rngs, cfg.temperature)
    collected = []
    count = 0
    step = 0
    block = 512
    while count < n:
        if step >= cfg.max_steps:
            raise SamplingBudgetError(
                f"collected {count}/{n} points within the {cfg.max_steps}-step budget"
            )
        steps_now = min(block, cfg.max_steps - step)
        noise = np.empty((steps_now, cfg.chains, d))
        for c, rng in enumerate(rngs):
            noise[:, c, :] = rng.standard_normal((steps_now, d))
        for s in range(steps_now):
            x = euler_maruyama_step(potential, x, cfg.dt, cfg.temperature, noise[s])
            step += 1
            if step > cfg.burn_in and (step - cfg.burn_in) % cfg.thinning == 0:
                mask = _valid_mask(x, region_a, region_b, domain)
                if np.any(mask):
                    collected.append(x[mask].copy())
                    count += int(mask.sum())
                if count >= n:
                    break
    points = np.concatenate(collected, axis=0)[:n]
    return SampleBatch(
        interior_points=points,
        interior_weights=np.ones(n),
        boundary_a_points=np.empty((0, d)),
        boundary_b_points=np.empty((0, d)),
        alpha=0.0,
        provenance="langevin",
    )


def sample_boundary_sphere(center, radius, n, seed):
    """n points uniform on the sphere |x - center| = radius."""
    if radius <= 0 or n <= 0:
        raise ValueError("radius and sample count must be positive")
    center = np.asarray(center, dtype=float)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, len(center)))
    norms = np.linalg.norm(z, axis=1)
    while np.any(norms < 1e-12):  # degenerate draws, essentially impossible
        bad = norms < 1e-12
        z[bad] = rng.standard_normal((int(bad.sum()), len(center)))
        norms = np.linalg.norm(z, axis=1)
    return center[None, :] + radius * z / norms[:, None]


def sample_boundary_plane(
    axis, value, dimension, n, seed, transverse_temperature, transverse_stiffness
):
    """n points on the hyperplane x[axis] = value; the other coordinates are
    Gaussian with variance T / (2 * stiffness), the boundary restriction of
    the equilibrium measure for a quadratic transverse restraint."""
    if n <= 0:
        raise ValueError("sample count must be positive")
    rng = np.random.default_rng(seed)
    pts = np.zeros((n, dimension))
    if dimension > 1:
        std = np.sqrt(transverse_temperature / (2.0 * transverse_stiffness))
        pts[:, :] = std * rng.standard_normal((n, dimension))
    pts[:, axis] = value
    return pts


def doublewell_axis_weight_norm(temperature):
    """Integral of exp(-(x1^2-1)^2 / T) over [-1, 1] (weight normalizer)."""
    beta = 1.0 / temperature
    val, _ = quad(lambda t: np.exp(-beta * (t * t - 1.0) ** 2), -1.0, 1.0)
    return val


def sample_stratified_doublewell(dimension, temperature, n, seed):
    """Uniform x1 on [-1, 1] with exponential reweighting, Gaussian transverse.

    The weight exp(-(x1^2-1)^2 / T) / Z turns the uniform draw into an
    importance-sampling estimate of equilibrium interior averages; Z is the
    1-d quadrature normalizer.  Estimators self-normalize the weights, so
    only weight ratios affect results.
    """
    if dimension < 1 or n <= 0:
        raise ValueError("dimension >= 1 and sample count > 0 required")
    rng = np.random.default_rng(seed)
    pts = np.zeros((n, dimension))
    pts[:, 0] = rng.uniform(-1.0, 1.0, size=n)
    if dimension > 1:
        std = np.sqrt(temperature / 0.6)
        pts[:, 1:] = std * rng.standard_normal((n, dimension - 1))
    beta = 1.0 / temperature
    weights = np.exp(-beta * (pts[:, 0] ** 2 - 1.0) ** 2)
    weights /= doublewell_axis_weight_norm(temperature)
    return SampleBatch(
        interior_points=pts,
        interior_weights=weights,
        boundary_a_points=np.empty((0, dimension)),
        boundary_b_points=np.empty((0, dimension)),
        alpha=0.0,
        provenance="stratified",
    )


def sample_uniform_box(lo, hi, n, seed, exclude=()):
    """n points uniform on a box, rejecting any that fall in ``exclude`` regions."""
    if n <= 0:
        raise ValueError("sample count must be positive")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = len(lo)
    rng = np.random.default_rng(seed)
    out = []
    count = 0
    attempts = 0
    while count < n:
        attempts += 1
        if attempts > 1000:
            raise SamplingBudgetError("uniform rejection sampling failed to fill the batch")
        draw = lo + (hi - lo) * rng.uniform(size=(max(n, 1024), d))
        ok = np.ones(len(draw), dtype=bool)
        for region in exclude:
            ok &= ~contains(region, draw)
        out.append(draw[ok])
        count += int(ok.sum())
    pts = np.concatenate(out, axis=0)[:n]
    return SampleBatch(
        interior_points=pts,
        interior_weights=np.ones(n),
        boundary_a_points=np.empty((0, d)),
        boundary_b_points=np.empty((0, d)),
        alpha=0.0,
        provenance="uniform",
    )


# --- columnar serialization --------------------------------------------------


def write_batch_csv(path, batch):
    d = batch.dimension
    header = [f"x{i}" for i in range(d)] + ["weight", "tag"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, w in zip(batch.interior_points, batch.interior_weights):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(w)), "interior"])
        for row in batch.boundary_a_points:
            writer.writerow([repr(float(v)) for v in row] + ["1.0", "boundary_a"])
        for row in batch.boundary_b_points:
            writer.writerow([repr(float(v)) for v in row] + ["1.0", "boundary_b"])


def read_batch_csv(path, alpha=None, provenance="langevin"):
    interior, weights, bnd_a, bnd_b = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 2
        for row in reader:
            coords = [float(v) for v in row[:d]]
            tag = row[-1]
            if tag == "interior":
                interior.append(coords)
                weights.append(float(row[d]))
            elif tag == "boundary_a":
                bnd_a.append(coords)
            elif tag == "boundary_b":
                bnd_b.append(coords)
            else:
                raise ValueError(f"unknown point tag {tag!r}")
    interior_arr = np.asarray(interior) if interior else np.empty((0, d))
    if alpha is None:
        n_bnd = len(bnd_a) + len(bnd_b)
        alpha = n_bnd / (2.0 * len(interior)) if interior and n_bnd else 0.0
    return SampleBatch(
        interior_points=interior_arr,
        interior_weights=np.asarray(weights) if weights else np.empty(0),
        boundary_a_points=np.asarray(bnd_a) if bnd_a else np.empty((0, d)),
        boundary_b_points=np.asarray(bnd_b) if bnd_b else np.empty((0, d)),
        alpha=alpha,
        provenance=provenance,
    )
