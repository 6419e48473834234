"""Ground-truth committor functions for the verifiable geometries.

Four independent references:

* two balls in free space at zero drift, solved by the method of images
  (an explicit series of reflected point charges);
* the planar double well, reduced to a one-dimensional quadrature;
* concentric spheres in a quadratic bowl, reduced to a radial quadrature;
* arbitrary planar potentials, solved on a uniform grid with boundary-fitted
  (Shortley-Weller) finite differences and an upwind fallback.

All of these expose ``value`` and ``gradient`` so the metrics module can
treat model and truth uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma

import numpy as np
from scipy.integrate import quad
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from .errors import SolverError
from .potentials import Ball, signed_distance

__all__ = [
    "ImageChargeSeries",
    "build_image_series",
    "images_committor",
    "ImagesCommittor",
    "doublewell_committor_1d",
    "DoubleWellCommittor1D",
    "radial_committor",
    "RadialCommittor",
    "GridSolution2D",
    "grid_solve_2d",
    "GridCommittor2D",
]


# --- method of images for two spheres ---------------------------------------


def green_prefactor(d):
    """Free-space kernel constant: G(x, y) = prefactor / |x-y|^(d-2)."""
    return gamma(d / 2.0) / (2.0 * np.pi) ** (d / 2.0)


@dataclass(frozen=True)
class ImageChargeSeries:
    """Reflected point charges for two balls of radius r centered at
    (+/- separation/2) e1, held at committor values 1 and 0.

    ``charges`` holds (c_i, w_i): c_i multiplies the Green kernel (with its
    gamma-function prefactor) and w_i is the distance from charge i (inside
    one ball) to the center of the opposite ball.  Each charge i >= 1 is the
    Kelvin reflection of charge i-1 across the opposite sphere, so the
    strength contracts by (r / w_{i-1})^(d-2) and the offset from its own
    ball center is r^2 / w_{i-1}.  The leading strength is scaled so the
    series hits the boundary values exactly in the infinite-sum limit.
    """

    separation: float
    radius: float
    dimension: int
    truncation_tol: float
    charges: tuple  # ((c_i, w_i), ...)
    offsets: tuple  # distance of charge i from its own ball center

    @property
    def positive_centers(self):
        half = self.separation / 2.0
        pos = np.zeros((len(self.offsets), self.dimension))
        pos[:, 0] = half - np.asarray(self.offsets)
        return pos


def build_image_series(separation, radius, dimension, truncation_tol=1e-12):
    if dimension < 3:
        raise ValueError("the image series requires dimension >= 3")
    if radius <= 0 or separation <= 2 * radius:
        raise ValueError("balls must be disjoint: separation > 2 * radius")
    p = dimension - 2
    pref = green_prefactor(dimension)
    c = radius**p / pref  # leading charge: unit potential on its own sphere
    w = separation
    charges = [(c, w)]
    offsets = [0.0]
    c0 = c
    while True:
        c_next = c * (radius / w) ** p
        offset = radius**2 / w
        w = separation - offset
        c = c_next
        if c / c0 < truncation_tol:
            break
        charges.append((c, w))
        offsets.append(offset)
        if len(charges) > 10_000:
            raise SolverError("image series failed to converge")
    return ImageChargeSeries(
        separation=float(separation),
        radius=float(radius),
        dimension=int(dimension),
        truncation_tol=float(truncation_tol),
        charges=tuple(charges),
        offsets=tuple(offsets),
    )


def _images_potential(series, x, want_grad=False):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = series.dimension
    p = d - 2
    pref = green_prefactor(d)
    half = series.separation / 2.0
    for sign in (+1.0, -1.0):
        center = np.zeros(d)
        center[0] = sign * half
        if np.any(np.linalg.norm(x - center, axis=1) < series.radius - 1e-12):
            raise ValueError("point lies inside one of the balls")
    val = np.zeros(len(x))
    grad = np.zeros_like(x) if want_grad else None
    for (c, _w), off in zip(series.charges, series.offsets):
        for sign in (+1.0, -1.0):
            y = np.zeros(d)
            y[0] = sign * (half - off)
            diff = x - y
            r2 = np.sum(diff * diff, axis=1)
            val += sign * c * pref * r2 ** (-p / 2.0)
            if want_grad:
                grad += sign * c * pref * (-p) * diff * (r2 ** (-(p + 2) / 2.0))[:, None]
    return val, grad


def images_committor(series, x):
    """q(x) = (potential(x) + 1) / 2; 0 on the ball at -e1 side, 1 at +e1."""
    x_arr = np.asarray(x, dtype=float)
    single = x_arr.ndim == 1
    val, _ = _images_potential(series, x_arr)
    q = 0.5 * (val + 1.0)
    return float(q[0]) if single else q


class ImagesCommittor:
    """Evaluator adapter around an image-charge series."""

    def __init__(self, series):
        self.series = series

    def value(self, x):
        return images_committor(self.series, x)

    def gradient(self, x):
        _, g = _images_potential(self.series, x, want_grad=True)
        return 0.5 * g


# --- one-dimensional double well ---------------------------------------------


class DoubleWellCommittor1D:
    """Committor between the planes x1 = -1 and x1 = +1 in the double well.

    The reduced two-point problem T f'' = U'(x1) f', f(-1) = 0, f(1) = 1 has
    the integrating-factor solution

        f(x1) = int_{-1}^{x1} exp(U(t)/T) dt / int_{-1}^{1} exp(U(t)/T) dt,

    with U(t) = (t^2 - 1)^2, evaluated by adaptive quadrature.
    """

    def __init__(self, temperature, tol=1e-10):
        self.temperature = float(temperature)
        self.tol = tol
        self._beta = 1.0 / self.temperature
        self._denom = self._integral(-1.0, 1.0)

    def _integrand(self, t):
        return np.exp(self._beta * (t * t - 1.0) ** 2)

    def _integral(self, lo, hi):
        val, _ = quad(self._integrand, lo, hi, epsabs=0.0, epsrel=self.tol, limit=200)
        return val

    def f(self, x1):
        x1 = np.asarray(x1, dtype=float)
        single = x1.ndim == 0
        flat = np.atleast_1d(x1)
        if np.any(flat < -1.0 - 1e-12) or np.any(flat > 1.0 + 1e-12):
            raise ValueError("x1 must lie in [-1, 1]")
        out = np.array([self._integral(-1.0, float(v)) / self._denom for v in flat])
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if single else out

    def f_prime(self, x1):
        x1 = np.asarray(x1, dtype=float)
        return self._integrand(x1) / self._denom

    def value(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.f(x[:, 0])

    def gradient(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        g = np.zeros_like(x)
        g[:, 0] = self.f_prime(x[:, 0])
        return g

    def rate(self):
        """T * E_mu |f'|^2 over the slab, by quadrature (k_B = 1)."""
        num, _ = quad(self._integrand, -1.0, 1.0, epsabs=0.0, epsrel=self.tol, limit=200)
        weight, _ = quad(
            lambda t: np.exp(-self._beta * (t * t - 1.0) ** 2),
            -1.0,
            1.0,
            epsabs=0.0,
            epsrel=self.tol,
            limit=200,
        )
        # |f'|^2 e^{-bU} = e^{bU} / denom^2, so the numerator reduces to denom.
        return self.temperature * num / (self._denom**2 * weight)


def doublewell_committor_1d(temperature, x1):
    return DoubleWellCommittor1D(temperature).f(x1)


# --- concentric spheres -------------------------------------------------------


class RadialCommittor:
    """Committor between |x| = b (value 1) and |x| = a (value 0) in the bowl
    strength * |x|^2, reduced to a radial quadrature.

    q(r) = int_r^a s^(1-d) exp(strength s^2 / T) ds / int_b^a (same); the
    zero-drift limit (temperature None or inf) gives the harmonic solution.
    """

    def __init__(self, temperature, dimension, outer, inner, strength=10.0, tol=1e-10):
        if not 0 < inner < outer:
            raise ValueError("radii must satisfy 0 < inner < outer")
        self.dimension = int(dimension)
        self.outer = float(outer)
        self.inner = float(inner)
        self.strength = float(strength)
        self.tol = tol
        if temperature is None or np.isinf(temperature):
            self._beta = 0.0
            self.temperature = np.inf
        else:
            self._beta = 1.0 / float(temperature)
            self.temperature = float(temperature)
        self._denom = self._integral(self.inner, self.outer)

    def _integrand(self, s):
        return s ** (1.0 - self.dimension) * np.exp(self._beta * self.strength * s * s)

    def _integral(self, lo, hi):
        val, _ = quad(self._integrand, lo, hi, epsabs=0.0, epsrel=self.tol, limit=200)
        return val

    def q(self, r):
        r = np.asarray(r, dtype=float)
        single = r.ndim == 0
        flat = np.atleast_1d(r)
        if np.any(flat < self.inner - 1e-12) or np.any(flat > self.outer + 1e-12):
            raise ValueError("radius outside [inner, outer]")
        out = np.array(
            [self._integral(float(v), self.outer) / self._denom for v in flat]
        )
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if single else out

    def q_prime(self, r):
        r = np.asarray(r, dtype=float)
        return -self._integrand(r) / self._denom

    def value(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.q(np.linalg.norm(x, axis=1))

    def gradient(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        return (self.q_prime(r) / r)[:, None] * x


def radial_committor(temperature, dimension, outer, inner, r, strength=10.0):
    return RadialCommittor(temperature, dimension, outer, inner, strength).q(r)


# --- planar finite-difference solver ------------------------------------------


@dataclass
class GridSolution2D:
    """Nodal committor values on a uniform grid over a rectangle.

    ``values[i, j]`` corresponds to (x_lo + i h, y_lo + j h); nodes inside
    region A hold exactly 0 and nodes inside region B exactly 1.
    """

    lo: tuple
    hi: tuple
    h: float
    values: np.ndarray
    mask_a: np.ndarray
    mask_b: np.ndarray

    def _locate(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))[:, :2]
        fx = (pts[:, 0] - self.lo[0]) / self.h
        fy = (pts[:, 1] - self.lo[1]) / self.h
        nx, ny = self.values.shape
        ix = np.clip(np.floor(fx).astype(int), 0, nx - 2)
        iy = np.clip(np.floor(fy).astype(int), 0, ny - 2)
        tx = np.clip(fx - ix, 0.0, 1.0)
        ty = np.clip(fy - iy, 0.0, 1.0)
        return ix, iy, tx, ty

    def _bilinear(self, field, pts):
        ix, iy, tx, ty = self._locate(pts)
        v00 = field[ix, iy]
        v10 = field[ix + 1, iy]
        v01 = field[ix, iy + 1]
        v11 = field[ix + 1, iy + 1]
        return (
            v00 * (1 - tx) * (1 - ty)
            + v10 * tx * (1 - ty)
            + v01 * (1 - tx) * ty
            + v11 * tx * ty
        )

    def interpolate(self, pts):
        return self._bilinear(self.values, pts)

    def gradient_fields(self):
        gx = np.gradient(self.values, self.h, axis=0)
        gy = np.gradient(self.values, self.h, axis=1)
        return gx, gy

    def node_points(self):
        nx, ny = self.values.shape
        xs = self.lo[0] + self.h * np.arange(nx)
        ys = self.lo[1] + self.h * np.arange(ny)
        return xs, ys

    def to_csv(self, path):
        xs, ys = self.node_points()
        with open(path, "w") as fh:
            fh.write("x1,x2,q\n")
            for i, xv in enumerate(xs):
                for j, yv in enumerate(ys):
                    fh.write(f"{xv!r},{yv!r},{self.values[i, j]!r}\n")


class GridCommittor2D:
    """Evaluator adapter; queries depend on the first two coordinates only."""

    def __init__(self, solution):
        self.solution = solution
        self._gx, self._gy = solution.gradient_fields()

    def value(self, x):
        return self.solution.interpolate(x)

    def gradient(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        g = np.zeros_like(x)
        g[:, 0] = self.solution._bilinear(self._gx, x)
        g[:, 1] = self.solution._bilinear(self._gy, x)
        return g


def _crossing_fraction(px, py, ex, ey, center, radius, h):
    """Fraction theta of the arm from (px,py) along h*(ex,ey) where the circle
    |x - center| = radius is crossed (smallest positive root)."""
    rx, ry = px - center[0], py - center[1]
    m = ex * rx + ey * ry
    dd = rx * rx + ry * ry - radius * radius
    disc = m * m - dd
    if disc < 0:
        return 1.0
    sq = np.sqrt(disc)
    candidates = [t for t in (-m - sq, -m + sq) if t > 0]
    if not candidates:
        return 1.0
    theta = min(candidates) / h
    return float(min(max(theta, 1e-6), 1.0))


def grid_solve_2d(potential, temperature, region_a, region_b, lo, hi, h):
    """Solve -T lap(q) + grad U . grad q = 0 on a rectangle with disk holes.

    Dirichlet data: q = 0 on (and inside) disk A, q = 1 on disk B;
    homogeneous Neumann on the outer rectangle.  Differences are central
    and second order, with boundary-fitted arms at the disk boundaries and
    a first-order upwind fallback wherever the cell Peclet number
    |dU/dx| h / T exceeds 2.
    """
    if not (isinstance(region_a, Ball) and isinstance(region_b, Ball)):
        raise ValueError("grid solver requires disk regions")
    lo = tuple(float(v) for v in lo)
    hi = tuple(float(v) for v in hi)
    nx = round((hi[0] - lo[0]) / h)
    ny = round((hi[1] - lo[1]) / h)
    if abs(lo[0] + nx * h - hi[0]) > 1e-9 * max(1.0, abs(hi[0])) or abs(
        lo[1] + ny * h - hi[1]
    ) > 1e-9 * max(1.0, abs(hi[1])):
        raise ValueError("grid spacing must divide the box edges")
    nx += 1
    ny += 1
    xs = lo[0] + h * np.arange(nx)
    ys = lo[1] + h * np.arange(ny)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])

    sd_a = signed_distance(region_a, pts).reshape(nx, ny)
    sd_b = signed_distance(region_b, pts).reshape(nx, ny)
    mask_a = sd_a <= 0.0
    mask_b = sd_b <= 0.0
    if np.any(mask_a & mask_b):
        raise ValueError("regions A and B overlap on the grid")
    unknown = ~(mask_a | mask_b)
    index = -np.ones((nx, ny), dtype=int)
    index[unknown] = np.arange(int(unknown.sum()))
    n_unknown = int(unknown.sum())
    if n_unknown == 0:
        raise SolverError("no interior nodes to solve for")

    if potential is not None:
        drift_full = potential.gradient(pts)[:, :2].reshape(nx, ny, 2)
    else:
        drift_full = np.zeros((nx, ny, 2))

    rows, cols, vals = [], [], []
    rhs = np.zeros(n_unknown)

    def dirichlet_info(i, j):
        if mask_a[i, j]:
            return region_a, 0.0
        if mask_b[i, j]:
            return region_b, 1.0
        return None

    def add(row, col, v):
        rows.append(row)
        cols.append(col)
        vals.append(v)

    for i in range(nx):
        for j in range(ny):
            if not unknown[i, j]:
                continue
            row = index[i, j]
            px, py = xs[i], ys[j]
            for axis, di, dj in ((0, 1, 0), (1, 0, 1)):
                arms = []  # (theta, unknown_col or None, dirichlet_value, exists)
                for sgn in (-1, 1):
                    ii, jj = i + sgn * di, j + sgn * dj
                    if ii < 0 or ii >= nx or jj < 0 or jj >= ny:
                        arms.append(None)  # box edge: Neumann reflection
                        continue
                    info = dirichlet_info(ii, jj)
                    if info is None:
                        arms.append((1.0, index[ii, jj], 0.0))
                    else:
                        region, bval = info
                        theta = _crossing_fraction(
                            px, py, sgn * di, sgn * dj, region.center[:2], region.radius, h
                        )
                        arms.append((theta, None, bval))
                west, east = arms
                v = drift_full[i, j, axis]
                peclet = abs(v) * h / temperature if temperature > 0 else np.inf
                if west is None and east is None:
                    raise SolverError("grid too coarse: node with no neighbors")
                # Neumann reflection: mirror the existing arm, drop convection.
                reflected = west is None or east is None
                if west is None:
                    west = east
                if east is None:
                    east = west
                tw, cw, bw = west
                te, ce, be = east
                # diffusion: -T * second difference with unequal arms
                denom = tw * te * (tw + te)
                cw_diff = -temperature * 2.0 * te / (denom * h * h)
                ce_diff = -temperature * 2.0 * tw / (denom * h * h)
                cp_diff = temperature * 2.0 * (tw + te) / (denom * h * h)
                add(row, row, cp_diff)
                for coef, col, bval in ((cw_diff, cw, bw), (ce_diff, ce, be)):
                    if col is None:
                        rhs[row] -= coef * bval
                    else:
                        add(row, col, coef)
                # convection
                if reflected or v == 0.0:
                    continue
                if peclet <= 2.0:
                    cw_conv = v * (-te / (tw * (tw + te))) / h
                    cp_conv = v * ((te - tw) / (tw * te)) / h
                    ce_conv = v * (tw / (te * (tw + te))) / h
                elif v > 0:
                    cw_conv, cp_conv, ce_conv = -v / (tw * h), v / (tw * h), 0.0
                else:
                    cw_conv, cp_conv, ce_conv = 0.0, -v / (te * h), v / (te * h)
                add(row, row, cp_conv)
                for coef, col, bval in ((cw_conv, cw, bw), (ce_conv, ce, be)):
                    if coef == 0.0:
                        continue
                    if col is None:
                        rhs[row] -= coef * bval
                    else:
                        add(row, col, coef)

    matrix = coo_matrix((vals, (rows, cols)), shape=(n_unknown, n_unknown)).tocsc()
    try:
        lu = splu(matrix)
        solution = lu.solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"sparse solve failed: {exc}") from exc
    residual = np.max(np.abs(matrix @ solution - rhs))
    scale = max(
        np.max(np.abs(rhs)),
        np.max(np.abs(matrix @ solution)) if n_unknown else 0.0,
        1.0,
    )
    if not np.isfinite(residual) or residual > 1e-10 * scale:
        raise SolverError(f"linear solve residual too large: {residual:.3e}")

    values = np.zeros((nx, ny))
    values[mask_b] = 1.0
    values[unknown] = solution
    return GridSolution2D(lo=lo, hi=hi, h=h, values=values, mask_a=mask_a, mask_b=mask_b)
