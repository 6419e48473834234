"""Evaluation metrics: relative L2 committor error, reaction rates, and the
relative rate error, plus profile tables for plotting.

Evaluators are objects exposing ``value(points) -> (n,)`` and
``gradient(points) -> (n, d)``; both the trained approximation and every
oracle satisfy this protocol.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .ansatz import evaluate, evaluate_with_gradient
from .errors import DegenerateTruthError

__all__ = [
    "AnsatzEvaluator",
    "MetricsReport",
    "relative_l2_error",
    "reaction_rate",
    "relative_rate_error",
    "compute_report",
    "profile_axis",
    "profile_radial_rays",
    "profile_grid_2d",
    "write_profile_csv",
    "write_report",
    "append_metrics_csv",
]


class AnsatzEvaluator:
    def __init__(self, ansatz, theta):
        self.ansatz = ansatz
        self.theta = np.asarray(theta, dtype=float)

    def value(self, x):
        return evaluate(self.ansatz, self.theta, np.atleast_2d(np.asarray(x, float)))

    def gradient(self, x):
        return evaluate_with_gradient(
            self.ansatz, self.theta, np.atleast_2d(np.asarray(x, float))
        )[1]


@dataclass
class MetricsReport:
    rel_l2_error: float
    rel_rate_error: float
    rate_model: float
    rate_truth: float
    n_test: int
    seed: int
    test_measure: str = "langevin"

    def as_dict(self):
        return {
            "rel_l2_error": self.rel_l2_error,
            "rel_rate_error": self.rel_rate_error,
            "rate_model": self.rate_model,
            "rate_truth": self.rate_truth,
            "n_test": self.n_test,
            "seed": self.seed,
            "test_measure": self.test_measure,
        }


def _weights(points, weights):
    if weights is None:
        return np.full(len(points), 1.0 / len(points))
    weights = np.asarray(weights, dtype=float)
    return weights / weights.sum()


def relative_l2_error(model, truth, points, weights=None):
    """|| q_model - q_truth || / || q_truth || in the weighted L2 sample norm."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        raise ValueError("test batch is empty")
    w = _weights(points, weights)
    qm = np.asarray(model.value(points), dtype=float)
    qt = np.asarray(truth.value(points), dtype=float)
    denom = float(np.dot(w, qt * qt))
    if denom <= 0.0:
        raise DegenerateTruthError("reference committor has zero norm on the batch")
    return float(np.sqrt(np.dot(w, (qm - qt) ** 2) / denom))


def reaction_rate(evaluator, temperature, points, weights=None):
    """T times the weighted mean of |grad q|^2 over equilibrium samples."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    w = _weights(points, weights)
    g = np.asarray(evaluator.gradient(points), dtype=float)
    return float(temperature * np.dot(w, np.einsum("nd,nd->n", g, g)))


def relative_rate_error(model, truth, temperature, points, weights=None):
    rate_t = reaction_rate(truth, temperature, points, weights)
    if rate_t == 0.0:
        raise DegenerateTruthError("reference reaction rate is zero")
    rate_m = reaction_rate(model, temperature, points, weights)
    return abs(rate_m - rate_t) / rate_t


def compute_report(model, truth, temperature, points, weights=None, seed=0, measure="langevin"):
    rate_t = reaction_rate(truth, temperature, points, weights)
    if rate_t == 0.0:
        raise DegenerateTruthError("reference reaction rate is zero")
    rate_m = reaction_rate(model, temperature, points, weights)
    return MetricsReport(
        rel_l2_error=relative_l2_error(model, truth, points, weights),
        rel_rate_error=abs(rate_m - rate_t) / rate_t,
        rate_model=rate_m,
        rate_truth=rate_t,
        n_test=len(np.atleast_2d(points)),
        seed=seed,
        test_measure=measure,
    )


# --- profile tables -----------------------------------------------------------


def profile_axis(model, truth, dimension, axis=0, lo=-1.0, hi=1.0, n=201, base_point=None, exclude=()):
    """(coordinate, q_model, q_truth) rows along one coordinate axis."""
    from .potentials import contains

    ts = np.linspace(lo, hi, n)
    pts = np.zeros((n, dimension)) if base_point is None else np.tile(base_point, (n, 1))
    pts[:, axis] = ts
    keep = np.ones(n, dtype=bool)
    for region in exclude:
        keep &= ~contains(region, pts)
    pts = pts[keep]
    rows = np.column_stack([pts[:, axis], model.value(pts), truth.value(pts)])
    return ["coordinate", "q_model", "q_truth"], rows


def profile_radial_rays(model, truth, dimension, r_lo, r_hi, n_points=101, n_rays=3, seed=0):
    """(ray, radius, q_model, q_truth) rows along random radial directions."""
    rng = np.random.default_rng(seed)
    radii = np.linspace(r_lo, r_hi, n_points)
    rows = []
    for ray in range(n_rays):
        u = rng.standard_normal(dimension)
        u /= np.linalg.norm(u)
        pts = radii[:, None] * u[None, :]
        qm = model.value(pts)
        qt = truth.value(pts)
        for r, a, b in zip(radii, qm, qt):
            rows.append((float(ray), r, a, b))
    return ["ray", "radius", "q_model", "q_truth"], np.asarray(rows)


def profile_grid_2d(model, truth, lo, hi, h, exclude=()):
    """(x1, x2, q_model, q_truth) rows over a uniform planar grid."""
    from .potentials import contains

    xs = np.arange(lo[0], hi[0] + h / 2, h)
    ys = np.arange(lo[1], hi[1] + h / 2, h)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    keep = np.ones(len(pts), dtype=bool)
    for region in exclude:
        keep &= ~contains(region, pts)
    pts = pts[keep]
    rows = np.column_stack([pts, model.value(pts), truth.value(pts)])
    return ["x1", "x2", "q_model", "q_truth"], rows


def write_profile_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def write_report(path, report, extra=None):
    """Flat key=value text file."""
    items = dict(report.as_dict())
    if extra:
        items.update(extra)
    with open(path, "w") as fh:
        for key, value in items.items():
            fh.write(f"{key}={value!r}\n" if isinstance(value, str) else f"{key}={value}\n")


def append_metrics_csv(path, experiment, report):
    """One results row per experiment, keyed by name."""
    exists = os.path.exists(path)
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if not exists:
            writer.writerow(
                ["experiment", "rel_l2_error", "rel_rate_error", "rate_model", "rate_truth", "n_test", "seed"]
            )
        writer.writerow(
            [
                experiment,
                repr(report.rel_l2_error),
                repr(report.rel_rate_error),
                repr(report.rate_model),
                repr(report.rate_truth),
                report.n_test,
                report.seed,
            ]
        )
