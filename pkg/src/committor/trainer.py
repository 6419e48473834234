"""Adam minimization of the variational objective with mini-batching and
soft boundary penalties.

Interior points are drawn without replacement in mini-batches, reshuffled
each epoch; boundary pools are small and are included in every step.  The
run is fully determined by (initial parameters, batches, config seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import TrainingDivergedError
from .objective import loss_and_grad, loss_value
from .sampler import SampleBatch

__all__ = ["TrainConfig", "TrainReport", "AdamState", "adam_step", "train", "tune_penalty"]


@dataclass(frozen=True)
class TrainConfig:
    penalty_weight: float            # boundary penalty coefficient
    boundary_mix: float | None = None  # per-side boundary/interior sample ratio
    batch_size: int = 3000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_iterations: int = 5000
    boundary_tolerance: float = 1e-3
    seed: int = 0
    eval_every: int = 50
    loss_window: int = 10  # evaluations per window in the flatness check

    def __post_init__(self):
        if self.penalty_weight < 0:
            raise ValueError("penalty weight must be nonnegative")
        if self.boundary_tolerance <= 0 or self.batch_size < 1:
            raise ValueError("boundary tolerance and batch size must be positive")
        if self.max_iterations < 0 or self.eval_every < 1:
            raise ValueError("max_iterations >= 0 and eval_every >= 1 required")


@dataclass
class TrainReport:
    loss_history: list          # rows (iteration, train loss, val loss, rms A, rms B)
    final_theta: np.ndarray
    boundary_rms_a: float
    boundary_rms_b: float
    converged: bool
    final_adam_state: "AdamState | None" = None

    def write_log_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iteration,train_loss,val_loss,boundary_rms_a,boundary_rms_b\n")
            for row in self.loss_history:
                fh.write(",".join(repr(v) for v in row) + "\n")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, n):
        return cls(m=np.zeros(n), v=np.zeros(n), step=0)


def adam_step(theta, grad, state, learning_rate, beta1=0.9, beta2=0.999, epsilon=1e-8):
    """One Adam update with bias correction; returns (theta', state')."""
    step = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    theta_new = theta - learning_rate * m_hat / (np.sqrt(v_hat) + epsilon)
    return theta_new, AdamState(m=m, v=v, step=step)


def boundary_rms(ansatz, theta, points, target):
    """Root-mean-square of (q - target) over boundary points."""
    from .ansatz import evaluate

    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return 0.0
    q = evaluate(ansatz, theta, np.atleast_2d(points))
    return float(np.sqrt(np.mean((q - target) ** 2)))


def _minibatch(batch, idx):
    return SampleBatch(
        interior_points=batch.interior_points[idx],
        interior_weights=batch.interior_weights[idx],
        boundary_a_points=batch.boundary_a_points,
        boundary_b_points=batch.boundary_b_points,
        alpha=batch.alpha,
        provenance=batch.provenance,
    )


def _flat_window_reached(evals, window):
    if len(evals) < 2 * window:
        return False
    recent = np.mean([e[1] for e in evals[-window:]])
    earlier = np.mean([e[1] for e in evals[-2 * window : -window]])
    scale = max(abs(earlier), 1e-30)
    return abs(recent - earlier) / scale < 1e-3


def train(ansatz, theta0, train_batch, val_batch, cfg):
    """Minimize the objective; returns the full training record.

    ``converged`` requires both held-out boundary RMS values at or below
    ``cfg.boundary_tolerance`` and a flat training-loss window.
    """
    theta = np.array(theta0, dtype=float)
    alpha = cfg.boundary_mix if cfg.boundary_mix is not None else train_batch.alpha
    rng = np.random.default_rng(cfg.seed)
    n = train_batch.n_interior
    bs = min(cfg.batch_size, n) if n else 0
    state = AdamState.fresh(theta.size)
    history = []
    evals = []

    def record(iteration):
        tr = loss_value(ansatz, theta, train_batch, cfg.penalty_weight, alpha)
        vl = loss_value(ansatz, theta, val_batch, cfg.penalty_weight, alpha)
        rms_a = boundary_rms(ansatz, theta, val_batch.boundary_a_points, 0.0)
        rms_b = boundary_rms(ansatz, theta, val_batch.boundary_b_points, 1.0)
        history.append((iteration, tr, vl, rms_a, rms_b))
        evals.append((iteration, tr))

    order = rng.permutation(n) if n else np.empty(0, dtype=int)
    cursor = 0
    last_theta = theta.copy()
    for iteration in range(1, cfg.max_iterations + 1):
        if n:
            if cursor + bs > n:
                order = rng.permutation(n)
                cursor = 0
            idx = order[cursor : cursor + bs]
            cursor += bs
            mini = _minibatch(train_batch, idx)
        else:
            mini = train_batch
        result = loss_and_grad(ansatz, theta, mini, cfg.penalty_weight, alpha)
        if not np.isfinite(result.value):
            raise TrainingDivergedError(
                "training loss became non-finite",
                last_theta=last_theta,
                iteration=iteration,
            )
        last_theta = theta.copy()
        theta, state = adam_step(
            theta,
            result.grad_theta,
            state,
            cfg.learning_rate,
            cfg.beta1,
            cfg.beta2,
            cfg.epsilon,
        )
        if iteration % cfg.eval_every == 0 or iteration == cfg.max_iterations:
            record(iteration)

    if cfg.max_iterations == 0:
        record(0)
    rms_a = boundary_rms(ansatz, theta, val_batch.boundary_a_points, 0.0)
    rms_b = boundary_rms(ansatz, theta, val_batch.boundary_b_points, 1.0)
    converged = (
        cfg.max_iterations > 0
        and rms_a <= cfg.boundary_tolerance
        and rms_b <= cfg.boundary_tolerance
        and _flat_window_reached(evals, cfg.loss_window)
    )
    return TrainReport(
        loss_history=history,
        final_theta=theta,
        boundary_rms_a=rms_a,
        boundary_rms_b=rms_b,
        converged=converged,
        final_adam_state=state,
    )


def tune_penalty(ansatz, theta0, train_batch, val_batch, cfg, penalty_grid):
    """Smallest penalty weight in the grid whose trained model meets the
    boundary tolerance on held-out boundary samples.

    Returns (chosen weight, met) where ``met`` is False when no grid value
    satisfies the tolerance; the largest value is then returned.
    """
    grid = list(penalty_grid)
    if not grid or sorted(grid) != grid:
        raise ValueError("penalty grid must be nonempty and ascending")
    for weight in grid:
        report = train(ansatz, theta0, train_batch, val_batch, replace(cfg, penalty_weight=weight))
        if (
            report.boundary_rms_a <= cfg.boundary_tolerance
            and report.boundary_rms_b <= cfg.boundary_tolerance
        ):
            return weight, True
    return grid[-1], False
