"""Training objective: batch loss value and its exact parameter gradient.

The loss is a Monte-Carlo estimate of

    (1/(1+2a)) E_interior |grad q|^2
      + (rho/(1+2a)) E_boundaryA q^2
      + (rho/(1+2a)) E_boundaryB (q - 1)^2

where each expectation is a (self-normalized, weighted) sample mean and
``a`` is the boundary-to-interior mixture ratio per side.  The parameter
gradient is obtained by reverse mode over the forward-gradient graph in
:mod:`committor.tape`; it is exact to rounding, never a finite difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .ansatz import param_count, singular_value_and_grad
from .errors import NumericalError

__all__ = ["LossGradient", "loss_and_grad", "loss_value", "residual_diagnostic"]


@dataclass
class LossGradient:
    value: float
    grad_theta: np.ndarray
    interior_term: float
    boundary_a_term: float
    boundary_b_term: float


def mixture_coefficients(rho, alpha):
    """Interior and boundary coefficients of the single-expectation form."""
    if alpha is None:
        raise ValueError("a boundary mixture ratio is required")
    if rho < 0 or alpha < 0:
        raise ValueError("penalty weight and mixture ratio must be nonnegative")
    denom = 1.0 + 2.0 * alpha
    return 1.0 / denom, rho / denom


def _theta_vars(ansatz, theta):
    """Wrap the flat parameter vector as per-layer tape variables."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (param_count(ansatz),):
        raise ValueError("theta length does not match architecture")
    nets, flat = [], []
    pos = 0
    for shape in ansatz.shapes:
        layers = []
        for fan_in, fan_out in shape.layer_dims():
            w = tape.Var(theta[pos : pos + fan_in * fan_out].reshape(fan_out, fan_in))
            pos += fan_in * fan_out
            b = tape.Var(theta[pos : pos + fan_out])
            pos += fan_out
            layers.append((w, b))
            flat.extend((w, b))
        nets.append(layers)
    return nets, flat


def _net_value(layers, x):
    a = x
    for w, b in layers[:-1]:
        a = tape.tanh(tape.linear(a, w, b))
    w, b = layers[-1]
    return tape.linear(a, w, b)  # (n, 1)


def _net_value_and_jac(layers, x):
    """Tape forward pass producing the scalar output and its input gradient."""
    n = x.shape[0]
    a = x
    jac = None
    for w, b in layers[:-1]:
        a = tape.tanh(tape.linear(a, w, b))
        if jac is None:
            jac = tape.tanh_gate(a, tape.jac_first(w, n))
        else:
            jac = tape.tanh_gate(a, tape.jac_linear(w, jac))
    w, b = layers[-1]
    value = tape.linear(a, w, b)  # (n, 1)
    if jac is None:
        grad = tape.jac_first(w, n)  # (n, 1, d)
    else:
        grad = tape.jac_linear(w, jac)
    return value, grad


def _squeeze_cols(var):
    out = tape.Var(var.value[:, 0], parents=(var,))

    def vjp(g):
        var.add_grad(g[:, None])

    out.vjp = vjp
    return out


def _squeeze_jac(var):
    out = tape.Var(var.value[:, 0, :], parents=(var,))

    def vjp(g):
        var.add_grad(g[:, None, :])

    out.vjp = vjp
    return out


def _ansatz_values(ansatz, nets, x):
    """q on a batch as a tape variable (no input gradient)."""
    total = _squeeze_cols(_net_value(nets[0], x))
    for term, layers in zip(ansatz.singular_terms, nets[1:]):
        s, _ = singular_value_and_grad(term, x)
        total = tape.add(total, tape.mul(_squeeze_cols(_net_value(layers, x)), s))
    if ansatz.output_map == "affine_half":
        total = tape.scale_shift(total, 0.5, 0.5)
    return total


def _ansatz_input_grad(ansatz, nets, x):
    """grad_x q on a batch as a tape variable of shape (n, d)."""
    value0, jac0 = _net_value_and_jac(nets[0], x)
    grad = _squeeze_jac(jac0)
    for term, layers in zip(ansatz.singular_terms, nets[1:]):
        s, gs = singular_value_and_grad(term, x)
        nv, nj = _net_value_and_jac(layers, x)
        # product rule: grad(net * S) = grad(net) * S + net * grad(S)
        part = tape.add(tape.mul(_squeeze_jac(nj), s[:, None]), tape.mul(nv, gs))
        grad = tape.add(grad, part)
    if ansatz.output_map == "affine_half":
        grad = tape.scale_shift(grad, 0.5, 0.0)
    return grad


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        idx = int(np.argmax(~np.isfinite(np.atleast_1d(arr))))
        raise NumericalError(f"non-finite {what} at point index {idx}", point_index=idx)


def loss_and_grad(ansatz, theta, batch, rho, alpha=None):
    """Loss estimate on a sample batch and its exact gradient in theta."""
    alpha = batch.alpha if alpha is None else alpha
    interior = np.asarray(batch.interior_points, dtype=float)
    bnd_a = np.asarray(batch.boundary_a_points, dtype=float)
    bnd_b = np.asarray(batch.boundary_b_points, dtype=float)
    if interior.size == 0 and bnd_a.size == 0 and bnd_b.size == 0:
        raise ValueError("batch is empty")
    c_int, c_bnd = mixture_coefficients(rho, alpha)

    nets, flat_vars = _theta_vars(ansatz, theta)
    terms = []
    values = {"interior": 0.0, "boundary_a": 0.0, "boundary_b": 0.0}

    if interior.size:
        grad = _ansatz_input_grad(ansatz, nets, interior)
        sq = tape.sum_squares_last(grad)
        _check_finite(sq.value, "interior gradient")
        mean_sq = tape.weighted_mean(sq, batch.interior_weights)
        values["interior"] = c_int * float(mean_sq.value)
        terms.append(tape.scale_shift(mean_sq, c_int, 0.0))
    if bnd_a.size:
        qa = _ansatz_values(ansatz, nets, bnd_a)
        _check_finite(qa.value, "boundary-A value")
        term_a = tape.weighted_mean(tape.square(qa))
        values["boundary_a"] = c_bnd * float(term_a.value)
        terms.append(tape.scale_shift(term_a, c_bnd, 0.0))
    if bnd_b.size:
        qb = _ansatz_values(ansatz, nets, bnd_b)
        _check_finite(qb.value, "boundary-B value")
        term_b = tape.weighted_mean(tape.square(tape.scale_shift(qb, 1.0, -1.0)))
        values["boundary_b"] = c_bnd * float(term_b.value)
        terms.append(tape.scale_shift(term_b, c_bnd, 0.0))

    total = tape.add_scalars(terms)
    tape.backward(total)
    grads = []
    for v in flat_vars:
        grads.append((v.grad if v.grad is not None else np.zeros_like(v.value)).ravel())
    grad_theta = np.concatenate(grads)
    _check_finite(grad_theta, "parameter gradient")
    return LossGradient(
        value=float(total.value),
        grad_theta=grad_theta,
        interior_term=values["interior"],
        boundary_a_term=values["boundary_a"],
        boundary_b_term=values["boundary_b"],
    )


def loss_value(ansatz, theta, batch, rho, alpha=None):
    """Loss estimate alone, via the plain-numpy forward path (no tape)."""
    from .ansatz import evaluate, evaluate_with_gradient

    alpha = batch.alpha if alpha is None else alpha
    c_int, c_bnd = mixture_coefficients(rho, alpha)
    total = 0.0
    interior = np.asarray(batch.interior_points, dtype=float)
    if interior.size:
        _, g = evaluate_with_gradient(ansatz, theta, interior)
        sq = np.einsum("nd,nd->n", g, g)
        w = batch.interior_weights
        if w is None:
            total += c_int * sq.mean()
        else:
            w = np.asarray(w, dtype=float)
            total += c_int * float(np.dot(w, sq) / w.sum())
    bnd_a = np.asarray(batch.boundary_a_points, dtype=float)
    if bnd_a.size:
        total += c_bnd * float(np.mean(evaluate(ansatz, theta, bnd_a) ** 2))
    bnd_b = np.asarray(batch.boundary_b_points, dtype=float)
    if bnd_b.size:
        total += c_bnd * float(np.mean((evaluate(ansatz, theta, bnd_b) - 1.0) ** 2))
    return total


def residual_diagnostic(ansatz, theta, potential, temperature, points, h=1e-3):
    """Backward-operator residual T * lap(q) - grad U . grad q per point.

    The Laplacian is estimated by central differences of the analytic input
    gradient with step ``h``; this is a convergence diagnostic, not a
    training signal.
    """
    from .ansatz import evaluate_with_gradient

    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    _, g0 = evaluate_with_gradient(ansatz, theta, points)
    lap = np.zeros(n)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        _, gp = evaluate_with_gradient(ansatz, theta, points + e)
        _, gm = evaluate_with_gradient(ansatz, theta, points - e)
        lap += (gp[:, i] - gm[:, i]) / (2.0 * h)
    drift = potential.gradient(points)
    return temperature * lap - np.einsum("nd,nd->n", drift, g0)
