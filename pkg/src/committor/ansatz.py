"""Committor approximation: tanh networks multiplied by explicit singular
basis functions.

The approximation is

    q(x) = sum_k  net_k(x) * S_k(x)  +  trunk(x)

optionally followed by the affine map q -> (q + 1) / 2.  Each S_k is an
explicitly singular function (inverse power of the distance to a fixed
center, or its logarithm) that captures boundary-layer behavior a smooth
tanh network cannot.  Parameters of all sub-networks live in one flat
vector with a fixed layout: trunk first, then each singular-factor
network; within a network layer by layer, weight matrix before bias.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MlpShape",
    "SingularTerm",
    "CommittorAnsatz",
    "param_count",
    "init_theta",
    "split_theta",
    "evaluate",
    "gradient",
    "evaluate_with_gradient",
    "singular_value_and_grad",
    "save_checkpoint",
    "load_checkpoint",
]

OUTPUT_MAPS = ("identity", "affine_half")
SINGULAR_KINDS = ("inverse_power", "log_distance")


@dataclass(frozen=True)
class MlpShape:
    """Fully connected tanh network with a single linear output."""

    input_dim: int
    hidden_widths: tuple

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1 or any(w < 1 for w in self.hidden_widths):
            raise ValueError("layer widths must be >= 1")

    def layer_dims(self):
        dims = (self.input_dim,) + self.hidden_widths + (1,)
        return list(zip(dims[:-1], dims[1:]))

    def param_count(self):
        return sum(fi * fo + fo for fi, fo in self.layer_dims())


@dataclass(frozen=True)
class SingularTerm:
    """Singular basis function anchored at a fixed center.

    ``inverse_power``: 1 / |x - y|^(d-2), valid for d >= 3.
    ``log_distance``:  log |x - y|.
    """

    kind: str
    center: tuple

    def __post_init__(self):
        if self.kind not in SINGULAR_KINDS:
            raise ValueError(f"unknown singular kind {self.kind!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def center_array(self):
        return np.asarray(self.center, dtype=float)


def singular_value_and_grad(term, x):
    """S(x) and grad S(x) for a batch ``x`` of shape (n, d)."""
    x = np.asarray(x, dtype=float)
    d = x.shape[1]
    diff = x - term.center_array[None, :]
    r2 = np.sum(diff * diff, axis=1)
    if np.any(r2 == 0.0):
        raise ValueError("point coincides with a singular center")
    if term.kind == "inverse_power":
        if d < 3:
            raise ValueError("inverse_power singular term requires dimension >= 3")
        p = d - 2
        s = r2 ** (-p / 2.0)
        gs = (-p) * diff * (r2 ** (-(p + 2) / 2.0))[:, None]
    else:
        s = 0.5 * np.log(r2)
        gs = diff / r2[:, None]
    return s, gs


@dataclass(frozen=True)
class CommittorAnsatz:
    """Architecture description; parameters travel separately as a flat vector."""

    dimension: int
    trunk: MlpShape
    singular_terms: tuple = ()
    singular_shapes: tuple = ()
    output_map: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "singular_terms", tuple(self.singular_terms))
        object.__setattr__(self, "singular_shapes", tuple(self.singular_shapes))
        if self.output_map not in OUTPUT_MAPS:
            raise ValueError(f"unknown output map {self.output_map!r}")
        if len(self.singular_terms) != len(self.singular_shapes):
            raise ValueError("one shape per singular term is required")
        if self.trunk.input_dim != self.dimension:
            raise ValueError("trunk input dimension does not match ansatz dimension")
        for term, shape in zip(self.singular_terms, self.singular_shapes):
            if len(term.center) != self.dimension:
                raise ValueError("singular center dimension mismatch")
            if shape.input_dim != self.dimension:
                raise ValueError("singular network input dimension mismatch")

    @property
    def n_singular(self):
        return len(self.singular_terms)

    @property
    def shapes(self):
        return (self.trunk,) + self.singular_shapes


def param_count(ansatz):
    return sum(s.param_count() for s in ansatz.shapes)


def split_theta(ansatz, theta):
    """Views into ``theta`` as [(W, b), ...] per network, trunk first."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (param_count(ansatz),):
        raise ValueError(
            f"theta has length {theta.size}, architecture needs {param_count(ansatz)}"
        )
    nets = []
    pos = 0
    for shape in ansatz.shapes:
        layers = []
        for fan_in, fan_out in shape.layer_dims():
            w = theta[pos : pos + fan_in * fan_out].reshape(fan_out, fan_in)
            pos += fan_in * fan_out
            b = theta[pos : pos + fan_out]
            pos += fan_out
            layers.append((w, b))
        nets.append(layers)
    return nets


def init_theta(ansatz, seed):
    """Gaussian weights with standard deviation 1/sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    parts = []
    for shape in ansatz.shapes:
        for fan_in, fan_out in shape.layer_dims():
            w = rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in)
            parts.append(w.ravel())
            parts.append(np.zeros(fan_out))
    return np.concatenate(parts)


def _mlp_value(layers, x):
    a = x
    for w, b in layers[:-1]:
        a = np.tanh(a @ w.T + b)
    w, b = layers[-1]
    return (a @ w.T + b)[:, 0]


def _mlp_value_and_input_grad(layers, x):
    """Value and input Jacobian of a scalar tanh network, batched.

    Propagates J_l = d a_l / d x alongside the activations; the returned
    gradient is exact (chain rule), not a finite difference.
    """
    a = x
    jac = None  # (n, width, d); None encodes the identity at the input
    for w, b in layers[:-1]:
        z = a @ w.T + b
        a = np.tanh(z)
        gate = 1.0 - a * a
        if jac is None:
            jac = gate[:, :, None] * w[None, :, :]
        else:
            jac = gate[:, :, None] * np.einsum("oi,nid->nod", w, jac, optimize=True)
    w, b = layers[-1]
    value = (a @ w.T + b)[:, 0]
    if jac is None:  # purely linear network
        grad = np.broadcast_to(w[0], (x.shape[0], x.shape[1])).copy()
    else:
        grad = np.einsum("i,nid->nd", w[0], jac, optimize=True)
    return value, grad


def _as_points(ansatz, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.ndim != 2 or pts.shape[1] != ansatz.dimension:
        raise ValueError(
            f"expected points of dimension {ansatz.dimension}, got shape {x.shape}"
        )
    return pts, single


def evaluate(ansatz, theta, x):
    """q(x) for a single point or an (n, d) batch."""
    pts, single = _as_points(ansatz, x)
    nets = split_theta(ansatz, theta)
    out = _mlp_value(nets[0], pts)
    for term, layers in zip(ansatz.singular_terms, nets[1:]):
        s, _ = singular_value_and_grad(term, pts)
        out = out + _mlp_value(layers, pts) * s
    if ansatz.output_map == "affine_half":
        out = 0.5 * (out + 1.0)
    return float(out[0]) if single else out


def evaluate_with_gradient(ansatz, theta, x):
    """(q(x), grad_x q(x)) with the gradient computed analytically."""
    pts, single = _as_points(ansatz, x)
    nets = split_theta(ansatz, theta)
    value, grad = _mlp_value_and_input_grad(nets[0], pts)
    for term, layers in zip(ansatz.singular_terms, nets[1:]):
        s, gs = singular_value_and_grad(term, pts)
        nv, ng = _mlp_value_and_input_grad(layers, pts)
        value = value + nv * s
        grad = grad + ng * s[:, None] + nv[:, None] * gs
    if ansatz.output_map == "affine_half":
        value = 0.5 * (value + 1.0)
        grad = 0.5 * grad
    if single:
        return float(value[0]), grad[0]
    return value, grad


def gradient(ansatz, theta, x):
    return evaluate_with_gradient(ansatz, theta, x)[1]


# --- checkpoint serialization ----------------------------------------------


def _describe(ansatz):
    return {
        "dimension": ansatz.dimension,
        "trunk_hidden": list(ansatz.trunk.hidden_widths),
        "singular": [
            {"kind": t.kind, "center": list(t.center), "hidden": list(s.hidden_widths)}
            for t, s in zip(ansatz.singular_terms, ansatz.singular_shapes)
        ],
        "output_map": ansatz.output_map,
    }


def from_description(desc):
    d = int(desc["dimension"])
    trunk = MlpShape(d, tuple(desc["trunk_hidden"]))
    terms, shapes = [], []
    for s in desc.get("singular", []):
        terms.append(SingularTerm(s["kind"], tuple(s["center"])))
        shapes.append(MlpShape(d, tuple(s["hidden"])))
    return CommittorAnsatz(
        dimension=d,
        trunk=trunk,
        singular_terms=tuple(terms),
        singular_shapes=tuple(shapes),
        output_map=desc.get("output_map", "identity"),
    )


def save_checkpoint(path, ansatz, theta, extra=None):
    """Atomic write of architecture plus flat parameters (plus extra state)."""
    payload = {"architecture": _describe(ansatz), "theta": np.asarray(theta).tolist()}
    if extra:
        payload.update(extra)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    with open(path) as fh:
        payload = json.load(fh)
    ansatz = from_description(payload["architecture"])
    theta = np.asarray(payload["theta"], dtype=float)
    if theta.shape != (param_count(ansatz),):
        raise ValueError("checkpoint parameter vector does not match architecture")
    return ansatz, theta, payload
