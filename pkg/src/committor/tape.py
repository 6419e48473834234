"""Minimal reverse-mode differentiation over numpy arrays.

The training objective contains both network outputs and their input
gradients, so its parameter derivative is reverse mode applied on top of
an explicitly built forward-gradient graph.  This tape supports exactly
the operations that graph needs; values are float64 throughout and the
resulting parameter gradients are exact to rounding.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Var", "constant", "backward"]


class Var:
    """Node in the computation graph."""

    __slots__ = ("value", "grad", "parents", "vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self.parents = parents
        self.vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def add_grad(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g


def constant(value):
    return Var(value)


def _value(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (the reverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def backward(root):
    """Accumulate d root / d node into every reachable node's ``grad``."""
    if root.value.shape != ():
        raise ValueError("backward expects a scalar root")
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if isinstance(p, Var) and id(p) not in seen:
                stack.append((p, False))
    root.add_grad(np.asarray(1.0))
    for node in reversed(order):
        if node.vjp is not None and node.grad is not None:
            node.vjp(node.grad)


# --- operations -------------------------------------------------------------


def add(u, v):
    uv, vv = _value(u), _value(v)
    out = Var(uv + vv, parents=tuple(p for p in (u, v) if isinstance(p, Var)))

    def vjp(g):
        if isinstance(u, Var):
            u.add_grad(_unbroadcast(g, uv.shape))
        if isinstance(v, Var):
            v.add_grad(_unbroadcast(g, vv.shape))

    out.vjp = vjp
    return out


def mul(u, v):
    uv, vv = _value(u), _value(v)
    out = Var(uv * vv, parents=tuple(p for p in (u, v) if isinstance(p, Var)))

    def vjp(g):
        if isinstance(u, Var):
            u.add_grad(_unbroadcast(g * vv, uv.shape))
        if isinstance(v, Var):
            v.add_grad(_unbroadcast(g * uv, vv.shape))

    out.vjp = vjp
    return out


def scale_shift(u, scale=1.0, shift=0.0):
    out = Var(scale * u.value + shift, parents=(u,))

    def vjp(g):
        u.add_grad(scale * g)

    out.vjp = vjp
    return out


def square(u):
    out = Var(u.value * u.value, parents=(u,))

    def vjp(g):
        u.add_grad(2.0 * u.value * g)

    out.vjp = vjp
    return out


def tanh(z):
    a = np.tanh(z.value)
    out = Var(a, parents=(z,))

    def vjp(g):
        z.add_grad((1.0 - a * a) * g)

    out.vjp = vjp
    return out


def linear(a, w, b):
    """a @ w.T + b for batched inputs a of shape (n, fan_in)."""
    av = _value(a)
    out_val = av @ w.value.T + b.value
    parents = (w, b) + ((a,) if isinstance(a, Var) else ())
    out = Var(out_val, parents=parents)

    def vjp(g):
        w.add_grad(g.T @ av)
        b.add_grad(g.sum(axis=0))
        if isinstance(a, Var):
            a.add_grad(g @ w.value)

    out.vjp = vjp
    return out


def jac_first(w, n):
    """Input Jacobian of the first linear layer, broadcast to the batch:
    value[n, out, in] = w[out, in]."""
    out_val = np.broadcast_to(w.value, (n,) + w.value.shape).copy()
    out = Var(out_val, parents=(w,))

    def vjp(g):
        w.add_grad(g.sum(axis=0))

    out.vjp = vjp
    return out


def jac_linear(w, jac):
    """Push an input Jacobian (n, fan_in, d) through a linear layer."""
    jv = _value(jac)
    out_val = np.einsum("oi,nid->nod", w.value, jv, optimize=True)
    parents = (w,) + ((jac,) if isinstance(jac, Var) else ())
    out = Var(out_val, parents=parents)

    def vjp(g):
        w.add_grad(np.einsum("nod,nid->oi", g, jv, optimize=True))
        if isinstance(jac, Var):
            jac.add_grad(np.einsum("oi,nod->nid", w.value, g, optimize=True))

    out.vjp = vjp
    return out


def tanh_gate(a, z_jac):
    """Jacobian update across a tanh layer: (1 - a^2)[:, :, None] * z_jac,
    where ``a`` holds the layer's tanh activations."""
    gate = 1.0 - a.value * a.value
    out = Var(gate[:, :, None] * z_jac.value, parents=(a, z_jac))

    def vjp(g):
        z_jac.add_grad(gate[:, :, None] * g)
        a.add_grad(-2.0 * a.value * np.einsum("nid,nid->ni", z_jac.value, g, optimize=True))

    out.vjp = vjp
    return out


def sum_squares_last(u):
    """Row-wise squared Euclidean norm: (n, d) -> (n,)."""
    out = Var(np.einsum("nd,nd->n", u.value, u.value), parents=(u,))

    def vjp(g):
        u.add_grad(2.0 * u.value * g[:, None])

    out.vjp = vjp
    return out


def weighted_mean(u, weights=None):
    """Self-normalized weighted mean of a vector; plain mean when unweighted."""
    if weights is None:
        coeff = np.full(u.value.shape, 1.0 / u.value.size)
    else:
        weights = np.asarray(weights, dtype=float)
        coeff = weights / weights.sum()
    out = Var(np.dot(coeff, u.value), parents=(u,))

    def vjp(g):
        u.add_grad(coeff * g)

    out.vjp = vjp
    return out


def add_scalars(terms):
    vars_only = [t for t in terms if isinstance(t, Var)]
    total = sum(float(_value(t)) for t in terms)
    out = Var(total, parents=tuple(vars_only))

    def vjp(g):
        for t in vars_only:
            t.add_grad(g)

    out.vjp = vjp
    return out
