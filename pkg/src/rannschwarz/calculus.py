"""Second-order forward-mode jets.

A :class:`Jet2` bundles the value, gradient and Hessian of a scalar field at a
batch of points.  Arrays broadcast like numpy: for batch shape ``S`` the value
has shape ``S``, the gradient ``S + (d,)`` and the Hessian ``S + (d, d)``.
Every operation here builds Hessians from elementwise-symmetric terms, so the
stored matrix equals its transpose bitwise.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class ScalarTriple(NamedTuple):
    """Value and first two derivatives of a univariate function."""

    f: np.ndarray
    df: np.ndarray
    d2f: np.ndarray


class Jet2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @property
    def dim(self) -> int:
        return self.grad.shape[-1]

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def __repr__(self):
        return f"Jet2(shape={self.shape}, dim={self.dim})"

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet2(self.value[idx], self.grad[idx], self.hess[idx])

    def expand(self, axis: int = -1) -> "Jet2":
        """Insert a broadcast axis into the batch shape."""
        nb = self.value.ndim
        if axis < 0:
            axis += nb + 1
        return Jet2(
            np.expand_dims(self.value, axis),
            np.expand_dims(self.grad, axis),
            np.expand_dims(self.hess, axis),
        )

    def laplacian(self) -> np.ndarray:
        return np.trace(self.hess, axis1=-2, axis2=-1)

    def combine(self, V: np.ndarray) -> "Jet2":
        """Linear combinations along the last batch axis: ``jet @ V``."""
        value = self.value @ V
        grad = np.einsum("...md,mp->...pd", self.grad, V)
        hess = np.einsum("...mde,mp->...pde", self.hess, V)
        # einsum does not promise the same summation order for (d, e) and (e, d)
        hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
        return Jet2(value, grad, hess)

    def sum(self, axis: int = 0) -> "Jet2":
        if axis < 0:
            axis += self.value.ndim
        return Jet2(self.value.sum(axis), self.grad.sum(axis), self.hess.sum(axis))

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.grad, self.hess)
        return jet_add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return jet_scale(self, -1.0)

    def __sub__(self, other):
        if not isinstance(other, Jet2):
            return self + (-other)
        return jet_add(self, jet_scale(other, -1.0))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return jet_scale(self, other)
        return jet_mul(self, other)

    __rmul__ = __mul__


def jet_const(c, d: int, shape: tuple = ()) -> Jet2:
    value = np.broadcast_to(np.asarray(c, dtype=float), shape).copy()
    return Jet2(value, np.zeros(shape + (d,)), np.zeros(shape + (d, d)))


def jet_variable(x, axis: int, scale: float = 1.0) -> Jet2:
    """Seed coordinate ``axis`` of the points ``x`` (shape ``(..., d)``).

    The value is the raw coordinate; ``scale`` only enters the gradient, which
    is how the chain rule of an affine normalization is carried.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if not 0 <= axis < d:
        raise ValueError(f"axis {axis} out of range for dimension {d}")
    batch = x.shape[:-1]
    grad = np.zeros(batch + (d,))
    grad[..., axis] = scale
    return Jet2(x[..., axis].copy(), grad, np.zeros(batch + (d, d)))


def _check_dims(a: Jet2, b: Jet2):
    if a.dim != b.dim:
        raise ValueError(f"jet dimension mismatch: {a.dim} vs {b.dim}")


def jet_add(a: Jet2, b: Jet2) -> Jet2:
    _check_dims(a, b)
    return Jet2(a.value + b.value, a.grad + b.grad, a.hess + b.hess)


def jet_scale(a: Jet2, c) -> Jet2:
    c = np.asarray(c, dtype=float)
    return Jet2(c * a.value, c[..., None] * a.grad, c[..., None, None] * a.hess)


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    """Leibniz rule for value, gradient and Hessian."""
    _check_dims(a, b)
    av, ag, ah = a.value, a.grad, a.hess
    bv, bg, bh = b.value, b.grad, b.hess
    value = av * bv
    grad = av[..., None] * bg + bv[..., None] * ag
    cross = ag[..., :, None] * bg[..., None, :] + bg[..., :, None] * ag[..., None, :]
    hess = av[..., None, None] * bh + bv[..., None, None] * ah + cross
    return Jet2(value, grad, hess)


def jet_compose(t: ScalarTriple, a: Jet2) -> Jet2:
    """Chain rule for ``g(a)`` where ``t`` holds ``g, g', g''`` at ``a.value``."""
    f, df, d2f = (np.asarray(v, dtype=float) for v in t)
    grad = df[..., None] * a.grad
    outer = a.grad[..., :, None] * a.grad[..., None, :]
    hess = df[..., None, None] * a.hess + d2f[..., None, None] * outer
    return Jet2(np.broadcast_to(f, a.value.shape).copy(), grad, hess)


def triple_identity(s) -> ScalarTriple:
    s = np.asarray(s, dtype=float)
    return ScalarTriple(s, np.ones_like(s), np.zeros_like(s))


def triple_tanh(s) -> ScalarTriple:
    th = np.tanh(s)
    sech2 = 1.0 - th * th
    return ScalarTriple(th, sech2, -2.0 * th * sech2)


def triple_sin(s) -> ScalarTriple:
    sn, cs = np.sin(s), np.cos(s)
    return ScalarTriple(sn, cs, -sn)


def triple_cos(s) -> ScalarTriple:
    sn, cs = np.sin(s), np.cos(s)
    return ScalarTriple(cs, -sn, -cs)


def triple_reciprocal(s) -> ScalarTriple:
    inv = 1.0 / np.asarray(s, dtype=float)
    return ScalarTriple(inv, -inv * inv, 2.0 * inv * inv * inv)


TRIPLES = {"tanh": triple_tanh, "sin": triple_sin, "cos": triple_cos}


def jet_apply(name: str, a: Jet2) -> Jet2:
    """Compose a named elementary function with ``a``."""
    return jet_compose(TRIPLES[name](a.value), a)


def jet_tanh(a: Jet2) -> Jet2:
    return jet_compose(triple_tanh(a.value), a)


def jet_sin(a: Jet2) -> Jet2:
    return jet_compose(triple_sin(a.value), a)


def jet_cos(a: Jet2) -> Jet2:
    return jet_compose(triple_cos(a.value), a)


def jet_divide(a: Jet2, b: Jet2) -> Jet2:
    return jet_mul(a, jet_compose(triple_reciprocal(b.value), b))


def hessian_is_symmetric(a: Jet2) -> bool:
    return bool(np.array_equal(a.hess, np.swapaxes(a.hess, -1, -2)))
