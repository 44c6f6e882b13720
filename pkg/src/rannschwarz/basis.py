"""Random-feature bases, cosine partition-of-unity windows and the
constraining operator ``u = L * (network) + G``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .calculus import Jet2, jet_compose, jet_const, jet_mul, triple_reciprocal, TRIPLES
from .geometry import Box, CartesianDecomposition, normalize_to_box

ACTIVATIONS = ("tanh", "sin")


@dataclass(frozen=True, eq=False)
class RandomBasis:
    R: np.ndarray
    b: np.ndarray
    activation: str
    seed: int
    subdomain: int = 0

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def d(self) -> int:
        return self.R.shape[1]


def init_basis(seed: int, m: int, d: int, activation: str = "tanh", subdomain: int = 0) -> RandomBasis:
    """Hidden weights and biases drawn from U(-1, 1).

    The generator is keyed on ``(seed, subdomain)`` so every subdomain gets an
    independent stream from one user-facing seed.
    """
    if m < 1:
        raise ValueError(f"hidden width must be positive, got {m}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng([int(seed), int(subdomain)])
    R = rng.uniform(-1.0, 1.0, size=(m, d))
    b = rng.uniform(-1.0, 1.0, size=m)
    return RandomBasis(R, b, activation, int(seed), int(subdomain))


def init_bases(dec: CartesianDecomposition, seed: int, m: int, activation: str = "tanh") -> list:
    return [init_basis(seed, m, dec.dim, activation, j) for j in range(dec.num_subdomains)]


def phi_values(basis: RandomBasis, box: Box, x) -> np.ndarray:
    xhat, _ = normalize_to_box(box, x)
    z = xhat @ basis.R.T + basis.b
    return np.tanh(z) if basis.activation == "tanh" else np.sin(z)


def phi_jets(basis: RandomBasis, box: Box, x) -> Jet2:
    """Neuron outputs with derivatives in the original coordinates.

    Batch shape of the result is ``(n, m)`` for ``n`` points.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xhat, scale = normalize_to_box(box, x)
    n, d = x.shape
    z = xhat @ basis.R.T + basis.b
    dz = basis.R * scale
    pre = Jet2(z, np.broadcast_to(dz, (n,) + dz.shape), np.zeros((1, 1, d, d)))
    return jet_compose(TRIPLES[basis.activation](z), pre)


class WindowSet:
    """Normalized squared-cosine bumps over the subdomain boxes.

    ``w_j(x) = prod_i [1 + cos(pi (x_i - mu_i) / sigma_i)]^2`` inside box j
    and zero outside; ``omega_j = w_j / sum_k w_k``.  Axes that are not split
    contribute a constant factor of one, which leaves every quotient unchanged
    and keeps the windows nonzero up to the domain boundary.
    """

    def __init__(self, dec: CartesianDecomposition):
        self.decomposition = dec
        self.centers = dec.centers
        self.half_widths = dec.half_widths
        self.active = dec.active_axes

    def __len__(self):
        return self.decomposition.num_subdomains

    def _factor(self, k: int, axis: int, x: np.ndarray):
        mu = self.centers[k, axis]
        sigma = self.half_widths[k, axis]
        c = np.pi / sigma
        s = c * (x[:, axis] - mu)
        inside = np.abs(s) <= np.pi
        cs, sn = np.cos(s), np.sin(s)
        one = 1.0 + cs
        g = np.where(inside, one * one, 0.0)
        dg = np.where(inside, -2.0 * one * sn * c, 0.0)
        d2g = np.where(inside, (2.0 * sn * sn - 2.0 * one * cs) * c * c, 0.0)
        return g, dg, d2g

    def bump_value(self, k: int, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        out = np.ones(x.shape[0])
        for axis in np.flatnonzero(self.active):
            out *= self._factor(k, axis, x)[0]
        return out

    def bump_jet(self, k: int, x: np.ndarray) -> Jet2:
        x = np.atleast_2d(x)
        n, d = x.shape
        jet = jet_const(1.0, d, (n,))
        for axis in np.flatnonzero(self.active):
            g, dg, d2g = self._factor(k, axis, x)
            grad = np.zeros((n, d))
            grad[:, axis] = dg
            hess = np.zeros((n, d, d))
            hess[:, axis, axis] = d2g
            jet = jet_mul(jet, Jet2(g, grad, hess))
        return jet

    def window_value(self, j: int, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        num = self.bump_value(j, x)
        den = np.zeros_like(num)
        for k in self.decomposition.neighbor_sets[j]:
            den += self.bump_value(k, x)
        safe = np.where(num > 0, den, 1.0)
        return num / safe

    def window_jet(self, j: int, x: np.ndarray) -> Jet2:
        x = np.atleast_2d(x)
        num = self.bump_jet(j, x)
        den = None
        for k in self.decomposition.neighbor_sets[j]:
            bk = self.bump_jet(k, x)
            den = bk if den is None else den + bk
        # where w_j vanishes its whole jet vanishes, so any nonzero denominator works
        safe = np.where(num.value > 0, den.value, 1.0)
        den = Jet2(safe, den.grad, den.hess)
        return jet_mul(num, jet_compose(triple_reciprocal(den.value), den))


def window_jet(ws: WindowSet, j: int, x) -> Jet2:
    return ws.window_jet(j, x)


JetField = Callable[[np.ndarray], Jet2]


@dataclass(frozen=True, eq=False)
class ConstrainingOperator:
    """Factor ``L`` (shared by all components) and per-component offsets ``G``."""

    L: JetField
    G: Sequence[JetField]

    @property
    def components(self) -> int:
        return len(self.G)


def constraint_jets(cop: ConstrainingOperator, x, component: int = 0):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return cop.L(x), cop.G[component](x)


def localized_basis_jets(ws: WindowSet, j: int, basis_j: RandomBasis, cop: ConstrainingOperator, x) -> Jet2:
    """Jets of ``L * omega_j * phi_j^k``; batch shape ``(n, m)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    box = ws.decomposition.subdomains[j]
    lw = jet_mul(cop.L(x), ws.window_jet(j, x))
    out = jet_mul(lw.expand(-1), phi_jets(basis_j, box, x))
    outside = ~np.all((x >= box.lo) & (x <= box.hi), axis=-1)
    if outside.any():
        out.value[outside] = 0.0
        out.grad[outside] = 0.0
        out.hess[outside] = 0.0
    return out
