"""Per-subdomain truncation of the localized basis by a reduced SVD."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .basis import ConstrainingOperator, RandomBasis, WindowSet, localized_basis_jets, phi_values
from .calculus import Jet2
from .geometry import PointSet, points_in_box


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    values: np.ndarray
    point_indices: np.ndarray
    subdomain: int


@dataclass(frozen=True, eq=False)
class ReducedLocalBasis:
    basis: RandomBasis
    V: np.ndarray
    singular_values: np.ndarray

    @property
    def p(self) -> int:
        return self.V.shape[1]


class EmptySubdomainError(ValueError):
    pass


def build_sample_matrix(ws: WindowSet, j: int, basis_j: RandomBasis, collocation: PointSet) -> SampleMatrix:
    """Values of ``omega_j * phi_j^k`` at the collocation points inside box j."""
    box = ws.decomposition.subdomains[j]
    idx = points_in_box(box, collocation.points)
    if idx.size == 0:
        raise EmptySubdomainError(f"subdomain {j} contains no collocation points")
    x = collocation.points[idx]
    values = ws.window_value(j, x)[:, None] * phi_values(basis_j, box, x)
    return SampleMatrix(values, idx, j)


def _fix_signs(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for k in range(V.shape[1]):
        nz = np.flatnonzero(V[:, k])
        if nz.size and V[nz[0], k] < 0:
            V[:, k] = -V[:, k]
    return V


def truncate(S: SampleMatrix, tau: float, basis: RandomBasis | None = None, relative: bool = False) -> ReducedLocalBasis:
    """Keep the right singular vectors whose singular values exceed ``tau``.

    ``tau`` is absolute unless ``relative`` is set, in which case it is scaled
    by the largest singular value.  At least one direction is always kept.
    """
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    _, sigma, Vt = np.linalg.svd(S.values, full_matrices=False)
    cut = tau * sigma[0] if relative and sigma.size else tau
    p = max(1, int(np.count_nonzero(sigma > cut)))
    V = _fix_signs(Vt[:p].T)
    return ReducedLocalBasis(basis, V, sigma)


def identity_reduction(basis: RandomBasis, sigma: np.ndarray | None = None) -> ReducedLocalBasis:
    """No truncation: ``V`` is the identity."""
    return ReducedLocalBasis(basis, np.eye(basis.m), np.array([]) if sigma is None else sigma)


def reduce_bases(ws: WindowSet, bases, collocation: PointSet, tau: float | None, relative: bool = False) -> list:
    out = []
    for j, basis in enumerate(bases):
        if tau is None:
            out.append(identity_reduction(basis))
        else:
            S = build_sample_matrix(ws, j, basis, collocation)
            out.append(truncate(S, tau, basis, relative))
    return out


def reduced_localized_jets(ws: WindowSet, j: int, rlb: ReducedLocalBasis, cop: ConstrainingOperator, x) -> Jet2:
    return localized_basis_jets(ws, j, rlb.basis, cop, x).combine(rlb.V)


def write_singular_values(path, reduced) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subdomain", "index", "sigma"])
        for j, rlb in enumerate(reduced):
            for k, s in enumerate(rlb.singular_values):
                w.writerow([j, k, repr(float(s))])
