"""One-level overlapping Schwarz preconditioners (AS, SAS, RAS) for ``H^T H``."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .assembly import NormalBlocks
from .geometry import CartesianDecomposition

KINDS = ("AS", "SAS", "RAS")


@dataclass(frozen=True, eq=False)
class IndexSets:
    S: list
    owner: np.ndarray
    multiplicity: np.ndarray
    members: list  # subdomains whose columns make up S[i]


def build_index_sets(dec: CartesianDecomposition, column_offsets) -> IndexSets:
    """Extended index sets: ``S_i`` holds every column of every neighbor of i."""
    offs = np.asarray(column_offsets, dtype=int)
    J = len(offs) - 1
    p = int(offs[-1])
    owner = np.repeat(np.arange(J), np.diff(offs))
    mult = np.zeros(p, dtype=int)
    S, members = [], []
    for i in range(J):
        nb = sorted(dec.neighbor_sets[i])
        idx = np.concatenate([np.arange(offs[a], offs[a + 1]) for a in nb])
        S.append(idx)
        members.append(nb)
        mult[idx] += 1
    return IndexSets(S, owner, mult, members)


class LocalSolver:
    """Column-pivoted QR of a local matrix with a pseudo-inverse fallback.

    With ``A P = Q R`` and numerical rank ``r`` (pivots below ``rcond`` times
    the leading pivot are dropped; ``rcond=None`` means ``n * eps``, the
    usual floating-point rank cutoff) the rank-deficient case uses a complete
    orthogonal decomposition ``R[:r] = T^T Z^T``, which yields the
    minimum-norm solution of the truncated system.

    With ``symmetric=True`` (the local normal matrices are symmetric) the
    pseudo-inverse is formed once from the factors and replaced by its
    symmetric part.  The exact pseudo-inverse is symmetric, so this never
    increases the error, and it keeps the additive Schwarz operator
    symmetric to rounding level even when ``cond(A)`` is near ``1/eps``,
    where triangular solves alone leave asymmetry of order ``cond(A) eps``.
    """

    def __init__(self, A: np.ndarray, rcond: float | None = None, symmetric: bool = False):
        n = A.shape[0]
        if rcond is None:
            rcond = max(n, 1) * np.finfo(float).eps
        self.rcond = rcond
        Q, R, piv = sla.qr(A, pivoting=True)
        diag = np.abs(np.diag(R))
        lead = diag[0] if n else 0.0
        self.n = n
        self.rank = int(np.count_nonzero(diag > rcond * lead)) if lead > 0 else 0
        self.perm = piv
        r = self.rank
        self.Q1 = Q[:, :r]
        if r == n:
            self.R = R
            self.Z = None
        else:
            Z, T = sla.qr(R[:r].T, mode="economic")
            self.Z = Z
            self.R = T
        self.pivots = diag
        self.inverse = None
        if symmetric:
            X = self._solve_factored(np.eye(n))
            self.inverse = 0.5 * (X + X.T)

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.inverse is not None:
            return self.inverse @ b
        return self._solve_factored(b)

    def _solve_factored(self, b: np.ndarray) -> np.ndarray:
        c = self.Q1.T @ b
        out = np.zeros_like(b, dtype=float)
        if self.rank == 0:
            return out
        if self.Z is None:
            y = sla.solve_triangular(self.R, c)
        else:
            y = self.Z @ sla.solve_triangular(self.R, c, trans="T")
        out[self.perm] = y
        return out

    def solve_transpose(self, b: np.ndarray) -> np.ndarray:
        if self.inverse is not None:
            return self.inverse @ b
        out = np.zeros_like(b, dtype=float)
        if self.rank == 0:
            return out
        bp = b[self.perm]
        if self.Z is None:
            y = sla.solve_triangular(self.R, bp, trans="T")
        else:
            y = sla.solve_triangular(self.R, self.Z.T @ bp)
        return self.Q1 @ y

    def condition_estimate(self) -> float:
        r = self.rank
        if r == 0:
            return float("inf")
        return float(self.pivots[0] / self.pivots[r - 1])


class SchwarzPreconditioner:
    """``M^{-1} v = sum_i R_i^T D_i A_i^{-1} R_i v``.

    AS uses ``D_i = I``; SAS uses ``1/multiplicity``; RAS keeps only the
    columns owned by subdomain i.  Contributions are summed in subdomain
    order so results are reproducible.
    """

    def __init__(self, kind: str, index_sets: IndexSets, local, weights, setup_time: float = 0.0):
        self.kind = kind
        self.index_sets = index_sets
        self.local = local
        self.weights = weights
        self.setup_time = setup_time
        self.p = index_sets.owner.size

    @property
    def local_ranks(self) -> list:
        return [s.rank for s in self.local]

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.p:
            raise ValueError(f"expected leading dimension {self.p}, got {v.shape[0]}")
        out = np.zeros_like(v)
        for S, solver, D in zip(self.index_sets.S, self.local, self.weights):
            y = solver.solve(v[S])
            if D is not None:
                y = D.reshape((-1,) + (1,) * (y.ndim - 1)) * y
            out[S] += y
        return out

    def apply_transpose(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.p:
            raise ValueError(f"expected leading dimension {self.p}, got {v.shape[0]}")
        out = np.zeros_like(v)
        for S, solver, D in zip(self.index_sets.S, self.local, self.weights):
            x = v[S]
            if D is not None:
                x = D.reshape((-1,) + (1,) * (x.ndim - 1)) * x
            out[S] += solver.solve_transpose(x)
        return out

    __call__ = apply

    def weight_sum(self) -> np.ndarray:
        """Diagonal of ``sum_i R_i^T D_i R_i``."""
        total = np.zeros(self.p)
        for S, D in zip(self.index_sets.S, self.weights):
            total[S] += 1.0 if D is None else D
        return total


def partition_weights(kind: str, index_sets: IndexSets) -> list:
    if kind not in KINDS:
        raise ValueError(f"unknown preconditioner kind {kind!r}")
    out = []
    for i, S in enumerate(index_sets.S):
        if kind == "AS":
            out.append(None)
        elif kind == "SAS":
            out.append(1.0 / index_sets.multiplicity[S])
        else:
            out.append((index_sets.owner[S] == i).astype(float))
    return out


def build_preconditioner(kind: str, nb: NormalBlocks, index_sets: IndexSets, rcond: float | None = None) -> SchwarzPreconditioner:
    t0 = time.perf_counter()
    weights = partition_weights(kind, index_sets)
    local = []
    for i, members in enumerate(index_sets.members):
        if len(index_sets.S[i]) == 0:
            raise ValueError(f"empty index set for subdomain {i}")
        local.append(LocalSolver(nb.gather(members), rcond, symmetric=True))
    return SchwarzPreconditioner(kind, index_sets, local, weights, time.perf_counter() - t0)


def write_local_diagnostics(path, precond: SchwarzPreconditioner) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subdomain", "size", "rank", "cond_estimate"])
        for i, s in enumerate(precond.local):
            w.writerow([i, s.n, s.rank, repr(s.condition_estimate())])
