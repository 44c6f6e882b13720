"""Collocation matrix ``H = [H_1 ... H_J]``, right-hand side and the
neighbor blocks of ``H^T H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import WindowSet
from .calculus import Jet2
from .geometry import PointSet, points_in_box
from .reduction import reduced_localized_jets


@dataclass(frozen=True)
class LinearOperatorSpec:
    """A linear second-order differential operator acting on jets."""

    name: str
    apply: Callable[[Jet2], np.ndarray] = field(repr=False, compare=False)

    def __call__(self, jet: Jet2) -> np.ndarray:
        return self.apply(jet)


def minus_laplacian() -> LinearOperatorSpec:
    return LinearOperatorSpec("minus_laplacian", lambda u: -u.laplacian())


def reaction_diffusion() -> LinearOperatorSpec:
    return LinearOperatorSpec("reaction_diffusion", lambda u: -u.laplacian() + u.value)


def advection_diffusion(kappa: float) -> LinearOperatorSpec:
    """``u_t + u_x - kappa u_xx`` on space-time points ordered ``(x, t)``."""

    def apply(u: Jet2) -> np.ndarray:
        return u.grad[..., 1] + u.grad[..., 0] - kappa * u.hess[..., 0, 0]

    return LinearOperatorSpec(f"advection_diffusion({kappa!r})", apply)


class AssemblyError(RuntimeError):
    pass


class BlockSystem:
    """Block-sparse least-squares system.

    ``blocks[j]`` is dense over the collocation rows ``rows[j]`` inside box j
    and the ``p_j`` reduced columns of subdomain j.  ``F`` has one column per
    solution component.
    """

    def __init__(self, blocks, rows, F, N):
        self.blocks = list(blocks)
        self.rows = list(rows)
        F = np.asarray(F, dtype=float)
        self.F = F[:, None] if F.ndim == 1 else F
        self.N = int(N)
        widths = [blk.shape[1] for blk in self.blocks]
        self.column_offsets = np.concatenate([[0], np.cumsum(widths)]).astype(int)
        self.p = int(self.column_offsets[-1])

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def columns(self, j: int) -> slice:
        return slice(self.column_offsets[j], self.column_offsets[j + 1])

    def matvec(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape[0] != self.p:
            raise ValueError(f"expected leading dimension {self.p}, got {w.shape[0]}")
        out = np.zeros((self.N,) + w.shape[1:])
        for j, blk in enumerate(self.blocks):
            out[self.rows[j]] += blk @ w[self.columns(j)]
        return out

    def matvec_transpose(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.N:
            raise ValueError(f"expected leading dimension {self.N}, got {r.shape[0]}")
        out = np.empty((self.p,) + r.shape[1:])
        for j, blk in enumerate(self.blocks):
            out[self.columns(j)] = blk.T @ r[self.rows[j]]
        return out

    def normal_matvec(self, w: np.ndarray) -> np.ndarray:
        return self.matvec_transpose(self.matvec(w))

    def normal_rhs(self) -> np.ndarray:
        return self.matvec_transpose(self.F)

    def to_dense(self) -> np.ndarray:
        H = np.zeros((self.N, self.p))
        for j, blk in enumerate(self.blocks):
            H[np.ix_(self.rows[j], np.arange(self.p)[self.columns(j)])] = blk
        return H

    def nnz(self) -> int:
        return int(sum(np.count_nonzero(b) for b in self.blocks))


def matvec(H: BlockSystem, w):
    return H.matvec(w)


def matvec_transpose(H: BlockSystem, r):
    return H.matvec_transpose(r)


def assemble(problem, dec, windows: WindowSet, reduced_bases, collocation: PointSet) -> BlockSystem:
    """Apply the problem operator to every reduced localized basis function."""
    op = problem.operator
    cop = problem.constraint
    pts = collocation.points
    blocks, rows = [], []
    for j, rlb in enumerate(reduced_bases):
        idx = points_in_box(dec.subdomains[j], pts)
        if idx.size == 0:
            raise AssemblyError(f"subdomain {j} contains no collocation points")
        jets = reduced_localized_jets(windows, j, rlb, cop, pts[idx])
        blk = op(jets)
        bad = ~np.isfinite(blk)
        if bad.any():
            i = idx[np.argwhere(bad)[0][0]]
            raise AssemblyError(f"non-finite entry at point {i} ({pts[i]}) in subdomain {j}")
        blocks.append(np.ascontiguousarray(blk))
        rows.append(idx)
    F = problem.rhs(pts) - np.stack([op(cop.G[c](pts)) for c in range(cop.components)], axis=-1)
    if not np.all(np.isfinite(F)):
        raise AssemblyError("non-finite right-hand side")
    return BlockSystem(blocks, rows, F, len(pts))


class NormalBlocks:
    """Neighbor blocks of ``H^T H``; ``blocks[(a, b)] = H_a^T H_b``."""

    def __init__(self, blocks: dict, column_offsets: np.ndarray):
        self.blocks = blocks
        self.column_offsets = np.asarray(column_offsets)
        self.p = int(self.column_offsets[-1])

    def block(self, a: int, b: int) -> np.ndarray | None:
        return self.blocks.get((a, b))

    def gather(self, subdomains) -> np.ndarray:
        """Dense submatrix over the columns of the listed subdomains."""
        offs = self.column_offsets
        sizes = [offs[a + 1] - offs[a] for a in subdomains]
        starts = np.concatenate([[0], np.cumsum(sizes)])
        A = np.zeros((starts[-1], starts[-1]))
        for ia, a in enumerate(subdomains):
            for ib, b in enumerate(subdomains):
                blk = self.blocks.get((a, b))
                if blk is not None:
                    A[starts[ia]:starts[ia + 1], starts[ib]:starts[ib + 1]] = blk
        return A

    def to_dense(self) -> np.ndarray:
        return self.gather(range(len(self.column_offsets) - 1))


def normal_blocks(H: BlockSystem, neighbor_sets) -> NormalBlocks:
    blocks = {}
    for a in range(H.num_blocks):
        blocks[(a, a)] = H.blocks[a].T @ H.blocks[a]
        for b in neighbor_sets[a]:
            if b <= a:
                continue
            _, ia, ib = np.intersect1d(H.rows[a], H.rows[b], assume_unique=True, return_indices=True)
            if ia.size == 0:
                continue
            blk = H.blocks[a][ia].T @ H.blocks[b][ib]
            blocks[(a, b)] = blk
            blocks[(b, a)] = blk.T
    return NormalBlocks(blocks, H.column_offsets)


def export_matrix_market(H: BlockSystem, path) -> None:
    """Plain-text coordinate format: ``N p nnz`` then 1-based ``row col value``."""
    with open(path, "w") as fh:
        fh.write(f"{H.N} {H.p} {H.nnz()}\n")
        for j, blk in enumerate(H.blocks):
            r, c = np.nonzero(blk)
            for i, k in zip(r, c):
                fh.write(f"{H.rows[j][i] + 1} {H.column_offsets[j] + k + 1} {float(blk[i, k])!r}\n")


def export_dense(A: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.size}\n")
        for i in range(A.shape[0]):
            for k in range(A.shape[1]):
                fh.write(f"{i + 1} {k + 1} {float(A[i, k])!r}\n")
