"""Boxes, overlapping Cartesian decompositions and uniform point grids."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be 1-D arrays of equal length")
        if not 1 <= lo.size <= 4:
            raise ValueError(f"dimension must be in 1..4, got {lo.size}")
        if not np.all(lo < hi):
            raise ValueError(f"degenerate box: lo={lo}, hi={hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def contains(box: Box, x) -> np.ndarray | bool:
    """Closed-box membership; vectorized over leading axes of ``x``."""
    x = np.asarray(x, dtype=float)
    inside = np.all((x >= box.lo) & (x <= box.hi), axis=-1)
    return bool(inside) if inside.ndim == 0 else inside


def normalize_to_box(box: Box, x):
    """Affine map of ``x`` onto [-1, 1]^d relative to ``box``.

    Returns ``(xhat, scale)`` where ``scale = 2 / widths`` is the per-axis
    derivative of the map.
    """
    scale = 2.0 / box.widths
    xhat = (np.asarray(x, dtype=float) - box.center) * scale
    return xhat, scale


def denormalize_from_box(box: Box, xhat):
    return np.asarray(xhat, dtype=float) * (0.5 * box.widths) + box.center


@dataclass(frozen=True, eq=False)
class CartesianDecomposition:
    domain: Box
    per_axis_counts: tuple
    overlap_ratio: float
    subdomains: list
    centers: np.ndarray
    half_widths: np.ndarray
    neighbor_sets: list
    multi_indices: list = field(repr=False)

    @property
    def num_subdomains(self) -> int:
        return len(self.subdomains)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def active_axes(self) -> np.ndarray:
        """Axes split into two or more subdomains."""
        return np.asarray(self.per_axis_counts) >= 2


def build_decomposition(domain: Box, per_axis_counts, delta: float) -> CartesianDecomposition:
    """Uniform overlapping decomposition of ``domain``.

    Along an axis with ``l >= 2`` subdomains the centers sit at
    ``(j-1)/(l-1)`` and the half-width is ``(delta/2)/(l-1)``, both measured
    in units of the axis length.  An axis with ``l = 1`` is covered by a
    single box equal to the domain extent.  Boxes are not clipped to the
    domain.
    """
    counts = tuple(int(c) for c in per_axis_counts)
    if len(counts) != domain.dim:
        raise ValueError(f"need {domain.dim} per-axis counts, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise ValueError(f"per-axis counts must be >= 1, got {counts}")
    if not delta > 1:
        raise ValueError(f"overlap ratio must exceed 1, got {delta}")

    axis_centers, axis_half = [], []
    for i, l in enumerate(counts):
        length = domain.widths[i]
        if l == 1:
            axis_centers.append(np.array([domain.center[i]]))
            axis_half.append(0.5 * length)
        else:
            axis_centers.append(domain.lo[i] + length * np.arange(l) / (l - 1))
            axis_half.append(length * (delta / 2) / (l - 1))

    multi, centers, halves, boxes = [], [], [], []
    for idx in itertools.product(*(range(l) for l in counts)):
        mu = np.array([axis_centers[i][k] for i, k in enumerate(idx)])
        sigma = np.array(axis_half)
        multi.append(idx)
        centers.append(mu)
        halves.append(sigma)
        boxes.append(Box(mu - sigma, mu + sigma))

    J = len(boxes)
    neighbors = []
    for i in range(J):
        row = []
        for j in range(J):
            lo = np.maximum(boxes[i].lo, boxes[j].lo)
            hi = np.minimum(boxes[i].hi, boxes[j].hi)
            if np.all(lo < hi):
                row.append(j)
        neighbors.append(row)

    return CartesianDecomposition(
        domain=domain,
        per_axis_counts=counts,
        overlap_ratio=float(delta),
        subdomains=boxes,
        centers=np.array(centers),
        half_widths=np.array(halves),
        neighbor_sets=neighbors,
        multi_indices=multi,
    )


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray
    kind: str
    resolutions: tuple = ()

    def __len__(self):
        return self.points.shape[0]


def uniform_grid(domain: Box, per_axis_resolutions, kind: str = "collocation") -> PointSet:
    """Cell-centered tensor grid in lexicographic (last axis fastest) order."""
    res = tuple(int(r) for r in per_axis_resolutions)
    if len(res) != domain.dim:
        raise ValueError(f"need {domain.dim} resolutions, got {len(res)}")
    if any(r < 1 for r in res):
        raise ValueError(f"resolutions must be >= 1, got {res}")
    if kind not in ("collocation", "test"):
        raise ValueError(f"unknown point-set kind {kind!r}")
    axes = [
        domain.lo[i] + (np.arange(r) + 0.5) * (domain.widths[i] / r)
        for i, r in enumerate(res)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return PointSet(pts, kind, res)


def points_in_box(box: Box, points: np.ndarray) -> np.ndarray:
    return np.flatnonzero(contains(box, points))


def sample_interior(domain: Box, n: int, rng: np.random.Generator) -> np.ndarray:
    return domain.lo + rng.random((n, domain.dim)) * domain.widths


def sample_boundary(domain: Box, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points on the faces of ``domain`` (each point pinned to one face)."""
    x = sample_interior(domain, n, rng)
    axis = rng.integers(0, domain.dim, n)
    side = rng.integers(0, 2, n)
    x[np.arange(n), axis] = np.where(side == 0, domain.lo[axis], domain.hi[axis])
    return x
