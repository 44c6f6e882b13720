"""Built-in benchmark problems, the advection-diffusion reference solver and
error metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from .assembly import LinearOperatorSpec, advection_diffusion, minus_laplacian, reaction_diffusion
from .basis import ConstrainingOperator
from .calculus import Jet2, jet_const, jet_cos, jet_sin, jet_tanh, jet_variable
from .geometry import Box

PointFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    name: str
    domain: Box
    operator: LinearOperatorSpec
    rhs: PointFn  # (n, d) -> (n, components)
    constraint: ConstrainingOperator
    exact: Optional[PointFn] = None  # (n, d) -> (n, components)
    exact_jets: Optional[Callable[[np.ndarray], list]] = field(default=None, repr=False)
    reference: Optional[PointFn] = field(default=None, repr=False)
    boundary_sampler: Optional[Callable] = field(default=None, repr=False)
    default_test: tuple = (350, 350)

    @property
    def components(self) -> int:
        return self.constraint.components

    def truth(self, x: np.ndarray) -> np.ndarray:
        if self.exact is not None:
            return self.exact(x)
        if self.reference is not None:
            return self.reference(x)
        raise ValueError(f"problem {self.name} has no exact or reference solution")


def consistency_residual(problem: ProblemSpec, x: np.ndarray) -> float:
    """Max of ``|A[u_exact] - f|`` at ``x``."""
    if problem.exact_jets is None:
        raise ValueError(f"problem {problem.name} has no closed-form solution")
    f = problem.rhs(x)
    res = [problem.operator(u) - f[:, c] for c, u in enumerate(problem.exact_jets(x))]
    return float(np.max(np.abs(res)))


def _coord(x, axis, scale=1.0, shift=0.0) -> Jet2:
    """Jet of ``scale * x[axis] + shift``."""
    j = jet_variable(x, axis)
    return j * scale + shift


# -- Example 1: multiscale Poisson on the unit square -------------------------

def example1(n: int = 2) -> ProblemSpec:
    if not 1 <= n <= 8:
        raise ValueError(f"complexity n must be in 1..8, got {n}")
    freqs = 2.0 ** np.arange(1, n + 1)
    rho = 0.5**n

    def exact(x):
        u = np.zeros(len(x))
        for w in freqs:
            u += np.sin(w * np.pi * x[:, 0]) * np.sin(w * np.pi * x[:, 1])
        return (u / n)[:, None]

    def rhs(x):
        f = np.zeros(len(x))
        for w in freqs:
            f += (w * np.pi) ** 2 * np.sin(w * np.pi * x[:, 0]) * np.sin(w * np.pi * x[:, 1])
        return (2.0 / n * f)[:, None]

    def exact_jets(x):
        u = jet_const(0.0, 2, (len(x),))
        for w in freqs:
            u = u + jet_sin(_coord(x, 0, w * np.pi)) * jet_sin(_coord(x, 1, w * np.pi))
        return [u * (1.0 / n)]

    def L(x):
        out = jet_const(1.0, 2, (len(x),))
        for axis in range(2):
            out = out * jet_tanh(_coord(x, axis, 1 / rho)) * jet_tanh(_coord(x, axis, -1 / rho, 1 / rho))
        return out

    def G(x):
        return jet_const(0.0, 2, (len(x),))

    return ProblemSpec(
        name=f"example1(n={n})",
        domain=Box([0.0, 0.0], [1.0, 1.0]),
        operator=minus_laplacian(),
        rhs=rhs,
        constraint=ConstrainingOperator(L, (G,)),
        exact=exact,
        exact_jets=exact_jets,
    )


# -- Example 2: space-time advection-diffusion --------------------------------

KAPPA = 0.1 / np.pi


class AdvectionDiffusionReference:
    """Crank-Nicolson solution of ``u_t + u_x = kappa u_xx`` on (-1, 1) x (0, 1).

    Centered second-order differences in space, homogeneous Dirichlet ends,
    initial value ``-sin(pi x)``.  ``resolution`` counts grid nodes per axis,
    boundaries included.  Off-grid queries are bilinear.
    """

    def __init__(self, resolution: int = 1001, kappa: float = KAPPA):
        if resolution < 3:
            raise ValueError("resolution must be at least 3")
        self.resolution = resolution
        self.kappa = kappa
        self.x = np.linspace(-1.0, 1.0, resolution)
        self.t = np.linspace(0.0, 1.0, resolution)
        self.u = self._solve()
        self._interp = RegularGridInterpolator((self.x, self.t), self.u.T, method="linear")

    def _solve(self) -> np.ndarray:
        nx = self.resolution
        h = self.x[1] - self.x[0]
        dt = self.t[1] - self.t[0]
        k = self.kappa
        n = nx - 2
        lower = k / h**2 + 1.0 / (2 * h)  # coefficient of u_{i-1}
        upper = k / h**2 - 1.0 / (2 * h)  # coefficient of u_{i+1}
        center = -2.0 * k / h**2
        D = sp.diags([lower * np.ones(n - 1), center * np.ones(n), upper * np.ones(n - 1)], [-1, 0, 1], format="csc")
        I = sp.identity(n, format="csc")
        lhs = spla.splu((I - 0.5 * dt * D).tocsc())
        rhs_op = (I + 0.5 * dt * D).tocsr()
        u = np.zeros((self.t.size, nx))
        u[0] = -np.sin(np.pi * self.x)
        u[0, [0, -1]] = 0.0
        inner = u[0, 1:-1].copy()
        for step in range(1, self.t.size):
            inner = lhs.solve(rhs_op @ inner)
            u[step, 1:-1] = inner
        return u

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        q = np.clip(pts, [-1.0, 0.0], [1.0, 1.0])
        return self._interp(q)[:, None]


@lru_cache(maxsize=4)
def reference_example2(resolution: int = 1001) -> AdvectionDiffusionReference:
    return AdvectionDiffusionReference(resolution)


def example2(reference_resolution: int = 1001) -> ProblemSpec:
    def rhs(x):
        return np.zeros((len(x), 1))

    def L(x):
        return (
            jet_tanh(_coord(x, 0, 1.0, 1.0))
            * jet_tanh(_coord(x, 0, -1.0, 1.0))
            * jet_tanh(_coord(x, 1))
        )

    def G(x):
        return jet_sin(_coord(x, 0, np.pi)) * -1.0

    def reference(x):
        return reference_example2(reference_resolution)(x)

    def boundary(n, rng):
        # x = -1, x = 1 and t = 0; the final time is not constrained
        pts = np.column_stack([rng.uniform(-1, 1, n), rng.uniform(0, 1, n)])
        face = rng.integers(0, 3, n)
        pts[face == 0, 0] = -1.0
        pts[face == 1, 0] = 1.0
        pts[face == 2, 1] = 0.0
        return pts

    return ProblemSpec(
        name="example2",
        domain=Box([-1.0, 0.0], [1.0, 1.0]),
        operator=advection_diffusion(KAPPA),
        rhs=rhs,
        constraint=ConstrainingOperator(L, (G,)),
        reference=reference,
        boundary_sampler=boundary,
    )


# -- Example 3: vector reaction-diffusion in 3-D ------------------------------

def example3() -> ProblemSpec:
    tp = 2 * np.pi

    def exact_jets(x):
        s = [jet_sin(_coord(x, i, tp)) for i in range(3)]
        c = [jet_cos(_coord(x, i, tp)) for i in range(3)]
        return [c[0] * s[1] * s[2], s[0] * c[1] * s[2], s[0] * s[1] * c[2]]

    def exact(x):
        s = np.sin(tp * x)
        c = np.cos(tp * x)
        return np.column_stack([c[:, 0] * s[:, 1] * s[:, 2], s[:, 0] * c[:, 1] * s[:, 2], s[:, 0] * s[:, 1] * c[:, 2]])

    op = reaction_diffusion()

    def rhs(x):
        return np.column_stack([op(u) for u in exact_jets(x)])

    def L(x):
        out = jet_const(1.0, 3, (len(x),))
        for axis in range(3):
            out = out * jet_tanh(_coord(x, axis)) * jet_tanh(_coord(x, axis, -1.0, 1.0))
        return out

    def make_G(a, b):
        return lambda x: jet_sin(_coord(x, a, tp)) * jet_sin(_coord(x, b, tp))

    return ProblemSpec(
        name="example3",
        domain=Box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
        operator=op,
        rhs=rhs,
        constraint=ConstrainingOperator(L, (make_G(1, 2), make_G(0, 2), make_G(0, 1))),
        exact=exact,
        exact_jets=exact_jets,
        default_test=(50, 50, 50),
    )


def get_problem(name: str, **params) -> ProblemSpec:
    if name == "example1":
        return example1(int(params.get("n", 2)))
    if name == "example2":
        return example2(int(params.get("reference_resolution", 1001)))
    if name == "example3":
        return example3()
    raise ValueError(f"unknown problem {name!r}")


# -- error metrics -------------------------------------------------------------

def rel_l2(approx, exact) -> float:
    a = np.asarray(approx, dtype=float).ravel()
    e = np.asarray(exact, dtype=float).ravel()
    denom = np.linalg.norm(e)
    if denom == 0:
        raise ZeroDivisionError("exact solution has zero norm")
    return float(np.linalg.norm(a - e) / denom)


def normalized_l1(approx, exact) -> float:
    """Mean absolute error divided by the population std of the exact values."""
    a = np.asarray(approx, dtype=float)
    e = np.asarray(exact, dtype=float)
    if a.ndim == 1:
        a, e = a[:, None], e[:, None]
    gamma = np.std(e)
    if gamma == 0:
        raise ZeroDivisionError("exact solution has zero standard deviation")
    return float(np.sum(np.abs(a - e)) / a.shape[0] / gamma)
