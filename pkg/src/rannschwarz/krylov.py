"""Krylov solvers for the preconditioned normal equations, a direct QR
least-squares path, and dense spectral diagnostics.

All iterative solvers start from zero and stop on the preconditioned relative
residual ``||M^{-1}(b - A x)|| / ||M^{-1} b||``.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

SOLVERS = ("qr_direct", "cg", "cgs", "bicg", "gmres")
PRECONDITIONERS = ("none", "AS", "SAS", "RAS")

Operator = Callable[[np.ndarray], np.ndarray]


def identity(v):
    return v


@dataclass
class SolveConfig:
    solver: str = "gmres"
    preconditioner: str = "AS"
    rel_tol: float = 1e-5
    max_iter: Optional[int] = None  # default 10 * p
    gmres_restart: Optional[int] = None
    memory_cap_bytes: int = 2 * 1024**3

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.gmres_restart is not None and self.gmres_restart < 1:
            raise ValueError("gmres_restart must be >= 1")

    def iteration_limit(self, p: int) -> int:
        return self.max_iter if self.max_iter is not None else 10 * p


@dataclass
class SolveReport:
    W: np.ndarray
    iterations: int
    residual_history: np.ndarray
    converged: bool
    true_residual_history: np.ndarray = field(default_factory=lambda: np.array([]))
    breakdown: bool = False
    setup_time: float = 0.0
    solve_time: float = 0.0

    @property
    def final_preconditioned_residual(self) -> float:
        return float(self.residual_history[-1])


def _report(x, hist, true_hist, converged, breakdown, t0):
    return SolveReport(
        W=x,
        iterations=len(hist) - 1,
        residual_history=np.asarray(hist),
        converged=converged,
        true_residual_history=np.asarray(true_hist),
        breakdown=breakdown,
        solve_time=time.perf_counter() - t0,
    )


def _trivial(b, t0):
    return _report(np.zeros_like(b), [0.0], [0.0], True, False, t0)


def cg(apply_A: Operator, apply_M: Operator | None, b: np.ndarray, cfg: SolveConfig) -> SolveReport:
    """Preconditioned conjugate gradients (``M^{-1}`` symmetric positive semidefinite)."""
    t0 = time.perf_counter()
    M = apply_M or identity
    b = np.asarray(b, dtype=float)
    max_iter = cfg.iteration_limit(b.size)
    x = np.zeros_like(b)
    r = b.copy()
    z = M(r)
    bnorm, znorm0 = np.linalg.norm(b), np.linalg.norm(z)
    if bnorm == 0 or znorm0 == 0:
        return _trivial(b, t0)
    hist, true_hist = [1.0], [1.0]
    p = z.copy()
    rz = r @ z
    converged = breakdown = False
    for _ in range(max_iter):
        Ap = apply_A(p)
        pAp = p @ Ap
        if pAp <= 0 or rz == 0:
            breakdown = True
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = M(r)
        hist.append(np.linalg.norm(z) / znorm0)
        true_hist.append(np.linalg.norm(r) / bnorm)
        if hist[-1] <= cfg.rel_tol:
            converged = True
            break
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return _report(x, hist, true_hist, converged, breakdown, t0)


def bicg(apply_A: Operator, apply_M: Operator | None, b: np.ndarray, cfg: SolveConfig,
         apply_At: Operator | None = None, apply_Mt: Operator | None = None) -> SolveReport:
    """Preconditioned biconjugate gradients.

    Transposed operators default to the forward ones (symmetric case).
    """
    t0 = time.perf_counter()
    M = apply_M or identity
    Mt = apply_Mt or (identity if apply_M is None else apply_M)
    At = apply_At or apply_A
    b = np.asarray(b, dtype=float)
    max_iter = cfg.iteration_limit(b.size)
    x = np.zeros_like(b)
    r = b.copy()
    rt = r.copy()
    z = M(r)
    bnorm, znorm0 = np.linalg.norm(b), np.linalg.norm(z)
    if bnorm == 0 or znorm0 == 0:
        return _trivial(b, t0)
    hist, true_hist = [1.0], [1.0]
    converged = breakdown = False
    rho_old = None
    p = pt = None
    for _ in range(max_iter):
        zt = Mt(rt)
        rho = z @ rt
        if rho == 0:
            breakdown = True
            break
        if rho_old is None:
            p, pt = z.copy(), zt.copy()
        else:
            beta = rho / rho_old
            p = z + beta * p
            pt = zt + beta * pt
        q = apply_A(p)
        qt = At(pt)
        denom = pt @ q
        if denom == 0:
            breakdown = True
            break
        alpha = rho / denom
        x += alpha * p
        r -= alpha * q
        rt -= alpha * qt
        z = M(r)
        hist.append(np.linalg.norm(z) / znorm0)
        true_hist.append(np.linalg.norm(r) / bnorm)
        if hist[-1] <= cfg.rel_tol:
            converged = True
            break
        rho_old = rho
    return _report(x, hist, true_hist, converged, breakdown, t0)


def cgs(apply_A: Operator, apply_M: Operator | None, b: np.ndarray, cfg: SolveConfig) -> SolveReport:
    """Preconditioned conjugate gradients squared."""
    t0 = time.perf_counter()
    M = apply_M or identity
    b = np.asarray(b, dtype=float)
    max_iter = cfg.iteration_limit(b.size)
    x = np.zeros_like(b)
    r = b.copy()
    rt = r.copy()
    bnorm = np.linalg.norm(b)
    znorm0 = np.linalg.norm(M(r))
    if bnorm == 0 or znorm0 == 0:
        return _trivial(b, t0)
    hist, true_hist = [1.0], [1.0]
    converged = breakdown = False
    rho_old = None
    p = q = None
    for _ in range(max_iter):
        rho = rt @ r
        if rho == 0:
            breakdown = True
            break
        if rho_old is None:
            u = r.copy()
            p = u.copy()
        else:
            beta = rho / rho_old
            u = r + beta * q
            p = u + beta * (q + beta * p)
        phat = M(p)
        vhat = apply_A(phat)
        denom = rt @ vhat
        if denom == 0:
            breakdown = True
            break
        alpha = rho / denom
        q = u - alpha * vhat
        uhat = M(u + q)
        x += alpha * uhat
        r -= alpha * apply_A(uhat)
        hist.append(np.linalg.norm(M(r)) / znorm0)
        true_hist.append(np.linalg.norm(r) / bnorm)
        if hist[-1] <= cfg.rel_tol:
            converged = True
            break
        rho_old = rho
    return _report(x, hist, true_hist, converged, breakdown, t0)


def gmres(apply_A: Operator, apply_M: Operator | None, b: np.ndarray, cfg: SolveConfig) -> SolveReport:
    """Left-preconditioned GMRES with modified Gram-Schmidt and Givens rotations.

    Without ``cfg.gmres_restart`` the Krylov basis grows up to the system
    size (full GMRES); beyond that, or with a restart length, the method
    restarts from the current iterate.
    """
    t0 = time.perf_counter()
    M = apply_M or identity
    b = np.asarray(b, dtype=float)
    n = b.size
    max_iter = cfg.iteration_limit(n)
    m = cfg.gmres_restart or min(max_iter, n)
    m = max(1, min(m, max_iter))
    if (m + 1) * n * 8 + (m + 1) * m * 8 > cfg.memory_cap_bytes:
        raise MemoryError(
            f"Krylov basis of {m + 1} x {n} exceeds the memory cap; set gmres_restart"
        )
    bnorm = np.linalg.norm(b)
    zb = M(b)
    znorm0 = np.linalg.norm(zb)
    if bnorm == 0 or znorm0 == 0:
        return _trivial(b, t0)

    x = np.zeros(n)
    hist, true_hist = [1.0], [1.0]
    total = 0
    converged = False
    while total < max_iter and not converged:
        r = zb if total == 0 else M(b - apply_A(x))
        beta = np.linalg.norm(r)
        if beta / znorm0 <= cfg.rel_tol:
            converged = True
            break
        V = np.zeros((m + 1, n))
        Hh = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_done = 0
        for k in range(m):
            w = M(apply_A(V[k]))
            for i in range(k + 1):
                Hh[i, k] = w @ V[i]
                w = w - Hh[i, k] * V[i]
            Hh[k + 1, k] = np.linalg.norm(w)
            happy = Hh[k + 1, k] <= 1e-14 * np.abs(Hh[: k + 1, k]).max(initial=0.0)
            if not happy:
                V[k + 1] = w / Hh[k + 1, k]
            for i in range(k):
                tmp = cs[i] * Hh[i, k] + sn[i] * Hh[i + 1, k]
                Hh[i + 1, k] = -sn[i] * Hh[i, k] + cs[i] * Hh[i + 1, k]
                Hh[i, k] = tmp
            denom = np.hypot(Hh[k, k], Hh[k + 1, k])
            cs[k] = Hh[k, k] / denom
            sn[k] = Hh[k + 1, k] / denom
            Hh[k, k] = denom
            Hh[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            total += 1
            k_done = k + 1
            y = sla.solve_triangular(Hh[:k_done, :k_done], g[:k_done])
            xk = x + V[:k_done].T @ y
            hist.append(abs(g[k + 1]) / znorm0)
            true_hist.append(np.linalg.norm(b - apply_A(xk)) / bnorm)
            if hist[-1] <= cfg.rel_tol or happy:
                converged = True
                break
            if total >= max_iter:
                break
        y = sla.solve_triangular(Hh[:k_done, :k_done], g[:k_done])
        x = x + V[:k_done].T @ y
    return _report(x, hist, true_hist, converged, False, t0)


ITERATIVE = {"cg": cg, "cgs": cgs, "bicg": bicg, "gmres": gmres}


def qr_least_squares(H: np.ndarray, F: np.ndarray, rcond: float | None = None) -> np.ndarray:
    """Least-squares solution by column-pivoted QR.

    Rank-deficient systems return the basic solution: columns whose pivots
    fall below ``rcond`` times the leading pivot are set to zero.
    """
    H = np.asarray(H, dtype=float)
    F = np.asarray(F, dtype=float)
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(F))):
        raise ValueError("non-finite input to least squares")
    N, p = H.shape
    if rcond is None:
        rcond = max(N, p) * np.finfo(float).eps
    Q, R, piv = sla.qr(H, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    r = int(np.count_nonzero(diag > rcond * diag[0])) if diag.size and diag[0] > 0 else 0
    out = np.zeros((p,) + F.shape[1:])
    if r:
        c = Q[:, :r].T @ F
        out[piv[:r]] = sla.solve_triangular(R[:r, :r], c)
    return out


class DenseSizeError(ValueError):
    pass


DENSE_CAP = 4000


def _check_cap(A, cap):
    if max(A.shape) > cap:
        raise DenseSizeError(
            f"matrix of size {A.shape} exceeds the dense cap {cap}; sampling-based estimates are not provided"
        )


def spectrum(A: np.ndarray, cap: int = DENSE_CAP) -> np.ndarray:
    """All eigenvalues, sorted by real part."""
    A = np.asarray(A, dtype=float)
    _check_cap(A, cap)
    ev = sla.eigvals(A)
    return ev[np.argsort(ev.real, kind="stable")]


def singular_values(A: np.ndarray, cap: int = DENSE_CAP) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    _check_cap(A, cap)
    return sla.svdvals(A)


def condition_number(A: np.ndarray, cap: int = DENSE_CAP) -> float:
    """``sigma_max / sigma_min`` over the strictly positive singular values."""
    s = singular_values(A, cap)
    pos = s[s > 0]
    if pos.size == 0:
        return float("inf")
    return float(pos[0] / pos[-1])


def dense_operator(apply: Operator, n: int) -> np.ndarray:
    """Materialize a linear operator column by column."""
    return apply(np.eye(n))


def write_residual_history(path, report: SolveReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "preconditioned_residual", "true_residual"])
        th = report.true_residual_history
        for k, r in enumerate(report.residual_history):
            t = th[k] if k < len(th) else float("nan")
            w.writerow([k, repr(float(r)), repr(float(t))])


def write_spectrum(path, eigenvalues) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "real", "imag"])
        for k, ev in enumerate(eigenvalues):
            w.writerow([k, repr(float(np.real(ev))), repr(float(np.imag(ev)))])
