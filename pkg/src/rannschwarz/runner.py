"""End-to-end runs: decompose, initialize, truncate, assemble, precondition,
solve, evaluate.  Also the spectrum, threshold-sweep and weak-scaling
experiments, each writing plain CSV.
"""

from __future__ import annotations

import configparser
import csv
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .assembly import BlockSystem, assemble, normal_blocks
from .basis import WindowSet, init_bases, phi_values
from .geometry import CartesianDecomposition, build_decomposition, points_in_box, uniform_grid
from .krylov import (
    ITERATIVE,
    SolveConfig,
    SolveReport,
    condition_number,
    dense_operator,
    qr_least_squares,
    spectrum,
    write_residual_history,
    write_spectrum,
)
from .problems import ProblemSpec, get_problem, normalized_l1, rel_l2
from .reduction import reduce_bases, write_singular_values
from .schwarz import SchwarzPreconditioner, build_index_sets, build_preconditioner

log = logging.getLogger(__name__)

SUMMARY_HEADER = [
    "seed", "problem", "J", "DoF", "N", "solver", "precond", "tau", "iter", "converged",
    "e_l2", "e_l1n", "t_assemble", "t_precond", "t_solve",
]

# config key -> (section, parser)
_SCHEMA = {
    "problem": ("problem", str),
    "n": ("problem", int),
    "reference_resolution": ("problem", int),
    "counts": ("decomposition", "ints"),
    "delta": ("decomposition", float),
    "m": ("network", int),
    "activation": ("network", str),
    "seed": ("network", int),
    "collocation": ("points", "ints"),
    "test": ("points", "optints"),
    "tau": ("pca", "tau"),
    "tau_relative": ("pca", bool),
    "solver": ("solver", str),
    "preconditioner": ("solver", str),
    "rel_tol": ("solver", float),
    "max_iter": ("solver", "optint"),
    "gmres_restart": ("solver", "optint"),
    "local_rcond": ("solver", "optfloat"),
    "num_seeds": ("run", int),
    "compute_cond": ("run", bool),
    "output_dir": ("run", str),
}


@dataclass
class RunConfig:
    problem: str = "example1"
    n: int = 2
    reference_resolution: int = 1001
    counts: tuple = (4, 4)
    delta: float = 2.0
    m: int = 16
    activation: str = "tanh"
    seed: int = 0
    collocation: tuple = (40, 40)
    test: Optional[tuple] = None  # None: the problem's default test grid
    tau: Optional[float] = None
    tau_relative: bool = False
    solver: str = "gmres"
    preconditioner: str = "AS"
    rel_tol: float = 1e-5
    max_iter: Optional[int] = None
    gmres_restart: Optional[int] = None
    local_rcond: Optional[float] = None  # None: n * eps per local matrix
    num_seeds: int = 10
    compute_cond: bool = False
    output_dir: str = "results"

    def __post_init__(self):
        self.counts = tuple(int(c) for c in self.counts)
        self.collocation = tuple(int(c) for c in self.collocation)
        if self.test is not None:
            self.test = tuple(int(c) for c in self.test)
        self.solve_config()  # validates solver fields
        if self.num_seeds < 1:
            raise ValueError("num_seeds must be >= 1")

    def solve_config(self) -> SolveConfig:
        return SolveConfig(self.solver, self.preconditioner, self.rel_tol, self.max_iter, self.gmres_restart)

    def build_problem(self) -> ProblemSpec:
        return get_problem(self.problem, n=self.n, reference_resolution=self.reference_resolution)


def _parse_value(kind, raw: str):
    raw = raw.strip()
    if kind == "ints":
        return tuple(int(v) for v in raw.replace("x", ",").split(",") if v.strip())
    if kind == "tau":
        return None if raw.lower() in ("off", "none", "") else float(raw)
    if kind == "optints":
        return None if raw.lower() in ("none", "") else _parse_value("ints", raw)
    if kind == "optfloat":
        return None if raw.lower() in ("none", "") else float(raw)
    if kind == "optint":
        return None if raw.lower() in ("none", "") else int(raw)
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return kind(raw)


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def load_config(path) -> RunConfig:
    """Read an INI-style config.  Unknown sections or keys are rejected."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    sections = {sec for sec, _ in _SCHEMA.values()}
    values = {}
    for sec in parser.sections():
        if sec not in sections:
            raise ValueError(f"unknown config section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in _SCHEMA or _SCHEMA[key][0] != sec:
                raise ValueError(f"unknown config key {key!r} in [{sec}]")
            values[key] = _parse_value(_SCHEMA[key][1], raw)
    env_out = os.environ.get("RANNSCHWARZ_OUTPUT_DIR")
    if env_out:
        values["output_dir"] = env_out
    return RunConfig(**values)


def dump_config(cfg: RunConfig, path) -> None:
    parser = configparser.ConfigParser()
    for key, (sec, _) in _SCHEMA.items():
        if not parser.has_section(sec):
            parser.add_section(sec)
        val = getattr(cfg, key)
        parser.set(sec, key, "off" if key == "tau" and val is None else _format_value(val))
    with open(path, "w") as fh:
        parser.write(fh)


@dataclass
class RunSummary:
    seed: int
    problem: str
    J: int
    DoF: int
    N: int
    solver: str
    precond: str
    tau: str
    iter: int
    converged: bool
    e_l2: float
    e_l1n: float
    t_assemble: float
    t_precond: float
    t_solve: float
    cond_HtH: float = float("nan")
    cond_MHtH: float = float("nan")

    def row(self) -> list:
        return [getattr(self, k) for k in SUMMARY_HEADER]


class RaNNSolution:
    """The fitted global ansatz ``u = L * sum_j omega_j (V_j^T Phi_j) . W_j + G``."""

    def __init__(self, problem, dec, windows, reduced, column_offsets, W):
        self.problem = problem
        self.decomposition = dec
        self.windows = windows
        self.reduced = reduced
        self.column_offsets = column_offsets
        self.W = W if W.ndim == 2 else W[:, None]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        comps = self.W.shape[1]
        net = np.zeros((len(x), comps))
        for j, rlb in enumerate(self.reduced):
            box = self.decomposition.subdomains[j]
            idx = points_in_box(box, x)
            if idx.size == 0:
                continue
            xi = x[idx]
            feats = phi_values(rlb.basis, box, xi) @ rlb.V
            w = self.W[self.column_offsets[j]:self.column_offsets[j + 1]]
            net[idx] += self.windows.window_value(j, xi)[:, None] * (feats @ w)
        cop = self.problem.constraint
        L = cop.L(x).value
        G = np.column_stack([cop.G[c](x).value for c in range(comps)])
        return L[:, None] * net + G


@dataclass
class FitResult:
    config: RunConfig
    seed: int
    decomposition: CartesianDecomposition
    reduced: list
    H: BlockSystem
    preconditioner: Optional[SchwarzPreconditioner]
    reports: list
    solution: RaNNSolution
    t_assemble: float
    t_precond: float
    t_solve: float

    @property
    def iterations(self) -> int:
        return max((r.iterations for r in self.reports), default=0)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.reports)


def solve_normal_equations(H: BlockSystem, precond, cfg: SolveConfig) -> tuple:
    """Solve every right-hand side column with the selected Krylov method."""
    solver = ITERATIVE[cfg.solver]
    b = H.normal_rhs()
    apply_M = precond.apply if precond is not None else None
    reports = []
    for c in range(b.shape[1]):
        if cfg.solver == "bicg":
            Mt = precond.apply_transpose if precond is not None else None
            rep = solver(H.normal_matvec, apply_M, b[:, c], cfg, apply_Mt=Mt)
        else:
            rep = solver(H.normal_matvec, apply_M, b[:, c], cfg)
        reports.append(rep)
    W = np.column_stack([r.W for r in reports])
    return W, reports


def fit(cfg: RunConfig, seed: Optional[int] = None, problem: Optional[ProblemSpec] = None) -> FitResult:
    seed = cfg.seed if seed is None else seed
    problem = problem or cfg.build_problem()
    phase = "decompose"
    try:
        dec = build_decomposition(problem.domain, cfg.counts, cfg.delta)
        colloc = uniform_grid(problem.domain, cfg.collocation, "collocation")
        windows = WindowSet(dec)
        phase = "assemble"
        t0 = time.perf_counter()
        bases = init_bases(dec, seed, cfg.m, cfg.activation)
        reduced = reduce_bases(windows, bases, colloc, cfg.tau, cfg.tau_relative)
        H = assemble(problem, dec, windows, reduced, colloc)
        t_assemble = time.perf_counter() - t0

        phase = "precondition"
        scfg = cfg.solve_config()
        t0 = time.perf_counter()
        precond = None
        if scfg.solver != "qr_direct" and scfg.preconditioner != "none":
            nb = normal_blocks(H, dec.neighbor_sets)
            idx = build_index_sets(dec, H.column_offsets)
            precond = build_preconditioner(scfg.preconditioner, nb, idx, cfg.local_rcond)
        t_precond = time.perf_counter() - t0

        phase = "solve"
        t0 = time.perf_counter()
        if scfg.solver == "qr_direct":
            W = qr_least_squares(H.to_dense(), H.F)
            reports = []
        else:
            W, reports = solve_normal_equations(H, precond, scfg)
        t_solve = time.perf_counter() - t0
    except Exception as exc:
        raise RuntimeError(f"[{phase}] {exc}") from exc

    solution = RaNNSolution(problem, dec, windows, reduced, H.column_offsets, W)
    return FitResult(cfg, seed, dec, reduced, H, precond, reports, solution, t_assemble, t_precond, t_solve)


def evaluate(result: FitResult, test_resolution=None) -> tuple:
    problem = result.solution.problem
    res = test_resolution or result.config.test or problem.default_test
    pts = uniform_grid(problem.domain, res, "test").points
    approx = result.solution(pts)
    truth = problem.truth(pts)
    return rel_l2(approx, truth), normalized_l1(approx, truth)


def dense_normal_matrices(result: FitResult) -> tuple:
    """Dense ``H^T H`` and, if preconditioned, ``M^{-1} H^T H``."""
    H = result.H.to_dense()
    A = H.T @ H
    MA = result.preconditioner.apply(A) if result.preconditioner is not None else None
    return A, MA


def summarize(result: FitResult, compute_cond: bool = False) -> RunSummary:
    e2, e1 = evaluate(result)
    cfg = result.config
    s = RunSummary(
        seed=result.seed,
        problem=result.solution.problem.name,
        J=result.decomposition.num_subdomains,
        DoF=result.H.p,
        N=result.H.N,
        solver=cfg.solver,
        precond=cfg.preconditioner if cfg.solver != "qr_direct" else "none",
        tau="off" if cfg.tau is None else repr(cfg.tau),
        iter=result.iterations,
        converged=result.converged,
        e_l2=e2,
        e_l1n=e1,
        t_assemble=result.t_assemble,
        t_precond=result.t_precond,
        t_solve=result.t_solve,
    )
    if compute_cond:
        A, MA = dense_normal_matrices(result)
        s.cond_HtH = condition_number(A)
        s.cond_MHtH = condition_number(MA) if MA is not None else s.cond_HtH
    return s


def _seeds(cfg: RunConfig, num_seeds: Optional[int]):
    k = cfg.num_seeds if num_seeds is None else num_seeds
    return [cfg.seed + i for i in range(k)]


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def _median_rows(summaries):
    keys = ["iter", "e_l2", "e_l1n", "t_assemble", "t_precond", "t_solve", "DoF"]
    header = ["stat"] + keys
    rows = []
    for name, fn in (("median", np.median), ("mean", np.mean)):
        rows.append([name] + [float(fn([getattr(s, k) for s in summaries])) for k in keys])
    return header, rows


def run(cfg: RunConfig, out_dir=None, num_seeds: Optional[int] = None) -> list:
    """Run the configured experiment once per seed and write CSV outputs."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config_resolved.ini")
    problem = cfg.build_problem()
    summaries = []
    residual_rows = []
    for seed in _seeds(cfg, num_seeds):
        result = fit(cfg, seed, problem)
        s = summarize(result, cfg.compute_cond)
        summaries.append(s)
        log.info("seed %d: DoF=%d iter=%d e_l2=%.3e", seed, s.DoF, s.iter, s.e_l2)
        for c, rep in enumerate(result.reports):
            th = rep.true_residual_history
            for k, r in enumerate(rep.residual_history):
                residual_rows.append([seed, c, k, repr(float(r)), repr(float(th[k])) if k < len(th) else "nan"])
        if seed == cfg.seed:
            write_singular_values(out / "singular_values.csv", result.reduced)
    _write_rows(out / "summary.csv", SUMMARY_HEADER, [s.row() for s in summaries])
    _write_rows(out / "residuals.csv", ["seed", "component", "iter", "preconditioned_residual", "true_residual"], residual_rows)
    header, rows = _median_rows(summaries)
    _write_rows(out / "summary_aggregate.csv", header, rows)
    if cfg.compute_cond:
        _write_rows(
            out / "conditioning.csv",
            ["seed", "cond_HtH", "cond_MHtH"],
            [[s.seed, repr(s.cond_HtH), repr(s.cond_MHtH)] for s in summaries],
        )
    return summaries


def spectrum_cmd(cfg: RunConfig, out_dir=None) -> tuple:
    """Eigenvalues of ``H^T H`` and ``M^{-1} H^T H`` for the configured seed."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config_resolved.ini")
    result = fit(cfg)
    A, MA = dense_normal_matrices(result)
    ev_A = spectrum(A)
    write_spectrum(out / "spectrum_HtH.csv", ev_A)
    ev_MA = spectrum(MA) if MA is not None else ev_A
    write_spectrum(out / "spectrum_MHtH.csv", ev_MA)
    return ev_A, ev_MA


SWEEP_HEADER = ["tau", "DoF", "cond_HtH", "cond_MHtH", "iter", "converged_fraction", "e_l2", "e_l2_mean"]


def sweep_tau(cfg: RunConfig, taus, out_dir=None, num_seeds: Optional[int] = None) -> list:
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config_resolved.ini")
    problem = cfg.build_problem()
    rows, all_rows = [], []
    for tau in taus:
        c = replace(cfg, tau=tau)
        sums = [summarize(fit(c, seed, problem), compute_cond=True) for seed in _seeds(cfg, num_seeds)]
        all_rows += [s.row() for s in sums]
        rows.append(
            [
                "off" if tau is None else tau,
                float(np.median([s.DoF for s in sums])),
                float(np.median([s.cond_HtH for s in sums])),
                float(np.median([s.cond_MHtH for s in sums])),
                float(np.median([s.iter for s in sums])),
                float(np.mean([s.converged for s in sums])),
                float(np.median([s.e_l2 for s in sums])),
                float(np.mean([s.e_l2 for s in sums])),
            ]
        )
    _write_rows(out / "sweep_tau.csv", SWEEP_HEADER, rows)
    _write_rows(out / "summary.csv", SUMMARY_HEADER, all_rows)
    return rows


SCALING_HEADER = [
    "n", "J", "DoF", "N", "precond", "iter", "converged_fraction", "e_l1n", "e_l2",
    "t_assemble", "t_precond", "t_solve",
]
SCALING_CAP = 4
UNPRECONDITIONED_RESTART = 20
SCALING_M = 32
SCALING_DELTA = 2.0
SCALING_TAU = 1e-3


def scaling_config(base: RunConfig, n: int, preconditioner: str) -> RunConfig:
    """Weak-scaling schedule: ``2^(n-1)`` subdomains and ``5 * 2^n`` points per
    axis, ``m = 32``, ``delta = 2``, ``tau = 1e-3``."""
    l = 2 ** (n - 1)
    restart = base.gmres_restart
    if preconditioner == "none" and restart is None:
        restart = UNPRECONDITIONED_RESTART
    return replace(
        base,
        problem="example1",
        n=n,
        counts=(l, l),
        delta=SCALING_DELTA,
        m=SCALING_M,
        tau=SCALING_TAU,
        collocation=(5 * 2**n, 5 * 2**n),
        preconditioner=preconditioner,
        solver="gmres",
        gmres_restart=restart,
    )


def scaling_cmd(cfg: RunConfig, ns, out_dir=None, num_seeds: Optional[int] = None,
                preconditioners=("none", "AS"), override_caps: bool = False) -> list:
    if not override_caps and max(ns) > SCALING_CAP:
        raise ValueError(f"n > {SCALING_CAP} requires the override flag")
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config_resolved.ini")
    rows, all_rows = [], []
    for n in ns:
        for pc in preconditioners:
            c = scaling_config(cfg, n, pc)
            problem = c.build_problem()
            sums = [summarize(fit(c, seed, problem)) for seed in _seeds(cfg, num_seeds)]
            all_rows += [s.row() for s in sums]
            l = 2 ** (n - 1)
            rows.append(
                [
                    n, f"{l}x{l}", float(np.median([s.DoF for s in sums])), sums[0].N, pc,
                    float(np.median([s.iter for s in sums])),
                    float(np.mean([s.converged for s in sums])),
                    float(np.median([s.e_l1n for s in sums])),
                    float(np.median([s.e_l2 for s in sums])),
                    float(np.median([s.t_assemble for s in sums])),
                    float(np.median([s.t_precond for s in sums])),
                    float(np.median([s.t_solve for s in sums])),
                ]
            )
    _write_rows(out / "scaling.csv", SCALING_HEADER, rows)
    _write_rows(out / "summary.csv", SUMMARY_HEADER, all_rows)
    return rows
