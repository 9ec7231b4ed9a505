"""Refinement studies against manufactured solutions and EOC tables."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from . import dg, fem
from .problems import ManufacturedSolution, get_problem
from .sparse import quadratic_form

ERROR_COLUMNS = ("err_u1_l2_nodal", "err_u1_h1_nodal", "err_u2_l2_nodal",
                 "err_u1_l2_unif", "err_u1_h1_unif", "err_u2_l2_unif")
EOC_COLUMNS = tuple("eoc_" + c[4:] for c in ERROR_COLUMNS)
CSV_HEADER = ("resolution", "k", "h") + ERROR_COLUMNS + EOC_COLUMNS

# errors below this are treated as exact reproduction; no rate is reported
ERROR_FLOOR = 1e-11


@dataclass
class StudyConfig:
    scheme: str = "dg1"
    nx: int = 512
    nx_list: Sequence[int] = (8, 16, 32, 64)
    n_list: Sequence[int] = (8, 16, 32, 64, 128)
    t_final: float = 1.0
    domain: tuple = (0.0, math.pi)
    samples: int = 5
    problem: str = "sinwave"
    k_factor: float = 1.0
    max_steps: int = 2000
    threads: Optional[int] = None

    def __post_init__(self):
        if self.scheme not in dg.SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        for name in ("nx_list", "n_list"):
            ladder = list(getattr(self, name))
            if not ladder:
                raise ValueError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(ladder, ladder[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if self.samples < 2:
            raise ValueError("need at least 2 samples per interval")


@dataclass
class RateTable:
    """One row per resolution; eoc[i] compares row i-1 with row i (nan for row 0)."""

    kind: str
    scheme: str
    resolution: list = field(default_factory=list)
    k: list = field(default_factory=list)
    h: list = field(default_factory=list)
    errors: dict = field(default_factory=lambda: {c: [] for c in ERROR_COLUMNS})

    def add_row(self, resolution, k, h, errs: Sequence[float]):
        self.resolution.append(int(resolution))
        self.k.append(float(k))
        self.h.append(float(h))
        for c, e in zip(ERROR_COLUMNS, errs):
            self.errors[c].append(float(e))

    @property
    def mesh_parameter(self) -> list:
        return self.k if self.kind == "temporal" else self.h

    @property
    def eoc(self) -> dict:
        m = self.mesh_parameter
        return {ec: [math.nan] + [eoc(e[i], e[i + 1], m[i], m[i + 1]) for i in range(len(e) - 1)]
                for ec, e in zip(EOC_COLUMNS, (self.errors[c] for c in ERROR_COLUMNS))}

    def final_eoc(self, column: str) -> float:
        key = column if column.startswith("eoc_") else "eoc_" + column.removeprefix("err_")
        return self.eoc[key][-1]

    def rows(self) -> list[list[float]]:
        rates = self.eoc
        out = []
        for i in range(len(self.resolution)):
            out.append([self.resolution[i], self.k[i], self.h[i]]
                       + [self.errors[c][i] for c in ERROR_COLUMNS]
                       + [rates[c][i] for c in EOC_COLUMNS])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows():
            writer.writerow([row[0]] + [fmt(v) for v in row[1:]])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [dict(zip(CSV_HEADER, row)) for row in self.rows()]
        for r in rows:
            for key, v in r.items():
                if isinstance(v, float) and not math.isfinite(v):
                    r[key] = None
        doc = {"kind": self.kind, "scheme": self.scheme, "columns": list(CSV_HEADER), "rows": rows}
        return json.dumps(doc, indent=1)

    def plot_series(self) -> dict[str, list[tuple[float, float]]]:
        m = self.mesh_parameter
        return {c: list(zip(m, self.errors[c])) for c in ERROR_COLUMNS}

    def plot_data(self) -> str:
        """Two-column (mesh parameter, error) blocks, one per norm."""
        lines = []
        for name, series in self.plot_series().items():
            lines.append(f"# {name}")
            lines += [f"{fmt(x)} {fmt(y)}" for x, y in series]
            lines.append("")
        return "\n".join(lines)


def fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) else format(v, ".17g")


def eoc(e_coarse: float, e_fine: float, m_coarse: float, m_fine: float) -> float:
    """log(e_i/e_{i+1}) / log(m_i/m_{i+1}); nan once both errors hit the floor."""
    if e_coarse <= ERROR_FLOOR and e_fine <= ERROR_FLOOR:
        return math.nan
    if e_fine <= 0 or e_coarse <= 0:
        return math.nan
    return math.log(e_coarse / e_fine) / math.log(m_coarse / m_fine)


@dataclass
class Discretization:
    """Mesh, space and matrices for one spatial resolution."""

    space: fem.FeSpace
    M: object
    A: object

    @classmethod
    def build(cls, a: float, b: float, nx: int) -> "Discretization":
        space = fem.FeSpace(fem.build_uniform_mesh(a, b, nx))
        return cls(space, fem.assemble_mass(space), fem.assemble_stiffness(space))


def solve_problem(sol: ManufacturedSolution, scheme: str, nx: int, partition: dg.TimePartition,
                  disc: Optional[Discretization] = None) -> tuple[dg.DgTrajectory, Discretization]:
    disc = disc or Discretization.build(*sol.domain, nx)
    init = dg.initial_state(disc.space, sol.u0, sol.v0, disc.M, disc.A)
    traj = dg.run(scheme, disc.space, disc.M, disc.A, partition, init, sol.load_fn(disc.space))
    return traj, disc


def nodal_errors(traj: dg.DgTrajectory, space: fem.FeSpace, sol: ManufacturedSolution):
    """(u1 L2, u1 H1, u2 L2) errors of the left limits at t_N."""
    t = traj.partition.t_final
    u1, u2 = traj.eval(t, "left")
    l2, h1 = fem.error_norms(space, u1, sol.u1, t)
    v2, _ = fem.error_norms(space, u2, sol.u2, t)
    return l2, h1, v2


def sample_times(partition: dg.TimePartition, s: int):
    """(t, side) pairs: s equispaced points per interval, endpoints as one-sided limits."""
    out = []
    for i in range(partition.n_intervals):
        t0, t1 = partition.t[i], partition.t[i + 1]
        for j, t in enumerate(np.linspace(t0, t1, s)):
            t = t1 if j == s - 1 else t
            out.append((float(t), "right" if j == 0 else "left"))
    return out


def uniform_errors(traj: dg.DgTrajectory, space: fem.FeSpace, sol: ManufacturedSolution, s: int = 5):
    """Sup over sampled times of the (u1 L2, u1 H1, u2 L2) errors."""
    if s < 2:
        raise ValueError("need at least 2 samples per interval")
    sup = np.zeros(3)
    for t, side in sample_times(traj.partition, s):
        u1, u2 = traj.eval(t, side)
        l2, h1 = fem.error_norms(space, u1, sol.u1, t)
        v2, _ = fem.error_norms(space, u2, sol.u2, t)
        sup = np.maximum(sup, (l2, h1, v2))
    return tuple(float(v) for v in sup)


class SemidiscreteReference:
    """Exact solution of M u'' + A u = 0 from given initial coefficients.

    Uses the generalized eigendecomposition A v = lambda M v, so its values
    are independent of any time stepping.
    """

    def __init__(self, M, A, init: dg.DgState):
        lam, vecs = scipy.linalg.eigh(A.to_dense(), M.to_dense())
        self.omega = np.sqrt(lam)
        self.vecs = vecs
        Md = M.to_dense()
        self.c1 = vecs.T @ (Md @ init.u1_minus)
        self.c2 = vecs.T @ (Md @ init.u2_minus)

    def __call__(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        c, s = np.cos(self.omega * t), np.sin(self.omega * t)
        u1 = self.vecs @ (self.c1 * c + self.c2 * s / self.omega)
        u2 = self.vecs @ (-self.c1 * self.omega * s + self.c2 * c)
        return u1, u2


def temporal_nodal_error(traj: dg.DgTrajectory, M, A, reference: SemidiscreteReference) -> float:
    """||e1(t_N^-)||_1 + ||e2(t_N^-)|| against the semidiscrete solution."""
    t = traj.partition.t_final
    u1, u2 = traj.eval(t, "left")
    r1, r2 = reference(t)
    e1, e2 = u1 - r1, u2 - r2
    return math.sqrt(max(quadratic_form(A, e1, e1), 0.0)) + math.sqrt(max(quadratic_form(M, e2, e2), 0.0))


def _workers(cfg: StudyConfig) -> int:
    if cfg.threads is not None:
        return max(1, cfg.threads)
    env = os.environ.get("WAVEDG_THREADS")
    return max(1, int(env)) if env else 1


def _map(cfg: StudyConfig, fn: Callable, items):
    n = _workers(cfg)
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def run_temporal_study(cfg: StudyConfig, sol: Optional[ManufacturedSolution] = None) -> RateTable:
    """Fix nx, sweep the number of time steps."""
    if len(cfg.n_list) < 2:
        raise ValueError("a study needs at least two resolutions")
    sol = sol or get_problem(cfg.problem)
    disc = Discretization.build(*cfg.domain, cfg.nx)

    def entry(n):
        part = dg.TimePartition.uniform(cfg.t_final, n)
        traj, _ = solve_problem(sol, cfg.scheme, cfg.nx, part, disc)
        return n, part.k_max, disc.space.mesh.h, (nodal_errors(traj, disc.space, sol)
                                                  + uniform_errors(traj, disc.space, sol, cfg.samples))

    table = RateTable("temporal", cfg.scheme)
    for row in sorted(_map(cfg, entry, list(cfg.n_list))):
        table.add_row(*row)
    return table


def coupled_steps(cfg: StudyConfig, h: float) -> int:
    """Number of steps for the spatial study: k ~ c h (dG1) or k ~ h^2 (dG0)."""
    k = cfg.k_factor * (h if cfg.scheme == "dg1" else h * h)
    return min(max(1, math.ceil(cfg.t_final / k - 1e-9)), cfg.max_steps)


def run_spatial_study(cfg: StudyConfig, sol: Optional[ManufacturedSolution] = None) -> RateTable:
    """Sweep nx with the time step coupled to h."""
    if len(cfg.nx_list) < 2:
        raise ValueError("a study needs at least two resolutions")
    sol = sol or get_problem(cfg.problem)

    def entry(nx):
        disc = Discretization.build(*cfg.domain, nx)
        part = dg.TimePartition.uniform(cfg.t_final, coupled_steps(cfg, disc.space.mesh.h))
        traj, _ = solve_problem(sol, cfg.scheme, nx, part, disc)
        return nx, part.k_max, disc.space.mesh.h, (nodal_errors(traj, disc.space, sol)
                                                   + uniform_errors(traj, disc.space, sol, cfg.samples))

    table = RateTable("spatial", cfg.scheme)
    for row in sorted(_map(cfg, entry, list(cfg.nx_list))):
        table.add_row(*row)
    return table


@dataclass
class InterpolationReport:
    q: int
    n_list: list
    errors: list
    eocs: list
    nodal_residual: float
    moment_residual: float


def interpolant_coefficients(u: Callable, partition: dg.TimePartition, q: int) -> np.ndarray:
    """Endpoint values (start, end) of the time interpolant on each interval.

    The end value matches u(t_n); for q = 1 the start value is fixed by
    int_{I_n} (Pi u - u) dt = 0.
    """
    t = partition.t
    coeffs = np.empty((partition.n_intervals, 2))
    for i in range(partition.n_intervals):
        end = u(t[i + 1])
        if q == 0:
            coeffs[i] = end, end
        elif q == 1:
            tq, wq = fem.gauss_rule(8, t[i], t[i + 1])
            mean = np.dot(wq, u(tq)) / (t[i + 1] - t[i])
            coeffs[i] = 2.0 * mean - end, end
        else:
            raise ValueError("only q = 0 and q = 1 are supported")
    return coeffs


def _interp_eval(coeffs, t0, t1, t):
    s = (t - t0) / (t1 - t0)
    return (1.0 - s) * coeffs[0] + s * coeffs[1]


def interpolation_rate_probe(u: Callable, partitions: Sequence[dg.TimePartition], q: int,
                             sub: int = 16) -> InterpolationReport:
    """Check the defining conditions of the time interpolant and its L1 error rate."""
    errors, nodal_res, moment_res = [], 0.0, 0.0
    for part in partitions:
        coeffs = interpolant_coefficients(u, part, q)
        t = part.t
        err = 0.0
        for i in range(part.n_intervals):
            t0, t1 = t[i], t[i + 1]
            nodal_res = max(nodal_res, abs(_interp_eval(coeffs[i], t0, t1, t1) - u(t1)))
            tq, wq = fem.gauss_rule(8, t0, t1)
            if q >= 1:
                diff = np.dot(wq, _interp_eval(coeffs[i], t0, t1, tq) - u(tq))
                moment_res = max(moment_res, abs(diff) / (t1 - t0))
            # |Pi u - u| has kinks, so integrate on sub-intervals
            edges = np.linspace(t0, t1, sub + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                tq, wq = fem.gauss_rule(5, a, b)
                err += np.dot(wq, np.abs(_interp_eval(coeffs[i], t0, t1, tq) - u(tq)))
        errors.append(err)
    ks = [p.k_max for p in partitions]
    rates = [eoc(errors[i], errors[i + 1], ks[i], ks[i + 1]) for i in range(len(errors) - 1)]
    return InterpolationReport(q, [p.n_intervals for p in partitions], errors, rates,
                               nodal_res, moment_res)
