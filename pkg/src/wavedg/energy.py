"""Discrete energy identity for dG trajectories.

For U computed by dG(q) with source f, with the energy norm given by A and
the L2 norm by M,

    E(t_N^-) + sum_{n<N} (|[U1]_n|_A^2 + |[U2]_n|_M^2) = E(0^-) + 2 int_0^T (f, U2) dt,

where E = |U1|_A^2 + |U2|_M^2.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import dg
from .fem import gauss_rule
from .sparse import Factorization, quadratic_form


def energy(M, A, state: dg.DgState) -> float:
    return quadratic_form(A, state.u1_minus, state.u1_minus) + quadratic_form(M, state.u2_minus, state.u2_minus)


@dataclass
class EnergyLedger:
    t: np.ndarray
    e_node: np.ndarray     # E(t_n^-), n = 0..N
    jump_sum: np.ndarray   # jump energy accumulated over nodes 0..n-1
    work: np.ndarray       # load work accumulated up to t_n
    e0: float

    @property
    def residual(self) -> float:
        return float(self.e_node[-1] + self.jump_sum[-1] - self.e0 - self.work[-1])

    @property
    def relative_residual(self) -> float:
        scale = self.e0 if self.e0 > 0 else max(abs(self.e_node[-1]), abs(self.work[-1]), 1.0)
        return abs(self.residual) / scale

    @property
    def partial_residuals(self) -> np.ndarray:
        """Residual of the identity restricted to [0, t_n] for every n."""
        return self.e_node + self.jump_sum - self.e0 - self.work

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("n", "t", "energy", "jump_sum", "work", "residual"))
        for n, (t, e, j, wk, r) in enumerate(zip(self.t, self.e_node, self.jump_sum, self.work,
                                                 self.partial_residuals)):
            w.writerow([n] + [format(float(v), ".17g") for v in (t, e, j, wk, r)])
        return buf.getvalue()


def audit(traj: dg.DgTrajectory, M, A, load: Optional[dg.LoadFn] = None) -> EnergyLedger:
    """Evaluate every term of the energy identity along a trajectory."""
    part = traj.partition
    N = part.n_intervals
    e_node = np.array([energy(M, A, traj.state(n)) for n in range(N + 1)])
    jump_terms = np.array([quadratic_form(A, j1, j1) + quadratic_form(M, j2, j2)
                           for j1, j2 in dg.jumps(traj)])
    work_terms = np.zeros(N)
    if load is not None:
        n_gauss = traj.q + 2
        for i in range(N):
            tq, wq = gauss_rule(n_gauss, part.t[i], part.t[i + 1])
            for t, w in zip(tq, wq):
                _, u2 = traj.eval(t)
                work_terms[i] += 2.0 * w * float(np.dot(load(t), u2))
    return EnergyLedger(
        t=np.array(part.t),
        e_node=e_node,
        jump_sum=np.concatenate([[0.0], np.cumsum(jump_terms)]),
        work=np.concatenate([[0.0], np.cumsum(work_terms)]),
        e0=float(e_node[0]),
    )


@dataclass
class StabilityReport:
    lhs: float
    rhs_bracket: float
    ratio: float
    degenerate: bool


def stability_bound_check(traj: dg.DgTrajectory, M, A, load: Optional[dg.LoadFn] = None,
                          mass_solver=None) -> StabilityReport:
    """Ratio of |U1_N^-|_A + |U2_N^-|_M to |u_h0|_A + |v_h0|_M + int |P_h f| dt.

    P_h f is the L2 projection of the load, whose M-norm is sqrt(F^T M^{-1} F).
    """
    part = traj.partition
    final, init = traj.state(part.n_intervals), traj.initial
    norm = (lambda m, v: math.sqrt(max(quadratic_form(m, v, v), 0.0)))
    lhs = norm(A, final.u1_minus) + norm(M, final.u2_minus)
    bracket = norm(A, init.u1_minus) + norm(M, init.u2_minus)
    if load is not None:
        lu = mass_solver or Factorization(M, spd_hint=True)
        for i in range(part.n_intervals):
            tq, wq = gauss_rule(traj.q + 2, part.t[i], part.t[i + 1])
            for t, w in zip(tq, wq):
                F = load(t)
                bracket += w * math.sqrt(max(float(np.dot(F, lu.solve(F))), 0.0))
    degenerate = bracket == 0.0
    ratio = (0.0 if lhs == 0.0 else math.inf) if degenerate else lhs / bracket
    return StabilityReport(lhs, bracket, ratio, degenerate)
