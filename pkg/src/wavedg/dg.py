"""dG(0) and dG(1) time stepping for the velocity-displacement wave system.

The semidiscrete system is

    A u1' - A u2 = 0,    M u2' + A u1 = F(t),

with M, A the P1 mass and stiffness matrices and F(t) the spatial load
vector. Each time interval is solved as one coupled block system; the
solution may jump at the time nodes and is left-continuous there.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fem import ExactField, FeSpace, gauss_rule, l2_project, ritz_project
from .sparse import BlockSystem, Factorization, SparseMatrix, SolveError, matvec

log = logging.getLogger(__name__)

SCHEMES = ("dg0", "dg1")
LoadFn = Callable[[float], np.ndarray]


class TimePartition:
    def __init__(self, t):
        t = np.array(t, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("a time partition needs at least one interval")
        if t[0] != 0.0:
            raise ValueError("time partitions start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time nodes must be strictly increasing")
        t.setflags(write=False)
        self.t = t

    @classmethod
    def uniform(cls, t_final: float, n: int) -> "TimePartition":
        if n < 1 or not t_final > 0:
            raise ValueError("need n >= 1 and t_final > 0")
        return cls(np.linspace(0.0, t_final, n + 1))

    @property
    def k(self) -> np.ndarray:
        return np.diff(self.t)

    @property
    def k_max(self) -> float:
        return float(self.k.max())

    @property
    def n_intervals(self) -> int:
        return len(self.t) - 1

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    def interval_of(self, t: float, side: str = "left") -> int:
        """1-based index n of the interval I_n = (t_{n-1}, t_n] used for evaluation."""
        if not self.t[0] <= t <= self.t[-1]:
            raise ValueError(f"t = {t} lies outside [0, {self.t[-1]}]")
        if side == "left":
            return int(np.searchsorted(self.t, t, side="left"))
        if side == "right":
            return int(np.searchsorted(self.t, t, side="right"))
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")


@dataclass
class DgState:
    """Left limits (U1^-, U2^-) at a time node."""

    u1_minus: np.ndarray
    u2_minus: np.ndarray

    def __post_init__(self):
        self.u1_minus = np.asarray(self.u1_minus, dtype=float)
        self.u2_minus = np.asarray(self.u2_minus, dtype=float)
        if self.u1_minus.shape != self.u2_minus.shape:
            raise ValueError("u1 and u2 must have equal length")


@dataclass
class Dg1Interval:
    """Endpoint values of the linear dG(1) polynomials on one interval."""

    u1_minus: np.ndarray
    u1_plus: np.ndarray
    u2_minus: np.ndarray
    u2_plus: np.ndarray


def dg1_weights(k: float) -> np.ndarray:
    """omega[p-1, r-1] = int_I Psi^r Psi^p dt for the nodal linear basis.

    Psi^1 = (t_n - t)/k is one at the left end, Psi^2 = (t - t_{n-1})/k at the right end.
    """
    return np.array([[k / 3.0, k / 6.0], [k / 6.0, k / 3.0]])


def dg1_basis(s) -> np.ndarray:
    """Rows (Psi^1, Psi^2) at local coordinates s = (t - t_{n-1})/k."""
    s = np.asarray(s, dtype=float)
    return np.array([1.0 - s, s])


def dg0_matrix(M: SparseMatrix, A: SparseMatrix, k: float) -> BlockSystem:
    return BlockSystem((((1.0, A), (-k, A)), ((k, A), (1.0, M))))


def dg1_matrix(M: SparseMatrix, A: SparseMatrix, k: float) -> BlockSystem:
    w = dg1_weights(k)
    w11, w12, w21, w22 = w[0, 0], w[0, 1], w[1, 0], w[1, 1]
    # unknowns: (U1_n^-, U1_{n-1}^+, U2_n^-, U2_{n-1}^+)
    return BlockSystem((
        ((0.5, A), (0.5, A), (-w12, A), (-w11, A)),
        ((0.5, A), (-0.5, A), (-w22, A), (-w21, A)),
        ((w12, A), (w11, A), (0.5, M), (0.5, M)),
        ((w22, A), (w21, A), (0.5, M), (-0.5, M)),
    ))


def dg0_load(load: Optional[LoadFn], t0: float, t1: float, n: int) -> np.ndarray:
    """int_{I} F(t) dt by 2-point Gauss."""
    if load is None:
        return np.zeros(n)
    tq, wq = gauss_rule(2, t0, t1)
    return sum(w * load(t) for t, w in zip(tq, wq))


def dg1_moments(load: Optional[LoadFn], t0: float, t1: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(int F Psi^1 dt, int F Psi^2 dt) by 3-point Gauss."""
    if load is None:
        return np.zeros(n), np.zeros(n)
    tq, wq = gauss_rule(3, t0, t1)
    psi = dg1_basis((tq - t0) / (t1 - t0))
    f1, f2 = np.zeros(n), np.zeros(n)
    for g, (t, w) in enumerate(zip(tq, wq)):
        ft = load(t)
        f1 += w * psi[0, g] * ft
        f2 += w * psi[1, g] * ft
    return f1, f2


def initial_state(space: FeSpace, u0: ExactField, v0: ExactField, M=None, A=None) -> DgState:
    """U1_0^- = Ritz projection of u0, U2_0^- = L2 projection of v0."""
    u1 = ritz_project(space, u0, 0.0, stiffness=A).coeffs
    u2 = l2_project(space, v0.at(0.0), mass=M).coeffs
    return DgState(u1, u2)


def step_dg0(M, A, prev: DgState, k: float, f_load=None, factorization=None) -> DgState:
    if not k > 0:
        raise ValueError("time step must be positive")
    n = M.n_rows
    lu = factorization or Factorization(dg0_matrix(M, A, k))
    f = np.zeros(n) if f_load is None else f_load
    rhs = np.concatenate([matvec(A, prev.u1_minus), matvec(M, prev.u2_minus) + f])
    x = lu.solve(rhs)
    return DgState(x[:n], x[n:])


def step_dg1(M, A, prev: DgState, k: float, f_moments=None, factorization=None) -> Dg1Interval:
    if not k > 0:
        raise ValueError("time step must be positive")
    n = M.n_rows
    lu = factorization or Factorization(dg1_matrix(M, A, k))
    f1, f2 = (np.zeros(n), np.zeros(n)) if f_moments is None else f_moments
    rhs = np.concatenate([matvec(A, prev.u1_minus), np.zeros(n),
                          matvec(M, prev.u2_minus) + f1, f2])
    x = lu.solve(rhs)
    return Dg1Interval(x[:n], x[n:2 * n], x[2 * n:3 * n], x[3 * n:])


class DgTrajectory:
    """Per-interval endpoint records of (U1, U2).

    Row n-1 of each array belongs to I_n. For dG(0) start and end values
    coincide.
    """

    def __init__(self, scheme: str, partition: TimePartition, initial: DgState,
                 u1_start, u1_end, u2_start, u2_end):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.scheme = scheme
        self.partition = partition
        self.initial = initial
        self.u1_start = np.asarray(u1_start)
        self.u1_end = np.asarray(u1_end)
        self.u2_start = np.asarray(u2_start)
        self.u2_end = np.asarray(u2_end)

    @property
    def q(self) -> int:
        return SCHEMES.index(self.scheme)

    @property
    def n_dof(self) -> int:
        return len(self.initial.u1_minus)

    def state(self, n: int) -> DgState:
        """Left limits at t_n (n = 0 gives the initial data)."""
        if n == 0:
            return self.initial
        return DgState(self.u1_end[n - 1], self.u2_end[n - 1])

    def plus(self, n: int) -> DgState:
        """Right limits at t_n, n = 0..N-1."""
        return DgState(self.u1_start[n], self.u2_start[n])

    def eval(self, t: float, side: str = "left") -> tuple[np.ndarray, np.ndarray]:
        part = self.partition
        n = part.interval_of(t, side)
        if n == 0:
            return self.initial.u1_minus.copy(), self.initial.u2_minus.copy()
        if n > part.n_intervals:
            # right limit at t_N is undefined; fall back to the left limit
            n = part.n_intervals
        i = n - 1
        if self.scheme == "dg0":
            return self.u1_end[i].copy(), self.u2_end[i].copy()
        s = (t - part.t[i]) / (part.t[i + 1] - part.t[i])
        return ((1.0 - s) * self.u1_start[i] + s * self.u1_end[i],
                (1.0 - s) * self.u2_start[i] + s * self.u2_end[i])

    def derivative(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Time derivatives of (U1, U2) on I_n (constant for q <= 1)."""
        i = n - 1
        k = self.partition.k[i]
        return ((self.u1_end[i] - self.u1_start[i]) / k,
                (self.u2_end[i] - self.u2_start[i]) / k)


def jumps(traj: DgTrajectory) -> list[tuple[np.ndarray, np.ndarray]]:
    """[U]_n = U_n^+ - U_n^- for n = 0..N-1."""
    out = []
    for n in range(traj.partition.n_intervals):
        minus, plus = traj.state(n), traj.plus(n)
        out.append((plus.u1_minus - minus.u1_minus, plus.u2_minus - minus.u2_minus))
    return out


def run(scheme: str, space: Optional[FeSpace], M: SparseMatrix, A: SparseMatrix,
        partition: TimePartition, init: DgState, load: Optional[LoadFn] = None) -> DgTrajectory:
    """Advance init through every interval of the partition."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    n = M.n_rows
    if A.n_rows != n or len(init.u1_minus) != n:
        raise ValueError("matrices and initial state disagree in size")
    if space is not None and space.n_dof != n:
        raise ValueError("space and matrices disagree in size")
    N = partition.n_intervals
    u1s, u1e, u2s, u2e = (np.empty((N, n)) for _ in range(4))
    build = dg0_matrix if scheme == "dg0" else dg1_matrix
    factors: dict[float, Factorization] = {}
    state = init
    for i in range(N):
        t0, t1 = partition.t[i], partition.t[i + 1]
        k = t1 - t0
        try:
            lu = factors.get(k)
            if lu is None:
                lu = factors[k] = Factorization(build(M, A, k))
            if scheme == "dg0":
                state = step_dg0(M, A, state, k, dg0_load(load, t0, t1, n), lu)
                u1s[i] = u1e[i] = state.u1_minus
                u2s[i] = u2e[i] = state.u2_minus
            else:
                rec = step_dg1(M, A, state, k, dg1_moments(load, t0, t1, n), lu)
                u1s[i], u1e[i], u2s[i], u2e[i] = rec.u1_plus, rec.u1_minus, rec.u2_plus, rec.u2_minus
                state = DgState(rec.u1_minus, rec.u2_minus)
        except SolveError as exc:
            raise SolveError(f"step failed on interval {i + 1}: {exc}", exc.residual) from exc
    log.debug("%s: %d intervals, %d factorizations", scheme, N, len(factors))
    return DgTrajectory(scheme, partition, init, u1s, u1e, u2s, u2e)


def weak_form_residual(traj: DgTrajectory, M, A, load: Optional[LoadFn] = None,
                       n_gauss: int = 3) -> np.ndarray:
    """Relative residual of the interval equations, one value per interval.

    Tested against the monomials 1 and (t - t_{n-1})/k (dG(1)) times every
    spatial basis function; time integrals use n_gauss-point Gauss. Each
    residual is divided by the largest magnitude among its terms.
    """
    part = traj.partition
    n = traj.n_dof
    out = np.zeros(part.n_intervals)
    for i in range(part.n_intervals):
        t0, t1 = part.t[i], part.t[i + 1]
        tq, wq = gauss_rule(n_gauss, t0, t1)
        du1, du2 = traj.derivative(i + 1)
        prev, plus = traj.state(i), traj.plus(i)
        jump1 = matvec(A, plus.u1_minus - prev.u1_minus)
        jump2 = matvec(M, plus.u2_minus - prev.u2_minus)
        worst = 0.0
        for p in range(traj.q + 1):
            chi = ((tq - t0) / (t1 - t0)) ** p
            chi0 = 1.0 if p == 0 else 0.0
            terms1 = [chi0 * jump1]
            terms2 = [chi0 * jump2]
            for t, w, c in zip(tq, wq, chi):
                u1, u2 = traj.eval(t)
                terms1 += [w * c * matvec(A, du1), -w * c * matvec(A, u2)]
                terms2 += [w * c * matvec(M, du2), w * c * matvec(A, u1)]
                if load is not None:
                    terms2.append(-w * c * load(t))
            for terms in (terms1, terms2):
                total = np.sum(terms, axis=0)
                scale = max(np.abs(terms).max(), np.finfo(float).tiny)
                worst = max(worst, float(np.abs(total).max() / scale))
        out[i] = worst
    return out
