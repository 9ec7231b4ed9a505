"""Continuous P1 finite elements on an interval with homogeneous Dirichlet ends."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .sparse import Factorization, SparseMatrix, matvec

QUAD_POINTS = 5


@lru_cache(maxsize=None)
def gauss_rule(n: int, a: float = 0.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    x, w = a + half * (x + 1.0), half * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True, eq=False)
class Mesh1D:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 3:
            raise ValueError("a mesh needs at least two elements")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def nx(self) -> int:
        return len(self.nodes) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        return float(self.widths.max())

    def quadrature(self, n: int = QUAD_POINTS) -> tuple[np.ndarray, np.ndarray]:
        """Per-element Gauss points and weights, both shaped (nx, n)."""
        ref_x, ref_w = gauss_rule(n)
        x = self.nodes[:-1, None] + self.widths[:, None] * ref_x[None, :]
        w = self.widths[:, None] * ref_w[None, :]
        return x, w


def build_uniform_mesh(a: float, b: float, nx: int) -> Mesh1D:
    if nx < 2:
        raise ValueError(f"nx must be at least 2 to leave an interior dof, got {nx}")
    if not b > a:
        raise ValueError("need b > a")
    return Mesh1D(np.linspace(a, b, nx + 1))


class FeSpace:
    """P1 space on a mesh; dof j lives on interior node j+1."""

    degree = 1

    def __init__(self, mesh: Mesh1D):
        self.mesh = mesh

    @property
    def n_dof(self) -> int:
        return self.mesh.nx - 1

    @property
    def dof_nodes(self) -> np.ndarray:
        return np.arange(1, self.mesh.nx)

    def full_nodal(self, coeffs) -> np.ndarray:
        """Nodal values including the two zero boundary values."""
        return np.concatenate([[0.0], np.asarray(coeffs, dtype=float), [0.0]])

    def interpolate(self, g: Callable) -> "FeFunction":
        return FeFunction(self, np.asarray(g(self.mesh.nodes[1:-1]), dtype=float))

    def evaluate(self, coeffs, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.interp(x, self.mesh.nodes, self.full_nodal(coeffs))

    def element_values(self, coeffs, ref_x) -> tuple[np.ndarray, np.ndarray]:
        """Values and derivatives at reference points ref_x in every element."""
        u = self.full_nodal(coeffs)
        left, right = u[:-1, None], u[1:, None]
        ref_x = np.asarray(ref_x)[None, :]
        vals = left * (1.0 - ref_x) + right * ref_x
        ders = np.broadcast_to((right - left) / self.mesh.widths[:, None], vals.shape)
        return vals, ders

    def basis_at(self, x0: float) -> np.ndarray:
        """Values of all dof basis functions at a point."""
        nodes = self.mesh.nodes
        if not nodes[0] <= x0 <= nodes[-1]:
            raise ValueError(f"x = {x0} lies outside the mesh")
        e = min(int(np.searchsorted(nodes, x0, side="right")) - 1, self.mesh.nx - 1)
        s = (x0 - nodes[e]) / (nodes[e + 1] - nodes[e])
        full = np.zeros(self.mesh.nx + 1)
        full[e], full[e + 1] = 1.0 - s, s
        return full[1:-1]


@dataclass
class FeFunction:
    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_dof,):
            raise ValueError("coefficient vector does not match the space")

    def __call__(self, x):
        return self.space.evaluate(self.coeffs, x)


@dataclass(frozen=True)
class ExactField:
    """Closed-form field u(x, t) with its spatial derivative."""

    value: Callable
    dx: Callable

    def at(self, t: float) -> Callable:
        return lambda x: self.value(x, t)


def _assemble_tridiag(space: FeSpace, local: Callable) -> SparseMatrix:
    """Assemble 2x2 element matrices local(h) and keep interior rows/cols."""
    mesh = space.mesh
    rows, cols, vals = [], [], []
    for e, h in enumerate(mesh.widths):
        k = local(h)
        for p in range(2):
            for q in range(2):
                i, j = e + p - 1, e + q - 1
                if 0 <= i < space.n_dof and 0 <= j < space.n_dof:
                    rows.append(i)
                    cols.append(j)
                    vals.append(k[p][q])
    return SparseMatrix.from_coo(space.n_dof, space.n_dof, rows, cols, vals, symmetric=True)


def assemble_mass(space: FeSpace) -> SparseMatrix:
    return _assemble_tridiag(space, lambda h: ((h / 3.0, h / 6.0), (h / 6.0, h / 3.0)))


def assemble_stiffness(space: FeSpace) -> SparseMatrix:
    return _assemble_tridiag(space, lambda h: ((1.0 / h, -1.0 / h), (-1.0 / h, 1.0 / h)))


def _scatter(space: FeSpace, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Combine per-element contributions to the left/right hat functions."""
    full = np.zeros(space.mesh.nx + 1)
    full[:-1] += left
    full[1:] += right
    return full[1:-1]


def assemble_load(space: FeSpace, g: Callable, n_quad: int = QUAD_POINTS) -> np.ndarray:
    """b_i = int g phi_i dx by per-element Gauss quadrature."""
    ref_x, _ = gauss_rule(n_quad)
    x, w = space.mesh.quadrature(n_quad)
    gw = np.asarray(g(x), dtype=float) * w
    gw = np.broadcast_to(gw, x.shape)
    return _scatter(space, gw @ (1.0 - ref_x), gw @ ref_x)


def assemble_derivative_load(space: FeSpace, dg: Callable, n_quad: int = QUAD_POINTS) -> np.ndarray:
    """b_i = int g' phi_i' dx, given g' directly."""
    x, w = space.mesh.quadrature(n_quad)
    integral = (np.broadcast_to(np.asarray(dg(x), dtype=float), x.shape) * w).sum(axis=1)
    slope = integral / space.mesh.widths
    return _scatter(space, -slope, slope)


def ritz_project(space: FeSpace, v: ExactField, t: float = 0.0, stiffness=None) -> FeFunction:
    A = stiffness if stiffness is not None else assemble_stiffness(space)
    rhs = assemble_derivative_load(space, lambda x: v.dx(x, t))
    return FeFunction(space, Factorization(A, spd_hint=True).solve(rhs))


def l2_project(space: FeSpace, v: Callable, mass=None) -> FeFunction:
    M = mass if mass is not None else assemble_mass(space)
    return FeFunction(space, Factorization(M, spd_hint=True).solve(assemble_load(space, v)))


def error_norms(space: FeSpace, u_h, exact: ExactField, t: float,
                n_quad: int = QUAD_POINTS) -> tuple[float, float]:
    """L2 and H1-seminorm errors of u_h (FeFunction or coefficients) against exact(., t)."""
    coeffs = u_h.coeffs if isinstance(u_h, FeFunction) else np.asarray(u_h, dtype=float)
    ref_x, _ = gauss_rule(n_quad)
    x, w = space.mesh.quadrature(n_quad)
    vals, ders = space.element_values(coeffs, ref_x)
    du = vals - exact.value(x, t)
    ddu = ders - exact.dx(x, t)
    return float(np.sqrt(np.sum(w * du * du))), float(np.sqrt(np.sum(w * ddu * ddu)))


def orthogonality_residual(space: FeSpace, coeffs, v, kind: str, t: float = 0.0) -> float:
    """max_j of a(u_h - v, phi_j) (kind='ritz') or (u_h - v, phi_j) (kind='l2')."""
    if kind == "ritz":
        r = matvec(assemble_stiffness(space), coeffs) - assemble_derivative_load(
            space, lambda x: v.dx(x, t))
    elif kind == "l2":
        r = matvec(assemble_mass(space), coeffs) - assemble_load(space, v)
    else:
        raise ValueError(f"unknown projection kind {kind!r}")
    return float(np.abs(r).max())
