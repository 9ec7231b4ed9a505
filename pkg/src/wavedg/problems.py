"""Manufactured solutions for the wave equation u_tt - u_xx = f on (a, b)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fem import ExactField, FeSpace, assemble_load


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact displacement u1, velocity u2 = du1/dt and the matching source.

    The source is a smooth part f(x, t) plus optional point loads
    g(t) * delta(x - x0), which lets a piecewise-linear profile be an exact
    solution.
    """

    name: str
    u1: ExactField
    u2: ExactField
    f: Optional[Callable] = None
    point_loads: tuple = ()
    domain: tuple = (0.0, np.pi)
    time_derivative: Optional[Callable[[int], ExactField]] = field(default=None, compare=False)

    def load(self, space: FeSpace, t: float) -> np.ndarray:
        """Spatial load vector (f(t), phi_i) including point loads."""
        b = np.zeros(space.n_dof)
        if self.f is not None:
            b += assemble_load(space, lambda x: self.f(x, t))
        for x0, g in self.point_loads:
            b += g(t) * space.basis_at(x0)
        return b

    def load_fn(self, space: FeSpace):
        if self.f is None and not self.point_loads:
            return None
        return lambda t: self.load(space, t)

    @property
    def u0(self) -> ExactField:
        return self.u1

    @property
    def v0(self) -> ExactField:
        return self.u2


def default_example() -> ManufacturedSolution:
    """u = sin x cos t on (0, pi) with zero source."""
    # d^m/dt^m cos t cycles through cos, -sin, -cos, sin
    cycle = (np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t), np.sin)

    def deriv(m: int) -> ExactField:
        g = cycle[m % 4]
        return ExactField(lambda x, t: np.sin(x) * g(t), lambda x, t: np.cos(x) * g(t))

    return ManufacturedSolution(
        name="sinwave",
        u1=deriv(0),
        u2=deriv(1),
        f=None,
        time_derivative=deriv,
    )


def _tent(x):
    return np.minimum(x, np.pi - x)


def _tent_dx(x):
    return np.where(x < np.pi / 2, 1.0, -1.0)


def polynomial_in_time() -> ManufacturedSolution:
    """u1 = (1 + t) w, u2 = w with w the tent min(x, pi - x).

    w is piecewise linear with its kink at pi/2, so on meshes that have a
    node there the solution lies in the P1 space and dG(1) reproduces it.
    The source is -(1 + t) w'' = 2 (1 + t) delta(x - pi/2).
    """
    def deriv(m: int) -> ExactField:
        if m == 0:
            return ExactField(lambda x, t: (1.0 + t) * _tent(x), lambda x, t: (1.0 + t) * _tent_dx(x))
        if m == 1:
            return ExactField(lambda x, t: _tent(x) + 0.0 * t, lambda x, t: _tent_dx(x) + 0.0 * t)
        return ExactField(lambda x, t: 0.0 * x, lambda x, t: 0.0 * x)

    return ManufacturedSolution(
        name="polyt",
        u1=deriv(0),
        u2=deriv(1),
        point_loads=((np.pi / 2, lambda t: 2.0 * (1.0 + t)),),
        time_derivative=deriv,
    )


def forced_example() -> ManufacturedSolution:
    """u = sin x (1 + t + t^2), source f = sin x (3 + t + t^2).

    The source is cubic-or-lower in t, so the Gauss rules used in time
    integrate every load term exactly.
    """
    def deriv(m: int) -> ExactField:
        p = [lambda t: 1.0 + t + t * t, lambda t: 1.0 + 2.0 * t, lambda t: 2.0 + 0.0 * t]
        g = p[m] if m < 3 else (lambda t: 0.0 * t)
        return ExactField(lambda x, t: np.sin(x) * g(t), lambda x, t: np.cos(x) * g(t))

    return ManufacturedSolution(
        name="forced",
        u1=deriv(0),
        u2=deriv(1),
        f=lambda x, t: np.sin(x) * (3.0 + t + t * t),
        time_derivative=deriv,
    )


def zero_problem() -> ManufacturedSolution:
    z = ExactField(lambda x, t: 0.0 * x + 0.0 * t, lambda x, t: 0.0 * x + 0.0 * t)
    return ManufacturedSolution(name="zero", u1=z, u2=z, time_derivative=lambda m: z)


BUILTIN = {
    "sinwave": default_example,
    "polyt": polynomial_in_time,
    "forced": forced_example,
    "zero": zero_problem,
}


def get_problem(name: str) -> ManufacturedSolution:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(BUILTIN)}") from None
