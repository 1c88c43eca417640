"""Moment functionals V[mu] = integral v d mu and their rates of change.

The rate of change of V when mu is transported by a velocity field w is
computed in closed form as integral v'(x) w(x) d mu(x).  The closed form is
validated against a brute-force finite-difference oracle that actually
pushes the measure along the frozen field (see
:func:`lie_derivative_fd_oracle`), which is used only in tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .measures import (Measure, ParticleMeasure, as_atoms, moment,
                       wasserstein_1d)


@dataclass(frozen=True)
class MomentFunctional:
    """Scalar functional mu -> integral v d mu with explicit derivative v'.

    ``k_bound`` bounds |rate along u*g| by k_bound * ||u||_{L1(mu)}; it is
    sup over the support ball of |v'| times the sup-norm bound of g.
    """

    v: Callable[[np.ndarray], np.ndarray]
    v_prime: Callable[[np.ndarray], np.ndarray]
    k_bound: float
    name: str = "custom"

    def __post_init__(self):
        if self.k_bound < 0:
            raise ValueError("k_bound must be nonnegative")


def variance_about(center: float, radius: float, g_bound: float = 1.0) -> MomentFunctional:
    """v(x) = (x - center)^2; k_bound from |v'| <= 2(R + |center|) on B(0, R)."""
    c = float(center)
    k = 2.0 * (radius + abs(c)) * g_bound
    return MomentFunctional(v=lambda x: (x - c) ** 2,
                            v_prime=lambda x: 2.0 * (x - c),
                            k_bound=k, name="variance0" if c == 0.0 else "variance")


def abs_moment(radius: float, g_bound: float = 1.0, smooth: float = 1e-6) -> MomentFunctional:
    """Diagnostic v(x) = |x| with derivative smoothed near 0."""
    return MomentFunctional(v=np.abs,
                            v_prime=lambda x: x / np.sqrt(x * x + smooth * smooth),
                            k_bound=g_bound, name="abs_moment")


def make_functional(name: str, radius: float, g_bound: float = 1.0,
                    center: float = 0.0) -> MomentFunctional:
    if name == "variance0":
        return variance_about(0.0, radius, g_bound)
    if name == "variance":
        return variance_about(center, radius, g_bound)
    if name == "abs_moment":
        return abs_moment(radius, g_bound)
    raise KeyError(f"unknown functional {name!r}")


def value(V: MomentFunctional, mu: Measure) -> float:
    return moment(mu, V.v)


def lie_derivative(V: MomentFunctional, field: Callable, mu: Measure) -> float:
    """Closed-form rate of V along a frozen velocity field."""
    x, w = as_atoms(mu)
    return float(np.dot(np.asarray(V.v_prime(x)) * np.asarray(field(x)), w))


def _rk4_flow(x: np.ndarray, field: Callable, tau: float, substeps: int = 4) -> np.ndarray:
    h = tau / substeps
    for _ in range(substeps):
        k1 = np.asarray(field(x))
        k2 = np.asarray(field(x + 0.5 * h * k1))
        k3 = np.asarray(field(x + 0.5 * h * k2))
        k4 = np.asarray(field(x + h * k3))
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def lie_derivative_fd_oracle(V: MomentFunctional, field: Callable, mu: Measure,
                             tau: float = 1e-4) -> float:
    """Central difference of V along the frozen-field flow (test oracle).

    Atomizes the measure, pushes the atoms forward and backward by tau with
    RK4, and returns (V[+tau] - V[-tau]) / (2 tau).  Independent of the
    closed form it validates.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    x, w = as_atoms(mu)
    xp = _rk4_flow(x, field, tau)
    xm = _rk4_flow(x, field, -tau)
    vp = float(np.dot(np.asarray(V.v(xp)), w))
    vm = float(np.dot(np.asarray(V.v(xm)), w))
    return (vp - vm) / (2.0 * tau)


def diff_bound_check(V: MomentFunctional, u: Callable, g_field: Callable,
                     mu: Measure, slack: float = 1e-12) -> bool:
    """|rate along u*g| <= k_bound * integral |u| d mu, up to roundoff slack."""
    lhs = abs(lie_derivative(V, lambda x: np.asarray(u(x)) * np.asarray(g_field(x)), mu))
    rhs = V.k_bound * moment(mu, lambda x: np.abs(u(x)))
    return lhs <= rhs + slack


@dataclass(frozen=True)
class TargetSet:
    """Finite family of target measures; proximity is the W_1 infimum."""

    measures: Sequence[Measure]
    description: str = ""

    def __post_init__(self):
        if len(self.measures) == 0:
            raise ValueError("target set must be nonempty")

    @classmethod
    def dirac(cls, x: float) -> "TargetSet":
        return cls((ParticleMeasure.dirac(x),), description=f"dirac at {x}")


def distance_to_target(mu: Measure, target: TargetSet) -> float:
    return min(wasserstein_1d(mu, nu, 1.0) for nu in target.measures)
