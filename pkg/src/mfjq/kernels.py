"""Pairwise interaction kernels and the induced nonlocal velocity fields.

A kernel is a pairwise rule (x, y) -> velocity; the field it induces on a
measure is x -> integral of rule(x, y) d mu(y).  For weighted particle
clouds this is a weighted sum; for grid measures it is midpoint quadrature
over cells (one atom per cell).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .measures import Measure, SupportBall, as_atoms


@dataclass(frozen=True)
class InteractionKernel:
    """Pairwise rule with declared regularity constants.

    ``rule(x, y)`` must accept broadcastable float arrays.  ``lipschitz_L``
    and ``bound_M`` are the declared Lipschitz constant and sup-norm bound of
    the induced field; ``support_radius`` is the distance beyond which the
    rule vanishes (inf for global kernels).
    """

    rule: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lipschitz_L: float
    bound_M: float
    support_radius: float = np.inf
    name: str = "custom"

    def field_at(self, x_eval: np.ndarray, atoms_x: np.ndarray,
                 atoms_w: np.ndarray) -> np.ndarray:
        x_eval = np.asarray(x_eval, dtype=float)
        if atoms_x.size == 0:
            return np.zeros_like(x_eval)
        return self.rule(x_eval[..., None], atoms_x) @ atoms_w

    def field_matrix(self, x_eval: np.ndarray, atoms_x: np.ndarray) -> np.ndarray:
        """Dense rule matrix K with field = K @ weights (positions fixed)."""
        return self.rule(np.asarray(x_eval, dtype=float)[:, None], atoms_x)


@dataclass(frozen=True)
class ConstantKernel(InteractionKernel):
    """Rule identically equal to ``value``; field is ``value`` times total mass."""

    value: float = 1.0

    def field_at(self, x_eval, atoms_x, atoms_w):
        return np.full(np.shape(np.asarray(x_eval, dtype=float)),
                       self.value * float(np.sum(atoms_w)))

    def field_matrix(self, x_eval, atoms_x):
        return np.full((len(x_eval), len(atoms_x)), self.value)


def constant_kernel(value: float = 1.0) -> ConstantKernel:
    return ConstantKernel(rule=lambda x, y: np.full(np.broadcast(x, y).shape, value),
                          lipschitz_L=0.0, bound_M=abs(value),
                          support_radius=np.inf, name="constant_g", value=value)


@dataclass(frozen=True)
class HKKernel:
    """Bounded-confidence attraction with a Lipschitz ramp of width epsilon.

    The confidence weight is 1 for distances below 1, falls linearly to 0 on
    [1, 1+epsilon] and vanishes beyond.
    """

    epsilon: float = 0.05

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("mollification width epsilon must be positive")

    def phi(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        eps = self.epsilon
        ramp = -r / eps + 1.0 + 1.0 / eps
        return np.where(r < 1.0, 1.0, np.clip(ramp, 0.0, 1.0))

    def interaction(self) -> InteractionKernel:
        eps = self.epsilon

        def rule(x, y):
            d = y - x
            return self.phi(d) * d

        # sup over the ramp of |d/dr (phi(r) r)| is (1+eps)/eps + 1
        L = 1.0 + (1.0 + eps) / eps
        return InteractionKernel(rule=rule, lipschitz_L=L, bound_M=1.0 + eps,
                                 support_radius=1.0 + eps, name="hk")


def eval_phi(kernel: HKKernel, r) -> np.ndarray:
    return kernel.phi(r)


def table_kernel(path) -> InteractionKernel:
    """Piecewise-linear rule of the displacement y - x, loaded from CSV.

    The file has columns ``r,value``; the rule is zero outside the tabulated
    range.
    """
    rs, vs = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rs.append(float(row["r"]))
            vs.append(float(row["value"]))
    rs = np.asarray(rs)
    vs = np.asarray(vs)
    order = np.argsort(rs)
    rs, vs = rs[order], vs[order]

    def rule(x, y):
        return np.interp(y - x, rs, vs, left=0.0, right=0.0)

    dr = np.diff(rs)
    L = float(np.max(np.abs(np.diff(vs) / dr))) if dr.size else 0.0
    M = float(np.max(np.abs(vs)))
    radius = float(max(abs(rs[0]), abs(rs[-1])))
    return InteractionKernel(rule=rule, lipschitz_L=L, bound_M=M,
                             support_radius=radius, name="custom_table")


def make_kernel(name: str, **params) -> InteractionKernel:
    """Kernel registry used by run configs."""
    if name == "hk":
        return HKKernel(epsilon=params.get("epsilon", 0.05)).interaction()
    if name == "constant_g":
        return constant_kernel(params.get("value", 1.0))
    if name == "custom_table":
        return table_kernel(params["path"])
    raise KeyError(f"unknown kernel {name!r}")


def nonlocal_field(kernel: InteractionKernel, mu: Measure) -> Callable[[np.ndarray], np.ndarray]:
    """Pure closure x -> integral rule(x, y) d mu(y) over a measure snapshot."""
    ax, aw = as_atoms(mu)

    def field(x):
        return kernel.field_at(np.asarray(x, dtype=float), ax, aw)

    return field


def ball_cutoff(x, ball: SupportBall, taper: float) -> np.ndarray:
    """Lipschitz cutoff: 1 inside B(0, R - taper), 0 outside B(0, R)."""
    r = np.abs(np.asarray(x, dtype=float))
    return np.clip((ball.radius - r) / taper, 0.0, 1.0)


def truncate_to_ball(field: Callable, ball: SupportBall,
                     taper: float) -> Callable[[np.ndarray], np.ndarray]:
    """Multiply a velocity field by the ball cutoff so it vanishes outside B(0, R)."""
    if not taper > 0:
        raise ValueError("taper must be positive")
    if taper >= ball.radius:
        raise ValueError("taper must be smaller than the ball radius")

    def truncated(x):
        return np.asarray(field(x), dtype=float) * ball_cutoff(x, ball, taper)

    return truncated


def divergence_sup(field: Callable, sample_grid: np.ndarray) -> float:
    """Max |d field / dx| on a 1D sample grid (centered finite differences)."""
    x = np.asarray(sample_grid, dtype=float)
    v = np.asarray(field(x), dtype=float)
    return float(np.max(np.abs(np.gradient(v, x))))
