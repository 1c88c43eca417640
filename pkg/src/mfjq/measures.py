"""Compactly supported probability measures on the line (and particle clouds in R^d).

Two representations are used throughout:

* :class:`GridMeasure` -- cell masses on a uniform 1D grid (finite-volume
  convention: storing masses, not point densities, makes conservation exact
  by construction).
* :class:`ParticleMeasure` -- a weighted empirical measure in dimension d.

On top of these we provide moments (midpoint quadrature on grids, weighted
sums on particles), push-forwards, sup-norms and the 1D p-Wasserstein
distance computed through quantile functions.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np

MASS_TOL = 1e-12
_NEG_TOL = 1e-12


@dataclass(frozen=True)
class SupportBall:
    """Closed ball B(0, R) outside which all dynamics vanish."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"support ball radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class GridMeasure:
    """Probability measure with density piecewise constant on a uniform grid.

    ``cell_mass[i]`` is the mass in the cell [x_min + i*dx, x_min + (i+1)*dx].
    """

    x_min: float
    x_max: float
    cell_mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.cell_mass, dtype=float)
        object.__setattr__(self, "cell_mass", m)
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if m.ndim != 1 or m.size == 0:
            raise ValueError("cell_mass must be a nonempty 1D array")
        if m.min() < -_NEG_TOL:
            raise ValueError(f"negative cell mass {m.min():.3e}")
        if abs(m.sum() - 1.0) > 1e-9:
            raise ValueError(f"total mass {m.sum()!r} is not 1")

    @property
    def n_cells(self) -> int:
        return self.cell_mass.size

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def density(self) -> np.ndarray:
        return self.cell_mass / self.dx

    @classmethod
    def from_density(cls, fn: Callable[[np.ndarray], np.ndarray],
                     x_min: float, x_max: float, n_cells: int) -> "GridMeasure":
        """Sample a density at cell midpoints and normalize to mass 1."""
        dx = (x_max - x_min) / n_cells
        x = x_min + (np.arange(n_cells) + 0.5) * dx
        m = np.clip(np.asarray(fn(x), dtype=float), 0.0, None) * dx
        s = m.sum()
        if s <= 0:
            raise ValueError("density samples sum to zero")
        return cls(x_min, x_max, m / s)

    @classmethod
    def uniform(cls, lo: float, hi: float, x_min: float, x_max: float,
                n_cells: int) -> "GridMeasure":
        """Uniform density on [lo, hi], binned onto the grid (exact overlaps)."""
        edges = np.linspace(x_min, x_max, n_cells + 1)
        overlap = np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None)
        s = overlap.sum()
        if s <= 0:
            raise ValueError("interval does not intersect the grid")
        return cls(x_min, x_max, overlap / s)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "density"])
            for x, rho in zip(self.centers, self.density):
                w.writerow([f"{x:.12g}", f"{rho:.12g}"])


@dataclass(frozen=True)
class ParticleMeasure:
    """Weighted empirical measure sum_i w_i delta_{x_i} in dimension d."""

    positions: np.ndarray  # shape (n, d)
    weights: np.ndarray    # shape (n,)

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.positions, dtype=float))
        if pos.ndim == 1:
            pos = pos[:, None]
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        if pos.shape[0] != w.shape[0]:
            raise ValueError("positions and weights length mismatch")
        if w.min() < -_NEG_TOL:
            raise ValueError(f"negative weight {w.min():.3e}")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"total mass {w.sum()!r} is not 1")

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def x(self) -> np.ndarray:
        """1D positions as a flat array (dim-1 measures only)."""
        if self.dim != 1:
            raise ValueError("flat positions only defined in dimension 1")
        return self.positions[:, 0]

    @classmethod
    def dirac(cls, x) -> "ParticleMeasure":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x[None, :], np.array([1.0]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.dim == 1:
                w.writerow(["x", "weight"])
            else:
                w.writerow([f"x{i}" for i in range(self.dim)] + ["weight"])
            for p, wt in zip(self.positions, self.weights):
                w.writerow([f"{v:.12g}" for v in p] + [f"{wt:.12g}"])


Measure = Union[GridMeasure, ParticleMeasure]


def total_mass(mu: Measure) -> float:
    if isinstance(mu, GridMeasure):
        return float(mu.cell_mass.sum())
    return float(mu.weights.sum())


def as_atoms(mu: Measure) -> tuple[np.ndarray, np.ndarray]:
    """1D atomization: (positions, weights), zero-mass atoms dropped.

    Grid measures put one atom per cell at the midpoint (O(dx) in W_1).
    """
    if isinstance(mu, GridMeasure):
        x, w = mu.centers, mu.cell_mass
    else:
        x, w = mu.x, mu.weights
    keep = w > 0
    return x[keep], w[keep]


def moment(mu: Measure, v: Callable[[np.ndarray], np.ndarray]) -> float:
    """Integral of v against mu (midpoint rule on grids, O(dx^2))."""
    if isinstance(mu, GridMeasure):
        return float(np.dot(np.asarray(v(mu.centers), dtype=float), mu.cell_mass))
    if mu.dim == 1:
        vals = np.asarray(v(mu.x), dtype=float)
    else:
        vals = np.asarray(v(mu.positions), dtype=float)
    return float(np.dot(vals, mu.weights))


def sup_norm(mu: GridMeasure) -> float:
    """L-infinity norm of the piecewise-constant density."""
    if not isinstance(mu, GridMeasure):
        raise TypeError("sup_norm is defined for grid measures")
    return float(mu.cell_mass.max() / mu.dx)


def support_bounds(mu: Measure, mass_floor: float = 1e-14) -> tuple[float, float]:
    """Leftmost / rightmost location carrying more than ``mass_floor``."""
    if isinstance(mu, GridMeasure):
        idx = np.flatnonzero(mu.cell_mass > mass_floor)
        if idx.size == 0:
            return mu.x_min, mu.x_min
        e = mu.edges
        return float(e[idx[0]]), float(e[idx[-1] + 1])
    x = mu.x
    keep = mu.weights > mass_floor
    if not keep.any():
        return 0.0, 0.0
    return float(x[keep].min()), float(x[keep].max())


def _quantile_segments(mu: Measure, nu: Measure):
    """Common refinement of the two quantile partitions.

    Returns (ds, xq_mu, xq_nu): segment lengths in [0, 1] and the constant
    quantile values of each measure on each segment.
    """
    out = []
    for m in (mu, nu):
        x, w = as_atoms(m)
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        cum = np.cumsum(w)
        cum[-1] = 1.0  # kill accumulated roundoff at the top
        out.append((x, cum))
    (xa, ca), (xb, cb) = out
    levels = np.union1d(ca, cb)
    # index of the atom active on segment (levels[k-1], levels[k]]
    ia = np.searchsorted(ca, levels, side="left")
    ib = np.searchsorted(cb, levels, side="left")
    ia = np.minimum(ia, xa.size - 1)
    ib = np.minimum(ib, xb.size - 1)
    ds = np.diff(np.concatenate(([0.0], levels)))
    return ds, xa[ia], xb[ib]


def wasserstein_1d(mu: Measure, nu: Measure, p: float = 1.0) -> float:
    """p-Wasserstein distance via quantile functions.

    Exact for pairs of particle measures (common refinement of the quantile
    partitions); grid measures are atomized at cell midpoints first.
    """
    if p < 1:
        raise ValueError("order p must be >= 1")
    for m in (mu, nu):
        if isinstance(m, ParticleMeasure) and m.dim != 1:
            raise ValueError("wasserstein_1d requires 1D measures")
    ds, qa, qb = _quantile_segments(mu, nu)
    diff = np.abs(qa - qb)
    if p == 1.0:
        return float(np.dot(ds, diff))
    return float(np.dot(ds, diff ** p) ** (1.0 / p))


def translate(mu: Measure, a: float) -> Measure:
    """Exact translation by a (grid coordinates shift, atoms move)."""
    if isinstance(mu, GridMeasure):
        return replace(mu, x_min=mu.x_min + a, x_max=mu.x_max + a)
    return ParticleMeasure(mu.positions + a, mu.weights)


def _pushforward_grid(mu: GridMeasure, gamma: Callable) -> GridMeasure:
    edges = mu.edges
    img = np.asarray(gamma(edges), dtype=float)
    if np.all(np.diff(img) > 0):
        # Monotone map: push cell edges, distribute each image interval over
        # the new uniform grid proportionally to overlap. Exact for affine maps.
        lo, hi = img[0], img[-1]
        new_edges = np.linspace(lo, hi, mu.n_cells + 1)
        dxn = new_edges[1] - new_edges[0]
        new_mass = np.zeros(mu.n_cells)
        for i in range(mu.n_cells):
            a, b = img[i], img[i + 1]
            m = mu.cell_mass[i]
            if m == 0.0:
                continue
            j0 = min(int((a - lo) / dxn), mu.n_cells - 1)
            j1 = min(int((b - lo) / dxn), mu.n_cells - 1)
            if j0 == j1:
                new_mass[j0] += m
            else:
                width = b - a
                for j in range(j0, j1 + 1):
                    seg = min(b, new_edges[j + 1]) - max(a, new_edges[j])
                    new_mass[j] += m * max(seg, 0.0) / width
        return GridMeasure(lo, hi, new_mass)
    # General map: atomize cells, map atoms, re-bin on the original grid
    # (expanded if images escape it).
    k = 8
    sub = (np.arange(k) + 0.5) / k
    xs = (edges[:-1, None] + sub[None, :] * mu.dx).ravel()
    ws = np.repeat(mu.cell_mass / k, k)
    ximg = np.asarray(gamma(xs), dtype=float)
    lo = min(mu.x_min, float(ximg.min()))
    hi = max(mu.x_max, float(ximg.max()))
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    n = mu.n_cells
    idx = np.clip(((ximg - lo) / (hi - lo) * n).astype(int), 0, n - 1)
    new_mass = np.bincount(idx, weights=ws, minlength=n)
    return GridMeasure(lo, hi, new_mass)


def pushforward(mu: Measure, gamma: Callable) -> Measure:
    """Push-forward gamma#mu; total mass is preserved exactly."""
    if isinstance(mu, ParticleMeasure):
        if mu.dim == 1:
            pos = np.asarray(gamma(mu.x), dtype=float)[:, None]
        else:
            pos = np.asarray(gamma(mu.positions), dtype=float)
        return ParticleMeasure(pos, mu.weights)
    return _pushforward_grid(mu, gamma)
