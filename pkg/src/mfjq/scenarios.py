"""Canned desk-scale experiments.

* free / controlled kinetic bounded-confidence opinion dynamics on [0, 10]
  (clustering without control, consensus with the sparse feedback), and
* the mass-concentration demo for a steepest-descent gain limited by how
  much of the crowd it may touch (population budget), which piles mass up
  into a near-Dirac in finite time.

Scenario parameters live in JSON files shipped with the package
(``scenario_specs/``); every run is deterministic given (seed, config).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from importlib import resources
from typing import Optional

import numpy as np

from .controller import ControllerState, SearchConfig
from .kernels import constant_kernel, make_kernel
from .lyapunov import MomentFunctional, make_functional, variance_about
from .measures import (GridMeasure, Measure, ParticleMeasure, SupportBall,
                       moment)
from .solver import Dynamics, SolverConfig, TrajectoryLog, evolve

BUILTIN_SCENARIOS = ("hk_free", "hk_ctrl_h02", "hk_ctrl_h05", "hk_ctrl_h09",
                     "concentration")


@dataclass
class ScenarioSpec:
    name: str
    seed: int = 42
    backend: str = "grid"
    interval: tuple = (0.0, 10.0)     # support of the random initial density
    domain: tuple = (-12.0, 12.0)     # grid extent (contains the support ball)
    n_cells: int = 400
    radius: float = 12.0
    epsilon: float = 0.05
    dt: float = 0.01
    t_end: float = 50.0
    kernel: str = "hk"
    kernel_params: dict = field(default_factory=dict)
    functional: str = "variance_recentred"
    controller: Optional[dict] = None
    snapshot_every: Optional[float] = 5.0
    cluster_mass_floor: float = 1e-3
    n_particles: int = 2000
    concentration: Optional[dict] = None
    initial_density: Optional[list] = None  # explicit cell masses (overrides seed)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        for key in ("interval", "domain"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ScenarioSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def builtin(cls, name: str) -> "ScenarioSpec":
        if name not in BUILTIN_SCENARIOS:
            raise KeyError(f"unknown scenario {name!r}")
        text = resources.files("mfjq.scenario_specs").joinpath(f"{name}.json").read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["interval"] = list(self.interval)
        d["domain"] = list(self.domain)
        return d

    def apply_overrides(self, **kw) -> "ScenarioSpec":
        d = self.to_dict()
        ctrl_keys = {"h", "c", "kappa"}
        for k, v in kw.items():
            if v is None:
                continue
            if k in ctrl_keys:
                if d.get("controller") is None:
                    raise ValueError(f"override {k!r} needs a controlled scenario")
                d["controller"][k] = v
            elif k == "cells":
                d["n_cells"] = v
            else:
                if k not in d:
                    raise KeyError(f"unknown override {k!r}")
                d[k] = v
        return ScenarioSpec.from_dict(d)


@dataclass(frozen=True)
class Cluster:
    center: float
    mass: float
    width: float


@dataclass(frozen=True)
class ClusterReport:
    clusters: tuple
    consensus: bool

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


def detect_clusters(mu: GridMeasure, gap: float, floor: float) -> ClusterReport:
    """Group above-floor cells into clusters separated by at least ``gap``.

    ``floor`` is a per-cell mass floor.  Consensus means one cluster carries
    at least 99% of the mass.
    """
    if not gap > 0:
        raise ValueError("gap must be positive")
    centers = mu.centers
    idx = np.flatnonzero(mu.cell_mass > floor)
    clusters = []
    if idx.size:
        breaks = np.flatnonzero(np.diff(centers[idx]) >= gap)
        start = 0
        for stop in list(breaks + 1) + [idx.size]:
            cells = idx[start:stop]
            m = mu.cell_mass[cells].sum()
            center = float(np.dot(centers[cells], mu.cell_mass[cells]) / m)
            width = float(centers[cells[-1]] - centers[cells[0]] + mu.dx)
            clusters.append(Cluster(center, float(m), width))
            start = stop
    consensus = any(cl.mass >= 0.99 for cl in clusters)
    return ClusterReport(tuple(clusters), consensus)


def make_initial_measure(spec: ScenarioSpec) -> GridMeasure:
    """Uniform-random cell masses on the initial interval, fixed by the seed."""
    x_min, x_max = spec.domain
    if spec.initial_density is not None:
        return GridMeasure(x_min, x_max, np.asarray(spec.initial_density))
    dx = (x_max - x_min) / spec.n_cells
    centers = x_min + (np.arange(spec.n_cells) + 0.5) * dx
    lo, hi = spec.interval
    inside = (centers >= lo) & (centers <= hi)
    rng = np.random.default_rng(spec.seed)
    mass = np.where(inside, rng.random(spec.n_cells), 0.0)
    return GridMeasure(x_min, x_max, mass / mass.sum())


def _controller_state(spec: ScenarioSpec) -> ControllerState:
    cfg = dict(spec.controller or {})
    search = cfg.get("search", {})
    # On a grid the ramps must span a couple of cells or the face-velocity
    # upwinding sees a bump that is zero at every edge near its boundary.
    dx = (spec.domain[1] - spec.domain[0]) / spec.n_cells
    default_floor = 2.0 * dx if spec.backend == "grid" else 0.0
    return ControllerState(
        c=cfg.get("c", 2.0), h=cfg.get("h", 0.5), radius=spec.radius,
        kappa=cfg.get("kappa", 1.0), eps_sign=cfg.get("eps_sign", 1e-9),
        eta_floor=cfg.get("eta_floor", default_floor),
        search=SearchConfig(n_a=search.get("n_a", 64), n_w=search.get("n_w", 16),
                            n_eta=search.get("n_eta", 8),
                            refinement_rounds=search.get("refine", 2)))


def _functional(spec: ScenarioSpec, mu0: Measure) -> MomentFunctional:
    if spec.functional == "variance_recentred":
        x_bar = moment(mu0, lambda x: x)
        return variance_about(x_bar, spec.radius)
    return make_functional(spec.functional, spec.radius)


def _solver_config(spec: ScenarioSpec) -> SolverConfig:
    return SolverConfig(dt=spec.dt, t_end=spec.t_end,
                        snapshot_every=spec.snapshot_every)


def run_hk_uncontrolled(spec: ScenarioSpec) -> tuple[TrajectoryLog, ClusterReport]:
    """Free evolution; reports the surviving opinion clusters."""
    mu0 = make_initial_measure(spec)
    V = _functional(spec, mu0)
    f = make_kernel(spec.kernel, epsilon=spec.epsilon, **spec.kernel_params)
    dyn = Dynamics(f_kernel=f)
    log = evolve(mu0, dyn, _solver_config(spec), SupportBall(spec.radius), V)
    final = log.snapshots[-1][1] if log.snapshots else mu0
    report = detect_clusters(final, gap=1.0 + spec.epsilon,
                             floor=spec.cluster_mass_floor)
    log.meta["cluster_report"] = report
    return log, report


def run_hk_controlled(spec: ScenarioSpec) -> tuple[TrajectoryLog, ClusterReport]:
    """Feedback-controlled evolution; logs the time V drops below 1% of V(0)."""
    if spec.controller is None:
        raise ValueError("controlled scenario needs a controller config")
    mu0 = make_initial_measure(spec)
    V = _functional(spec, mu0)
    f = make_kernel(spec.kernel, epsilon=spec.epsilon, **spec.kernel_params)
    dyn = Dynamics(f_kernel=f, g_kernels=(constant_kernel(1.0),),
                   controller=_controller_state(spec))
    log = evolve(mu0, dyn, _solver_config(spec), SupportBall(spec.radius), V)
    v = log.V
    below = np.flatnonzero(v < 0.01 * v[0])
    log.meta["consensus_time"] = float(log.t[below[0]]) if below.size else None
    final = log.snapshots[-1][1] if log.snapshots else mu0
    report = detect_clusters(final, gap=1.0 + spec.epsilon,
                             floor=spec.cluster_mass_floor)
    log.meta["cluster_report"] = report
    return log, report


# ---------------------------------------------------------------------------
# Mass concentration under a population budget
# ---------------------------------------------------------------------------

def default_epsilon_schedule(c: float, n_intervals: int = 20,
                             t_end_frac: float = 0.95) -> list:
    """Piecewise schedule [(t_i, eps_i)]: eps_i active until t_i, eps_i = (c - t_i)/2."""
    ts = np.linspace(0.0, t_end_frac * c, n_intervals + 1)[1:]
    return [(float(t), float((c - t) / 2.0)) for t in ts]


def _smoothstep(y: np.ndarray) -> np.ndarray:
    y = np.clip(y, 0.0, 1.0)
    return y * y * (3.0 - 2.0 * y)


def concentration_gain(c: float, eps: float):
    """Gain equal to -1 on [1-c+eps, 1], 0 left of 1-c and right of 1+eps,
    with smooth ramps of width eps on both sides."""

    def u(x):
        x = np.asarray(x, dtype=float)
        left = _smoothstep((x - (1.0 - c)) / eps)
        right = _smoothstep((1.0 + eps - x) / eps)
        return -np.minimum(left, right)

    return u


def run_concentration_demo(c: float, epsilons: Optional[list] = None,
                           n_particles: int = 5000, dt: float = 1e-3,
                           seed: int = 42) -> tuple[TrajectoryLog, dict]:
    """Drive a uniform density on [0, 1] toward chi_[0,1-c] + c*delta_{1-c}.

    The gain acts only where at most mass c of the crowd sits; shrinking the
    ramp width along the schedule concentrates that mass at 1 - c.
    """
    if epsilons is None:
        epsilons = default_epsilon_schedule(c)
    # each ramp width must stay strictly below c - t for the whole interval,
    # i.e. up to the interval's right end t_i
    for t_i, eps_i in epsilons:
        if not (0.0 < eps_i < c - t_i):
            raise ValueError(f"schedule violates eps < c - t at t={t_i}")
    t_end = epsilons[-1][0]
    times = np.array([t for t, _ in epsilons])
    eps_vals = [e for _, e in epsilons]

    def prescribed(t):
        i = int(np.searchsorted(times, t, side="left"))
        i = min(i, len(eps_vals) - 1)
        return concentration_gain(c, eps_vals[i])

    def eps_at(t):
        i = min(int(np.searchsorted(times, t, side="left")), len(eps_vals) - 1)
        return eps_vals[i]

    x0 = (np.arange(n_particles) + 0.5) / n_particles
    mu0 = ParticleMeasure(x0[:, None], np.full(n_particles, 1.0 / n_particles))
    V = variance_about(0.0, radius=2.0)
    dyn = Dynamics(f_kernel=None, g_kernels=(constant_kernel(1.0),),
                   prescribed_control=prescribed, taper=0.2)
    config = SolverConfig(dt=dt, t_end=t_end, snapshot_every=max(t_end / 50.0, dt),
                          log_every=10)
    log = evolve(mu0, dyn, config, SupportBall(2.0), V)

    snap_t, omega_mass, window_mass, left_density = [], [], [], []
    target = 1.0 - c
    for t, mu in log.snapshots:
        x = mu.x
        eps = eps_at(t)
        snap_t.append(t)
        omega_mass.append(float(mu.weights[(x >= target) & (x <= 1.0 + eps)].sum()))
        window_mass.append(float(
            mu.weights[(x >= target - 0.02) & (x <= target + 0.02)].sum()))
        sel = (x >= 0.0) & (x <= target - 0.02)
        left_density.append(float(mu.weights[sel].sum() / (target - 0.02)))
    report = dict(t=np.array(snap_t), omega_mass=np.array(omega_mass),
                  window_mass=np.array(window_mass),
                  left_density=np.array(left_density), c=c,
                  final=log.snapshots[-1][1] if log.snapshots else mu0)
    return log, report
