"""Named invariant suites for the `verify` CLI command.

Each suite returns a list of (check name, passed, detail) triples.  The
suites audit runtime invariants (constraints on the emitted controls, mass
conservation and positivity, closed-form vs finite-difference rates,
dissipativity of the uncontrolled drift); `all` aggregates them.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from .controller import BumpParams, bump_1d
from .kernels import HKKernel, constant_kernel, nonlocal_field
from .lyapunov import (lie_derivative, lie_derivative_fd_oracle, value,
                       variance_about)
from .measures import GridMeasure, ParticleMeasure, SupportBall, total_mass
from .scenarios import ScenarioSpec, run_hk_controlled

SUITES = ("constraints", "conservation", "oracle", "dissipativity", "all")


def _random_particles(rng, n_max=50, span=5.0) -> ParticleMeasure:
    n = int(rng.integers(2, n_max + 1))
    x = rng.uniform(-span, span, n)
    w = rng.uniform(0.1, 1.0, n)
    return ParticleMeasure(x[:, None], w / w.sum())


def suite_oracle(n_pairs: int = 100, seed: int = 0) -> list:
    """Closed-form rate of the variance vs the finite-difference oracle."""
    rng = np.random.default_rng(seed)
    V = variance_about(0.0, radius=6.0)
    hk = HKKernel(0.05).interaction()
    worst = 0.0
    for _ in range(n_pairs):
        mu = _random_particles(rng)
        if rng.random() < 0.5:
            field = nonlocal_field(hk, mu)
        else:
            a = rng.uniform(-5.0, 4.0)
            b = a + rng.uniform(0.0, 1.0)
            eta = rng.uniform(0.05, 0.5)
            sgn = rng.choice([-1.0, 1.0])
            field = (lambda x, a=a, b=b, eta=eta, sgn=sgn:
                     sgn * bump_1d(a, b, eta, x))
        exact = lie_derivative(V, field, mu)
        approx = lie_derivative_fd_oracle(V, field, mu, tau=1e-4)
        rel = abs(exact - approx) / max(abs(exact), 1e-10)
        worst = max(worst, rel)
    ok = worst <= 1e-5
    return [("lie-derivative oracle (rel 1e-5, %d pairs)" % n_pairs, ok,
             f"worst rel err {worst:.2e}")]


def suite_dissipativity(n_pairs: int = 100, seed: int = 1) -> list:
    """Non-positivity of the drift rate and the two-atom closed form."""
    rng = np.random.default_rng(seed)
    hk = HKKernel(0.05)
    kern = hk.interaction()
    V = variance_about(0.0, radius=6.0)
    worst_pos = -np.inf
    for _ in range(n_pairs):
        mu = _random_particles(rng)
        lf = lie_derivative(V, nonlocal_field(kern, mu), mu)
        worst_pos = max(worst_pos, lf)
    rows = [("drift rate of variance <= 0 (randomized)", worst_pos <= 1e-12,
             f"max rate {worst_pos:.2e}")]
    worst = 0.0
    for _ in range(n_pairs):
        x, y = rng.uniform(-5.0, 5.0, 2)
        mu = ParticleMeasure(np.array([[x], [y]]), np.array([0.5, 0.5]))
        closed = -0.5 * float(hk.phi(x - y)) * (x - y) ** 2
        fd = lie_derivative_fd_oracle(V, nonlocal_field(kern, mu), mu, tau=1e-4)
        worst = max(worst, abs(closed - fd) / max(abs(closed), 1e-10))
    rows.append(("two-atom closed form vs oracle (rel 1e-5)", worst <= 1e-5,
                 f"worst rel err {worst:.2e}"))
    return rows


def suite_conservation(seed: int = 2) -> list:
    """Mass, positivity and support containment along a short drift run."""
    from .scenarios import ScenarioSpec, run_hk_uncontrolled

    spec = ScenarioSpec(name="conservation-probe", seed=seed, t_end=2.0,
                        snapshot_every=0.5)
    log, _ = run_hk_uncontrolled(spec)
    mass = log.column("mass")
    rows = [("mass conserved to 1e-12", bool(np.max(np.abs(mass - 1.0)) <= 1e-12),
             f"max |mass-1| {np.max(np.abs(mass - 1.0)):.2e}")]
    neg = min(float(m.cell_mass.min() / m.dx) for _, m in log.snapshots)
    rows.append(("densities >= -1e-14", neg >= -1e-14, f"min density {neg:.2e}"))
    lo, hi = log.column("supp_lo"), log.column("supp_hi")
    R = log.meta["radius"]
    ok = bool(np.all(lo >= -R - 1e-9) and np.all(hi <= R + 1e-9))
    rows.append(("support inside B(0,R)", ok,
                 f"range [{lo.min():.3g}, {hi.max():.3g}], R={R}"))
    return rows


def audit_constraints_log(t, a, b, eta, sign, c: float, kappa: float = 1.0) -> list:
    """Re-check the control constraints from logged trajectory columns."""
    active = ~np.isnan(eta)
    rows = []
    if not active.any():
        return [("control constraints (no active steps)", True, "controller idle")]
    # tolerance covers the %.12g round-trip through the CSV
    vol = (b[active] - a[active]) + 2.0 * eta[active]
    rows.append(("|omega| <= c", bool(np.all(vol <= c + 1e-9)),
                 f"max |omega| {vol.max():.6g} vs c={c}"))
    rows.append(("||u||_inf <= 1", bool(np.all(np.isin(sign[active], (-1.0, 1.0)))),
                 "bump amplitude is the sign, |sign| = 1"))
    lip = 1.0 / eta[active]
    bound = kappa * (1.0 + t[active])
    rows.append(("Lip(u) = 1/eta <= kappa*(1+t)",
                 bool(np.all(lip <= bound + 1e-9)),
                 f"max excess {np.max(lip - bound):.2e}"))
    return rows


def suite_constraints(run_dir: Optional[Path] = None) -> list:
    """Audit the control constraints, from a run directory or a fresh short run."""
    if run_dir is not None:
        run_dir = Path(run_dir)
        with open(run_dir / "meta.json") as fh:
            meta = json.load(fh)
        ctrl = (meta.get("spec") or {}).get("controller") or {}
        cols = {k: [] for k in ("t", "control_a", "control_b", "control_eta",
                                "control_sign")}
        with open(run_dir / "trajectory.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                for k in cols:
                    cols[k].append(float(row[k]))
        return audit_constraints_log(
            np.array(cols["t"]), np.array(cols["control_a"]),
            np.array(cols["control_b"]), np.array(cols["control_eta"]),
            np.array(cols["control_sign"]), c=ctrl.get("c", 2.0),
            kappa=ctrl.get("kappa", 1.0))
    spec = ScenarioSpec.builtin("hk_ctrl_h05").apply_overrides(t_end=5.0)
    log, _ = run_hk_controlled(spec)
    return audit_constraints_log(log.t, log.column("control_a"),
                                 log.column("control_b"),
                                 log.column("control_eta"),
                                 log.column("control_sign"), c=2.0)


def run_suite(name: str, run_dir: Optional[Path] = None) -> list:
    if name == "oracle":
        return suite_oracle()
    if name == "dissipativity":
        return suite_dissipativity()
    if name == "conservation":
        return suite_conservation()
    if name == "constraints":
        return suite_constraints(run_dir)
    if name == "all":
        names = ["constraints", "conservation", "oracle", "dissipativity"]
        workers = int(os.environ.get("MFJQ_THREADS", "1"))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                parts = list(ex.map(lambda n: run_suite(n, run_dir), names))
        else:
            parts = [run_suite(n, run_dir) for n in names]
        return [row for part in parts for row in part]
    raise KeyError(f"unknown suite {name!r}")
