"""Sparse steepest-descent feedback with hysteresis.

The control is a signed mollified bump u = +/- chi^eta_[a,b] acting through
a control kernel g.  At each query the controller either holds the frozen
bump, stays idle, or re-runs a steepest-descent search for the bump whose
slope (the magnitude of the rate of change of the Lyapunov functional along
u*g) is maximal over the admissible parameter set

    |omega(a, b, eta)| = b - a + 2*eta <= c   and   eta >= eta_min(t),

with a hysteresis margin h preventing chattering between near-optimal bumps.

Slopes are evaluated with prefix sums over the sorted atoms of the measure,
so a full candidate grid costs O((n_atoms + n_candidates) log n_atoms).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .lyapunov import MomentFunctional
from .measures import Measure, as_atoms


# ---------------------------------------------------------------------------
# Bump controls
# ---------------------------------------------------------------------------

def bump_1d(a: float, b: float, eta: float, x) -> np.ndarray:
    """Mollified indicator: 1 on [a, b], 0 outside [a-eta, b+eta], linear ramps."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    if a > b:
        raise ValueError("bump requires a <= b")
    x = np.asarray(x, dtype=float)
    left = (x - a + eta) / eta
    right = (-x + b + eta) / eta
    return np.clip(np.minimum(left, right), 0.0, 1.0)


@dataclass(frozen=True)
class BumpParams:
    """The triple (a, b, eta); a and b are d-vectors, eta a scalar width."""

    a: np.ndarray
    b: np.ndarray
    eta: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a.shape != b.shape:
            raise ValueError("a and b must have the same dimension")
        if np.any(a > b + 1e-15):
            raise ValueError("bump requires a <= b componentwise")
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def dim(self) -> int:
        return self.a.size

    @property
    def volume(self) -> float:
        """Lebesgue measure of the support box omega = prod [a_i-eta, b_i+eta]."""
        return float(np.prod(self.b - self.a + 2.0 * self.eta))

    @property
    def omega(self) -> tuple[np.ndarray, np.ndarray]:
        return self.a - self.eta, self.b + self.eta


def bump_nd(params: BumpParams, x) -> np.ndarray:
    """Componentwise minimum of 1D bumps."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and params.dim == 1:
        return bump_1d(params.a[0], params.b[0], params.eta, x)
    x2 = np.atleast_2d(x)
    if x2.shape[-1] != params.dim:
        raise ValueError("dimension mismatch between x and bump parameters")
    vals = [bump_1d(params.a[i], params.b[i], params.eta, x2[..., i])
            for i in range(params.dim)]
    return np.minimum.reduce(vals)


@dataclass(frozen=True)
class ActiveControl:
    params: BumpParams
    sign: int
    field_index: int = 0

    def u(self, x) -> np.ndarray:
        return self.sign * bump_nd(self.params, x)


def control_function(params: BumpParams, sign: int):
    """Return (u, omega, |omega|) for a signed bump.

    ||u||_inf <= 1 and Lip(u) = 1/eta hold by construction.
    """
    ctrl = ActiveControl(params, sign)
    return ctrl.u, params.omega, params.volume


# ---------------------------------------------------------------------------
# Slope evaluation
# ---------------------------------------------------------------------------

class SlopeEvaluator:
    """Signed slope integrals q -> integral q(x) * bump(x) d mu(x) via prefix sums.

    q(x) = v'(x) * g(x) is fixed at construction (measure and control field
    frozen); each candidate bump then costs O(log n_atoms).
    """

    def __init__(self, mu: Measure, g_field: Callable, V: MomentFunctional):
        x, w = as_atoms(mu)
        order = np.argsort(x, kind="stable")
        self.x = x[order]
        qm = np.asarray(V.v_prime(self.x)) * np.asarray(g_field(self.x)) * w[order]
        self.c0 = np.concatenate(([0.0], np.cumsum(qm)))
        self.c1 = np.concatenate(([0.0], np.cumsum(self.x * qm)))

    def signed_batch(self, a, b, eta) -> np.ndarray:
        """Signed rate of V along bump(a,b,eta)*g, vectorized over candidates."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        eta = np.asarray(eta, dtype=float)
        x, c0, c1 = self.x, self.c0, self.c1
        iL = np.searchsorted(x, a - eta, side="left")
        iA = np.searchsorted(x, a, side="left")
        iB = np.searchsorted(x, b, side="right")
        iR = np.searchsorted(x, b + eta, side="right")
        # left ramp, atoms in [a-eta, a): weight (x - a + eta) / eta
        left = ((c1[iA] - c1[iL]) - (a - eta) * (c0[iA] - c0[iL])) / eta
        # plateau, atoms in [a, b]
        mid = c0[iB] - c0[iA]
        # right ramp, atoms in (b, b+eta]: weight (b + eta - x) / eta
        right = ((b + eta) * (c0[iR] - c0[iB]) - (c1[iR] - c1[iB])) / eta
        return left + mid + right

    def signed(self, params: BumpParams) -> float:
        return float(self.signed_batch(params.a[0], params.b[0], params.eta))

    def slope(self, params: BumpParams) -> float:
        return abs(self.signed(params))


def slope(mu: Measure, g_field: Callable, V: MomentFunctional,
          params: BumpParams) -> float:
    """|rate of V along bump(params) * g| for a frozen measure snapshot."""
    return SlopeEvaluator(mu, g_field, V).slope(params)


# ---------------------------------------------------------------------------
# Controller state machine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchConfig:
    n_a: int = 64          # candidate bump centers
    n_w: int = 16          # candidate plateau widths
    n_eta: int = 8         # candidate ramp widths
    refinement_rounds: int = 2

    def __post_init__(self):
        if min(self.n_a, self.n_w, self.n_eta) < 2:
            raise ValueError("all search grid counts must be >= 2")


@dataclass(frozen=True)
class ControllerState:
    """Configuration plus the mutable part of the switching state machine."""

    c: float                       # sparsity budget |omega| <= c
    h: float                       # hysteresis parameter in (0, 1)
    radius: float                  # search window [-R, R]
    kappa: float = 1.0             # threshold scale
    eps_sign: float = 1e-9         # sign deadband
    eta_floor: float = 0.0         # resolution floor for the ramp width
    search: SearchConfig = field(default_factory=SearchConfig)
    active: Optional[ActiveControl] = None
    t_n: float = 0.0               # last switch time
    n_switches: int = 0

    def __post_init__(self):
        if not (0.0 < self.h < 1.0):
            raise ValueError("hysteresis h must lie in (0, 1)")
        if not self.c > 0:
            raise ValueError("sparsity budget c must be positive")

    # Threshold schedule: finite at t = 0, decreasing to 0, with
    # phi_1 < phi_2 < phi_3 at every time.
    def phi1(self, t: float) -> float:
        return 0.5 * self.kappa / (1.0 + t)

    def phi2(self, t: float) -> float:
        return self.kappa / (1.0 + t)

    def phi3(self, t: float) -> float:
        return 2.0 * self.kappa / (1.0 + t)

    def eta_min(self, t: float, strict: bool = False) -> float:
        scale = 2.0 if strict else 1.0
        return max(scale / (self.kappa * (1.0 + t)), self.eta_floor)


@dataclass(frozen=True)
class ControlDecision:
    control: Optional[ActiveControl]
    switched: bool
    best_slope: float = 0.0       # best admissible slope seen this query
    current_slope: float = 0.0    # slope of the previously active bump
    candidate_slope: float = 0.0  # slope of the challenger at a hysteresis switch


def admissible(params: BumpParams, t: float, state: ControllerState,
               strict: bool = False) -> bool:
    """Membership in the admissible set (strict=True for the tighter eta bound)."""
    vol_ok = params.volume <= state.c + 1e-12
    return vol_ok and params.eta >= state.eta_min(t, strict) - 1e-12


def _candidate_grid(state: ControllerState, t: float, strict: bool):
    eta_lo = state.eta_min(t, strict)
    eta_hi = state.c / 2.0
    if eta_lo > eta_hi:
        return None
    cfg = state.search
    etas = np.linspace(eta_lo, eta_hi, cfg.n_eta)
    ms, ws, es = [], [], []
    centers = np.linspace(-state.radius, state.radius, cfg.n_a)
    for eta in etas:
        w_max = max(state.c - 2.0 * eta, 0.0)
        widths = np.linspace(0.0, w_max, cfg.n_w)
        m, w = np.meshgrid(centers, widths, indexing="ij")
        ms.append(m.ravel())
        ws.append(w.ravel())
        es.append(np.full(m.size, eta))
    return np.concatenate(ms), np.concatenate(ws), np.concatenate(es)


def _pick_best(a, b, eta, s_abs, s_signed):
    smax = float(s_abs.max())
    tol = max(1e-12, 1e-9 * smax)
    mask = s_abs >= smax - tol
    idx = np.flatnonzero(mask)
    # deterministic tie-break: lexicographically smallest (a, b, eta)
    sub = np.lexsort((eta[idx], b[idx], a[idx]))
    k = idx[sub[0]]
    return k, smax


def search_maximizer(evaluators: Sequence[SlopeEvaluator], t: float,
                     state: ControllerState, strict: bool = False):
    """Grid search + local refinement of the slope over the admissible set.

    Returns (params, field_index, slope, signed_value) or None when the
    admissible set is empty.  Ties are broken toward the lexicographically
    smallest (a, b, eta) and then the smallest field index.
    """
    grid = _candidate_grid(state, t, strict)
    if grid is None:
        return None
    m0, w0, e0 = grid
    best = None  # (slope, field_index, a, b, eta, signed)
    for i, ev in enumerate(evaluators):
        m, w, e = m0, w0, e0
        for round_ in range(state.search.refinement_rounds + 1):
            a = m - 0.5 * w
            b = m + 0.5 * w
            signed = ev.signed_batch(a, b, e)
            s_abs = np.abs(signed)
            k, _ = _pick_best(a, b, e, s_abs, signed)
            cand = (float(s_abs[k]), i, float(a[k]), float(b[k]), float(e[k]),
                    float(signed[k]))
            if best is None or cand[0] > best[0] + 1e-15:
                best = cand
            if round_ == state.search.refinement_rounds:
                break
            m, w, e = _refine_grid(state, t, strict, float(m[k]), float(w[k]),
                                   float(e[k]))
    if best is None:
        return None
    s, i, a, b, eta, signed = best
    return BumpParams(np.array([a]), np.array([b]), eta), i, s, signed


def _refine_grid(state: ControllerState, t: float, strict: bool,
                 m_c: float, w_c: float, e_c: float):
    """Local grid around the current best cell, clipped to the admissible set."""
    cfg = state.search
    R = state.radius
    dm = 2.0 * R / (cfg.n_a - 1)
    dw = state.c / (cfg.n_w - 1)
    de = state.c / 2.0 / (cfg.n_eta - 1)
    eta_lo = state.eta_min(t, strict)
    etas = np.clip(np.linspace(e_c - de, e_c + de, cfg.n_eta), eta_lo, state.c / 2.0)
    centers = np.clip(np.linspace(m_c - dm, m_c + dm, cfg.n_a), -R, R)
    ms, ws, es = [], [], []
    for eta in etas:
        w_max = max(state.c - 2.0 * eta, 0.0)
        widths = np.clip(np.linspace(w_c - dw, w_c + dw, cfg.n_w), 0.0, w_max)
        m, w = np.meshgrid(centers, widths, indexing="ij")
        ms.append(m.ravel())
        ws.append(w.ravel())
        es.append(np.full(m.size, eta))
    return np.concatenate(ms), np.concatenate(ws), np.concatenate(es)


def _sign_with_deadband(z: float, eps: float) -> int:
    if z > eps:
        return 1
    if z < -eps:
        return -1
    return 0


def _step_entry(t: float, state: ControllerState,
                evaluators: Sequence[SlopeEvaluator],
                current_slope: float) -> tuple[ControlDecision, ControllerState]:
    found = search_maximizer(evaluators, t, state, strict=False)
    if found is not None:
        params, i, s, signed = found
    if found is None or s < state.phi2(t):
        new = replace(state, active=None, t_n=t,
                      n_switches=state.n_switches + 1)
        best = 0.0 if found is None else s
        return (ControlDecision(None, True, best_slope=best,
                                current_slope=current_slope), new)
    sgn = _sign_with_deadband(signed, state.eps_sign)
    if sgn == 0:
        # unreachable when eps_sign < phi2 over the horizon; treat as idle
        new = replace(state, active=None, t_n=t, n_switches=state.n_switches + 1)
        return (ControlDecision(None, True, best_slope=s,
                                current_slope=current_slope), new)
    ctrl = ActiveControl(params, -sgn, i)
    new = replace(state, active=ctrl, t_n=t, n_switches=state.n_switches + 1)
    return (ControlDecision(ctrl, True, best_slope=s, current_slope=current_slope,
                            candidate_slope=s), new)


def decide_multi(t: float, mu: Measure, state: ControllerState,
                 g_fields: Sequence[Callable], V: MomentFunctional
                 ) -> tuple[ControlDecision, ControllerState]:
    """One controller query; at most one control field active at any time.

    Idle mode waits until some strictly admissible bump has slope >= phi3(t);
    active mode holds the frozen bump until its slope drops to phi1(t) or a
    strictly admissible challenger beats it by the hysteresis factor
    1/(1 - h).  Both exits funnel through a fresh steepest-descent search.
    """
    evaluators = [SlopeEvaluator(mu, g, V) for g in g_fields]
    if state.active is None:
        found = search_maximizer(evaluators, t, state, strict=True)
        if found is not None and found[2] >= state.phi3(t):
            return _step_entry(t, state, evaluators, current_slope=0.0)
        best = 0.0 if found is None else found[2]
        return ControlDecision(None, False, best_slope=best), state
    ctrl = state.active
    s_cur = evaluators[ctrl.field_index].slope(ctrl.params)
    if s_cur <= state.phi1(t):
        return _step_entry(t, state, evaluators, current_slope=s_cur)
    found = search_maximizer(evaluators, t, state, strict=True)
    if found is not None and s_cur <= (1.0 - state.h) * found[2]:
        dec, new = _step_entry(t, state, evaluators, current_slope=s_cur)
        return replace(dec, candidate_slope=found[2]), new
    best = s_cur if found is None else max(s_cur, found[2])
    return (ControlDecision(ctrl, False, best_slope=best,
                            current_slope=s_cur), state)


def decide(t: float, mu: Measure, state: ControllerState, g_field: Callable,
           V: MomentFunctional) -> tuple[ControlDecision, ControllerState]:
    """Single-field controller query (degenerate case of decide_multi)."""
    return decide_multi(t, mu, state, (g_field,), V)
