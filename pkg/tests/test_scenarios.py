import json

import numpy as np
import pytest

from mfjq.measures import GridMeasure, total_mass
from mfjq.scenarios import (BUILTIN_SCENARIOS, ScenarioSpec, concentration_gain,
                            default_epsilon_schedule, detect_clusters,
                            make_initial_measure, run_concentration_demo,
                            run_hk_controlled, run_hk_uncontrolled)


class TestScenarioSpec:
    def test_builtins_load(self):
        for name in BUILTIN_SCENARIOS:
            spec = ScenarioSpec.builtin(name)
            assert spec.name == name

    def test_unknown_builtin(self):
        with pytest.raises(KeyError):
            ScenarioSpec.builtin("nope")

    def test_roundtrip(self, tmp_path):
        spec = ScenarioSpec.builtin("hk_free")
        path = tmp_path / "s.json"
        path.write_text(json.dumps(spec.to_dict()))
        assert ScenarioSpec.from_json(path) == spec

    def test_overrides(self):
        spec = ScenarioSpec.builtin("hk_ctrl_h05")
        out = spec.apply_overrides(seed=7, cells=100, h=0.3, t_end=5.0)
        assert out.seed == 7
        assert out.n_cells == 100
        assert out.controller["h"] == 0.3
        assert out.t_end == 5.0
        # None overrides are ignored
        assert spec.apply_overrides(seed=None) == spec

    def test_controller_override_needs_controller(self):
        with pytest.raises(ValueError):
            ScenarioSpec.builtin("hk_free").apply_overrides(h=0.3)

    def test_unknown_override(self):
        with pytest.raises(KeyError):
            ScenarioSpec.builtin("hk_free").apply_overrides(bogus=1)


class TestInitialMeasure:
    def test_deterministic_in_seed(self):
        spec = ScenarioSpec(name="x", seed=123)
        a = make_initial_measure(spec)
        b = make_initial_measure(spec)
        np.testing.assert_array_equal(a.cell_mass, b.cell_mass)
        c = make_initial_measure(ScenarioSpec(name="x", seed=124))
        assert not np.array_equal(a.cell_mass, c.cell_mass)

    def test_supported_on_interval(self):
        spec = ScenarioSpec(name="x", seed=1)
        mu = make_initial_measure(spec)
        lo, hi = spec.interval
        outside = (mu.centers < lo) | (mu.centers > hi)
        assert np.all(mu.cell_mass[outside] == 0.0)
        assert total_mass(mu) == pytest.approx(1.0, abs=1e-12)

    def test_explicit_density_override(self):
        m = np.zeros(10)
        m[4:6] = 0.5
        spec = ScenarioSpec(name="x", n_cells=10, initial_density=list(m))
        mu = make_initial_measure(spec)
        np.testing.assert_array_equal(mu.cell_mass, m)


class TestDetectClusters:
    def grid(self, mass):
        m = np.asarray(mass, dtype=float)
        return GridMeasure(0.0, float(m.size), m / m.sum())

    def test_single_cluster_consensus(self):
        m = np.zeros(20)
        m[10] = 1.0
        rep = detect_clusters(self.grid(m), gap=1.05, floor=1e-3)
        assert rep.n_clusters == 1
        assert rep.consensus

    def test_two_separated_clusters(self):
        m = np.zeros(20)
        m[2] = 0.5
        m[15] = 0.5
        rep = detect_clusters(self.grid(m), gap=1.05, floor=1e-3)
        assert rep.n_clusters == 2
        assert not rep.consensus
        assert rep.clusters[0].center == pytest.approx(2.5)
        assert rep.clusters[1].center == pytest.approx(15.5)

    def test_floor_drops_debris(self):
        m = np.zeros(20)
        m[10] = 1.0
        m[3] = 1e-5
        rep = detect_clusters(self.grid(m), gap=1.05, floor=1e-3)
        assert rep.n_clusters == 1

    def test_adjacent_cells_merge(self):
        m = np.zeros(20)
        m[9:12] = 1.0
        rep = detect_clusters(self.grid(m), gap=1.05, floor=1e-3)
        assert rep.n_clusters == 1
        assert rep.clusters[0].width == pytest.approx(3.0)

    def test_gap_validation(self):
        with pytest.raises(ValueError):
            detect_clusters(self.grid(np.ones(4)), gap=0.0, floor=1e-3)

    def test_masses_sum_below_one(self):
        rng = np.random.default_rng(0)
        m = rng.random(50)
        rep = detect_clusters(self.grid(m), gap=1.05, floor=1e-3)
        assert sum(c.mass for c in rep.clusters) <= 1.0 + 1e-9


class TestShortRuns:
    """Cheap truncated versions of the full scenarios (full scale is covered
    by the acceptance suite)."""

    def test_uncontrolled_runs(self):
        spec = ScenarioSpec.builtin("hk_free").apply_overrides(t_end=2.0)
        log, rep = run_hk_uncontrolled(spec)
        assert np.max(np.abs(log.column("mass") - 1.0)) <= 1e-12
        assert log.t[-1] == pytest.approx(2.0)

    def test_narrow_bump_reaches_consensus(self):
        # support within the confidence radius contracts to one cluster
        spec = ScenarioSpec(name="narrow", n_cells=200, domain=(-3.0, 3.0),
                            radius=3.0, interval=(0.0, 0.5), t_end=8.0,
                            dt=0.01, seed=5, snapshot_every=4.0)
        log, rep = run_hk_uncontrolled(spec)
        assert rep.consensus
        assert log.V[-1] < 0.01 * log.V[0]

    def test_controlled_requires_controller(self):
        with pytest.raises(ValueError):
            run_hk_controlled(ScenarioSpec.builtin("hk_free"))

    def test_controlled_short_run_decreases_V(self):
        spec = ScenarioSpec.builtin("hk_ctrl_h05").apply_overrides(t_end=5.0)
        log, _ = run_hk_controlled(spec)
        assert log.V[-1] < log.V[0]
        assert "consensus_time" in log.meta

    def test_delta_like_initial_data_stays_idle(self):
        m = np.zeros(400)
        m[200] = 1.0
        spec = ScenarioSpec.builtin("hk_ctrl_h05").apply_overrides(t_end=3.0)
        spec = ScenarioSpec.from_dict({**spec.to_dict(),
                                       "initial_density": list(m)})
        log, _ = run_hk_controlled(spec)
        assert log.n_switches == 0
        assert np.all(np.isnan(log.column("control_eta")))


class TestConcentration:
    def test_schedule_is_valid(self):
        c = 0.5
        sched = default_epsilon_schedule(c)
        t_prev = 0.0
        for t, eps in sched:
            assert 0.0 < eps < c - t_prev
            assert eps == pytest.approx((c - t) / 2.0)
            t_prev = t
        assert sched[-1][0] == pytest.approx(0.95 * c)

    def test_bad_schedule_rejected(self):
        with pytest.raises(ValueError):
            run_concentration_demo(0.5, epsilons=[(0.4, 0.3)], n_particles=10)

    def test_gain_shape(self):
        u = concentration_gain(0.5, 0.1)
        x = np.array([0.3, 0.7, 1.0, 1.2, 0.5])
        vals = u(x)
        assert vals[0] == 0.0          # left of 1-c
        assert vals[1] == -1.0         # inside the window
        assert vals[2] == -1.0
        assert vals[3] == 0.0          # right of 1+eps
        assert -1.0 <= vals[4] <= 0.0  # on the ramp
        assert np.max(np.abs(u(np.linspace(-1, 2, 500)))) <= 1.0

    def test_small_demo_concentrates(self):
        log, rep = run_concentration_demo(0.5, n_particles=500, dt=2e-3)
        # population budget respected throughout
        assert rep["omega_mass"].max() <= 0.5 + 1e-3
        # mass piles up near 1 - c
        assert rep["window_mass"][-1] > rep["window_mass"][0]
        assert rep["window_mass"][-1] >= 0.4
