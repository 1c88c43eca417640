import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfjq.controller import bump_1d
from mfjq.kernels import HKKernel, nonlocal_field
from mfjq.lyapunov import (MomentFunctional, TargetSet, abs_moment,
                           diff_bound_check, distance_to_target,
                           lie_derivative, lie_derivative_fd_oracle,
                           make_functional, value, variance_about)
from mfjq.measures import GridMeasure, ParticleMeasure


def random_particles(rng, n, span=5.0):
    x = rng.uniform(-span, span, n)
    w = rng.uniform(0.1, 1.0, n)
    return ParticleMeasure(x[:, None], w / w.sum())


def random_field(rng):
    if rng.random() < 0.5:
        kern = HKKernel(0.05).interaction()
        return nonlocal_field(kern, random_particles(rng, 20))
    a = rng.uniform(-5.0, 4.0)
    b = a + rng.uniform(0.0, 1.0)
    eta = rng.uniform(0.05, 0.5)
    sgn = rng.choice([-1.0, 1.0])
    return lambda x: sgn * bump_1d(a, b, eta, x)


class TestValue:
    def test_variance_of_dirac_is_zero(self):
        V = variance_about(0.0, radius=5.0)
        assert value(V, ParticleMeasure.dirac(0.0)) == 0.0

    def test_variance_two_atoms(self):
        V = variance_about(0.0, radius=5.0)
        mu = ParticleMeasure(np.array([[1.0], [-1.0]]), np.array([0.5, 0.5]))
        assert value(V, mu) == pytest.approx(1.0)

    def test_variance_uniform_grid(self):
        V = variance_about(0.0, radius=5.0)
        mu = GridMeasure.uniform(-1.0, 1.0, -1.0, 1.0, 800)
        assert value(V, mu) == pytest.approx(1.0 / 3.0, abs=1e-5)

    def test_recentring(self):
        V = variance_about(2.0, radius=5.0)
        assert value(V, ParticleMeasure.dirac(2.0)) == 0.0

    def test_make_functional(self):
        assert make_functional("variance0", 5.0).name == "variance0"
        assert make_functional("abs_moment", 5.0).name == "abs_moment"
        with pytest.raises(KeyError):
            make_functional("nope", 5.0)

    def test_k_bound_validation(self):
        with pytest.raises(ValueError):
            MomentFunctional(v=lambda x: x, v_prime=lambda x: 1.0, k_bound=-1.0)


class TestLieDerivative:
    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_matches_fd_oracle(self, seed):
        rng = np.random.default_rng(seed)
        V = variance_about(0.0, radius=6.0)
        mu = random_particles(rng, int(rng.integers(2, 50)))
        field = random_field(rng)
        exact = lie_derivative(V, field, mu)
        approx = lie_derivative_fd_oracle(V, field, mu, tau=1e-4)
        assert abs(exact - approx) <= 1e-5 * max(abs(exact), 1e-10)

    @given(lam=st.floats(-10, 10), seed=st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_homogeneity(self, lam, seed):
        rng = np.random.default_rng(seed)
        V = variance_about(0.0, radius=6.0)
        mu = random_particles(rng, 15)
        field = random_field(rng)
        lhs = lie_derivative(V, lambda x: lam * np.asarray(field(x)), mu)
        rhs = lam * lie_derivative(V, field, mu)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))

    @given(seed=st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_additivity(self, seed):
        rng = np.random.default_rng(seed)
        V = variance_about(0.0, radius=6.0)
        mu = random_particles(rng, 15)
        f1, f2 = random_field(rng), random_field(rng)
        lhs = lie_derivative(
            V, lambda x: np.asarray(f1(x)) + np.asarray(f2(x)), mu)
        rhs = lie_derivative(V, f1, mu) + lie_derivative(V, f2, mu)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))

    def test_zero_field(self):
        V = variance_about(0.0, radius=6.0)
        mu = ParticleMeasure.dirac(1.0)
        assert lie_derivative(V, lambda x: np.zeros_like(x), mu) == 0.0

    def test_oracle_tau_validation(self):
        V = variance_about(0.0, radius=6.0)
        with pytest.raises(ValueError):
            lie_derivative_fd_oracle(V, lambda x: x, ParticleMeasure.dirac(0.0),
                                     tau=0.0)


class TestDissipativity:
    """The bounded-confidence drift never increases the variance."""

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_drift_rate_nonpositive(self, seed):
        rng = np.random.default_rng(seed)
        kern = HKKernel(0.05).interaction()
        mu = random_particles(rng, int(rng.integers(2, 40)))
        V = variance_about(0.0, radius=6.0)
        assert lie_derivative(V, nonlocal_field(kern, mu), mu) <= 1e-12

    def test_two_atom_closed_form(self):
        hk = HKKernel(0.05)
        V = variance_about(0.0, radius=6.0)
        x, y = 0.5, -0.5
        mu = ParticleMeasure(np.array([[x], [y]]), np.array([0.5, 0.5]))
        rate = lie_derivative(V, nonlocal_field(hk.interaction(), mu), mu)
        assert rate == pytest.approx(-0.5 * float(hk.phi(x - y)) * (x - y) ** 2)
        assert rate == pytest.approx(-0.5)


def test_diff_bound_check():
    rng = np.random.default_rng(7)
    V = variance_about(0.0, radius=6.0)
    mu = random_particles(rng, 20)
    u = lambda x: bump_1d(-1.0, 1.0, 0.3, x)
    g = lambda x: np.ones_like(np.asarray(x, dtype=float))
    assert diff_bound_check(V, u, g, mu)


class TestTargetSet:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            TargetSet(())

    def test_distance_to_dirac(self):
        t = TargetSet.dirac(1.0)
        assert distance_to_target(ParticleMeasure.dirac(4.0), t) == pytest.approx(3.0)

    def test_min_over_family(self):
        t = TargetSet((ParticleMeasure.dirac(0.0), ParticleMeasure.dirac(10.0)))
        assert distance_to_target(ParticleMeasure.dirac(9.0), t) == pytest.approx(1.0)


def test_abs_moment_derivative_smooth_at_zero():
    V = abs_moment(radius=5.0)
    d = np.asarray(V.v_prime(np.array([0.0, 1.0, -1.0])))
    assert d[0] == 0.0
    assert d[1] == pytest.approx(1.0, abs=1e-6)
    assert d[2] == pytest.approx(-1.0, abs=1e-6)
