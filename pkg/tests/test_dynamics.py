"""Vector field forms, power identities, integration, and sync detection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bisect_root, build_model, random_model, reference_rhs
from lossy_kuramoto.dynamics import (PhaseState, Trajectory, active_power,
                                     advance, detect_synchronization,
                                     draw_initial_phases, integrate, rhs,
                                     rhs_sine_form, wrap_to_pi)
from lossy_kuramoto.errors import IntegrationDivergedError, ValidationError
from lossy_kuramoto.network import DEFAULT_RANGES, derive, generate_random

TWO_PI = 2.0 * np.pi


class TestWrap:
    def test_reference_points(self):
        assert wrap_to_pi(np.pi) == np.pi
        assert wrap_to_pi(-np.pi) == np.pi
        assert wrap_to_pi(0.0) == 0.0
        assert wrap_to_pi(1.5 * np.pi) == pytest.approx(-0.5 * np.pi, abs=1e-15)

    @given(st.floats(-50.0, 50.0))
    def test_range_and_periodicity(self, x):
        w = float(wrap_to_pi(x))
        assert -np.pi < w <= np.pi
        assert np.sin(w) == pytest.approx(np.sin(x), abs=1e-9)
        assert np.cos(w) == pytest.approx(np.cos(x), abs=1e-9)


class TestVectorField:
    def test_uniform_phase_components(self):
        # At zero differences the sine terms vanish and every cosine is 1.
        model = build_model([(0, 1), (1, 2)], a=[0.4, 0.7], b=[2.0, 1.5],
                            kp=[0.1, 0.2, 0.3], varpi=[0.5, -0.2, 0.1])
        out = rhs(model, np.full(3, 1.3))
        a_sums = np.array([0.4, 1.1, 0.7])
        expected = TWO_PI * np.array([0.1, 0.2, 0.3]) * (model.natural_frequency + a_sums)
        assert np.allclose(out, expected, atol=1e-14)

    def test_matches_nodewise_reference(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            model = random_model(rng)
            delta = rng.uniform(-np.pi, np.pi, model.node_count)
            assert np.abs(rhs(model, delta) - reference_rhs(model, delta)).max() < 1e-13

    @given(st.floats(-100.0, 100.0), st.integers(0, 2**31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_translation_invariance(self, shift, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng)
        delta = rng.uniform(-np.pi, np.pi, model.node_count)
        assert np.abs(rhs(model, delta + shift) - rhs(model, delta)).max() < 1e-11

    def test_sine_form_equivalent(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            model = random_model(rng)
            delta = rng.uniform(-2 * np.pi, 2 * np.pi, model.node_count)
            diff = np.abs(rhs(model, delta) - rhs_sine_form(model, delta)).max()
            assert diff < 1e-12

    def test_shifted_difference_cancels_source_coupling(self):
        # When the edge difference equals the phase shift, the source
        # node's coupling term is sin(0) = 0.
        model = build_model([(0, 1)], a=[0.5], b=[2.0], kp=[0.1, 0.1],
                            varpi=[0.3, -0.3])
        delta = np.array([float(model.psi[0]), 0.0])
        out = rhs_sine_form(model, delta)
        assert out[0] == pytest.approx(TWO_PI * 0.1 * 0.3, abs=1e-14)

    def test_lossless_reduces_to_classic_coupling(self):
        model = build_model([(0, 1), (1, 2), (0, 2)], a=np.zeros(3),
                            b=[1.0, 2.0, 1.5], kp=[0.1, 0.1, 0.2],
                            varpi=[0.2, 0.0, -0.2])
        rng = np.random.default_rng(0)
        delta = rng.uniform(-1, 1, 3)
        classic = np.zeros(3)
        for e, (i, j) in enumerate([(0, 1), (1, 2), (0, 2)]):
            classic[i] += model.b[e] * np.sin(delta[i] - delta[j])
            classic[j] += model.b[e] * np.sin(delta[j] - delta[i])
        expected = model.angular_gain * (model.natural_frequency - classic)
        assert np.allclose(rhs(model, delta), expected, atol=1e-14)
        assert np.allclose(rhs_sine_form(model, delta), expected, atol=1e-12)

    def test_lossless_coupling_cancels_pairwise(self):
        model = build_model([(0, 1), (1, 2)], a=np.zeros(2), b=[2.0, 1.1],
                            kp=[0.1, 0.3, 0.2], varpi=[0.4, -0.1, 0.2])
        rng = np.random.default_rng(3)
        for _ in range(10):
            delta = rng.uniform(-np.pi, np.pi, 3)
            total = (rhs(model, delta) / model.angular_gain).sum()
            assert total == pytest.approx(model.natural_frequency.sum(), abs=1e-12)

    def test_lossless_two_node_equilibrium_from_bisection(self):
        b = 2.0
        model = build_model([(0, 1)], a=[0.0], b=[b], kp=[1.0, 1.0],
                            varpi=[0.7, -0.7])
        # Independent oracle: root of varpi_1 - b sin(x) on [0, pi/2].
        root = bisect_root(lambda x: 0.7 - b * np.sin(x), 0.0, np.pi / 2)
        assert root == pytest.approx(np.arcsin(0.7 / b), abs=1e-12)
        assert np.abs(rhs(model, np.array([root, 0.0]))).max() < 1e-12

    def test_dimension_mismatch_raises(self):
        model = build_model([(0, 1)], a=[0.1], b=[1.0], kp=[0.1, 0.1],
                            varpi=[0.0, 0.0])
        with pytest.raises(ValidationError):
            rhs(model, np.zeros(3))
        with pytest.raises(ValidationError):
            rhs_sine_form(model, np.zeros(5))

    def test_batch_evaluation_matches_rows(self):
        rng = np.random.default_rng(12)
        model = random_model(rng)
        batch = rng.uniform(-np.pi, np.pi, (7, model.node_count))
        out = rhs(model, batch)
        for k in range(7):
            assert np.allclose(out[k], rhs(model, batch[k]), rtol=0, atol=1e-13)


class TestActivePower:
    def test_single_neighbor_uniform_voltage(self):
        spec = generate_random(2, 1, DEFAULT_RANGES, seed=8)
        spec = type(spec)(
            node_count=2, edges=spec.edges, conductance=spec.conductance,
            susceptance=spec.susceptance, voltage=np.ones(2),
            power_setpoint=spec.power_setpoint, load=spec.load, gain=spec.gain)
        model = derive(spec)
        for i in (0, 1):
            p = active_power(model, spec, np.full(2, 0.7), i)
            assert p == pytest.approx(spec.load[i], abs=1e-15)

    def test_droop_identity_on_random_states(self):
        rng = np.random.default_rng(13)
        for seed in range(5):
            n = int(rng.integers(3, 8))
            e = int(rng.integers(n - 1, n * (n - 1) // 2 + 1))
            spec = generate_random(n, e, DEFAULT_RANGES, seed)
            model = derive(spec)
            delta = rng.uniform(-np.pi, np.pi, n)
            velocities = rhs(model, delta)
            for i in range(n):
                p = active_power(model, spec, delta, i)
                droop = model.angular_gain[i] * (spec.power_setpoint[i] - p)
                assert droop == pytest.approx(velocities[i], abs=1e-12)

    def test_power_matches_setpoint_at_equilibrium(self):
        from lossy_kuramoto.equilibrium import solve

        spec = generate_random(2, 1, DEFAULT_RANGES, seed=77)
        model = derive(spec)
        eq = solve(model)
        for i in (0, 1):
            p = active_power(model, spec, eq.delta_star, i)
            assert p == pytest.approx(spec.power_setpoint[i], abs=1e-9)

    def test_invalid_node_raises(self):
        spec = generate_random(3, 3, DEFAULT_RANGES, seed=1)
        model = derive(spec)
        with pytest.raises(ValidationError):
            active_power(model, spec, np.zeros(3), 3)


class TestIntegrate:
    def test_constant_field_is_exact(self):
        model = build_model([(0, 1), (1, 2)], a=np.zeros(2), b=np.zeros(2),
                            kp=[0.1, 0.2, 0.4], varpi=[1.0, -0.5, 0.25])
        delta0 = np.array([0.3, -0.1, 0.0])
        traj = integrate(model, delta0, t_max=5.0, dt=0.01)
        drift = model.angular_gain * model.natural_frequency
        for k in range(traj.n_samples):
            expected = delta0 + traj.times[k] * drift
            assert np.allclose(traj.states[k], expected, atol=1e-12)

    def test_step_halving_error_ratio(self):
        spec = generate_random(2, 1, DEFAULT_RANGES, seed=5)
        model = derive(spec)
        delta0 = np.array([0.9, -0.4])
        ref = integrate(model, delta0, t_max=2.0, dt=0.0125).final_state
        e1 = np.linalg.norm(integrate(model, delta0, t_max=2.0, dt=0.1).final_state - ref)
        e2 = np.linalg.norm(integrate(model, delta0, t_max=2.0, dt=0.05).final_state - ref)
        assert 12.0 <= e1 / e2 <= 20.0

    def test_steady_state_matches_newton(self, bench_model, bench_equilibrium):
        delta0 = draw_initial_phases(bench_model, seed=123)
        traj = integrate(bench_model, delta0, t_max=20.0, dt=1e-3, decimation=100)
        assert np.abs(traj.derivs[-1]).max() < 1e-6
        final_diffs = bench_model.incidence.T @ traj.final_state
        assert np.abs(final_diffs - bench_equilibrium.edge_differences).max() < 1e-6

    def test_divergence_carries_last_good_sample(self):
        model = build_model([(0, 1)], a=[0.0], b=[0.0], kp=[1.0, 1.0],
                            varpi=[1e307, 0.0])
        with pytest.raises(IntegrationDivergedError) as err:
            integrate(model, np.zeros(2), t_max=400.0, dt=1.0)
        assert np.all(np.isfinite(err.value.last_good_state))
        assert err.value.last_good_time >= 0.0

    def test_trajectory_invariants(self, bench_model):
        delta0 = draw_initial_phases(bench_model, seed=3)
        traj = integrate(bench_model, delta0, t_max=0.5, dt=1e-3, decimation=7)
        assert np.all(np.diff(traj.times) > 0)
        assert traj.final_time == pytest.approx(0.5, abs=traj.dt)
        for k in range(traj.n_samples):
            assert np.array_equal(traj.derivs[k], rhs(bench_model, traj.states[k]))

    def test_phase_state_input(self, bench_model):
        state = PhaseState(np.zeros(bench_model.node_count), time=0.0)
        traj = integrate(bench_model, state, t_max=0.01, dt=1e-3)
        assert traj.n_samples == 11

    def test_advance_matches_integrate(self, bench_model):
        delta0 = draw_initial_phases(bench_model, seed=4)
        traj = integrate(bench_model, delta0, t_max=0.2, dt=1e-3)
        direct = advance(bench_model, delta0, n_steps=200, dt=1e-3)
        assert np.allclose(direct, traj.final_state, atol=1e-15)

    def test_bad_arguments(self, bench_model):
        with pytest.raises(ValidationError):
            integrate(bench_model, np.zeros(10), t_max=1.0, dt=0.0)
        with pytest.raises(ValidationError):
            integrate(bench_model, np.zeros(10), t_max=0.5, dt=1.0)


class TestSynchronizationDetection:
    def test_converged_run_reports_zero_deviation(self, bench_model):
        delta0 = draw_initial_phases(bench_model, seed=9)
        traj = integrate(bench_model, delta0, t_max=20.0, dt=1e-3, decimation=50)
        sync = detect_synchronization(traj, tol=1e-6)
        assert sync is not None
        assert abs(sync) < 1e-6

    def test_uncoupled_heterogeneous_never_agrees(self):
        model = build_model([(0, 1)], a=[0.0], b=[0.0], kp=[0.1, 0.1],
                            varpi=[1.0, -1.0])
        traj = integrate(model, np.zeros(2), t_max=2.0, dt=0.01)
        assert detect_synchronization(traj, tol=1e-6) is None

    def test_window_requires_constant_mean(self):
        times = np.linspace(0.0, 1.0, 101)
        # Frequencies agree across nodes but drift in time.
        derivs = np.outer(times, np.ones(3))
        traj = Trajectory(times=times, states=np.zeros((101, 3)),
                          derivs=derivs, dt=0.01)
        assert detect_synchronization(traj, tol=1e-6) is None


class TestInitialPhases:
    def test_difference_bound_holds(self, bench_model):
        bound = 0.9 * (np.pi / 2 - bench_model.psi_max)
        for seed in range(10):
            delta0 = draw_initial_phases(bench_model, seed=seed)
            diffs = bench_model.incidence.T @ delta0
            assert np.abs(diffs).max() <= bound

    def test_seeded_determinism(self, bench_model):
        assert np.array_equal(draw_initial_phases(bench_model, 5),
                              draw_initial_phases(bench_model, 5))


class TestTrajectoryCsv:
    def test_full_precision_round_trip(self, bench_model, tmp_path):
        delta0 = draw_initial_phases(bench_model, seed=2)
        traj = integrate(bench_model, delta0, t_max=0.05, dt=1e-3)
        path = tmp_path / "trajectory.csv"
        traj.write_csv(path)
        header = path.read_text().splitlines()[0]
        n = bench_model.node_count
        assert header == ("t," + ",".join(f"delta_{i}" for i in range(1, n + 1))
                          + "," + ",".join(f"ddelta_{i}" for i in range(1, n + 1)))
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.array_equal(data[:, 0], traj.times)
        assert np.array_equal(data[:, 1:n + 1], traj.states)
        assert np.array_equal(data[:, n + 1:], traj.derivs)
