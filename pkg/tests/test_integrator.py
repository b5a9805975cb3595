import numpy as np
import pytest

from trafficmix.config import (
    NumericsParams,
    occupancy,
    single_population_params,
    table1_params,
)
from trafficmix.integrator import (
    NumericalFailureError,
    relax_to_equilibrium,
    stability_timestep,
    step,
)
from trafficmix.kinetics import MixtureState, make_rhs
from trafficmix.oracle import free_phase_equilibrium
from trafficmix.tables import build_game_tables

SINGLE = single_population_params(n=2, v_max=100.0, length=1.0)
TWO_POP = table1_params()
DEFAULTS = NumericsParams()


class TestStep:
    def test_equilibrium_is_preserved(self):
        rho = 0.3
        tables = build_game_tables(SINGLE, rho)
        rhs = make_rhs(tables, eta=1.0)
        state = MixtureState((np.array([0.0, rho]),))
        out = step(state, stability_timestep(1.0, rho), rhs)
        np.testing.assert_allclose(out.distributions[0], [0.0, rho], atol=1e-14)

    def test_vacuum_stays_vacuum(self):
        tables = build_game_tables(SINGLE, 0.0)
        rhs = make_rhs(tables, eta=1.0)
        out = step(MixtureState((np.zeros(2),)), 0.5, rhs)
        assert np.all(out.distributions[0] == 0.0)

    def test_repeated_stepping_reaches_the_free_state(self):
        rho = 0.3
        tables = build_game_tables(SINGLE, rho)
        rhs = make_rhs(tables, eta=1.0)
        state = MixtureState((np.array([rho / 2, rho / 2]),))
        dt = stability_timestep(1.0, rho)
        for _ in range(400):
            state = step(state, dt, rhs)
        np.testing.assert_allclose(state.distributions[0], [0.0, rho], atol=1e-9)

    def test_nan_detection(self):
        def bad_rhs(f):
            return np.full_like(f, np.nan)

        with pytest.raises(NumericalFailureError):
            step(MixtureState((np.array([0.1, 0.2]),)), 0.1, bad_rhs)


class TestRelaxation:
    def test_two_population_free_phase_matches_closed_form(self):
        rho_c, rho_t = 50.0, 16.667
        initial = MixtureState.uniform((rho_c, rho_t), (3, 2))
        result = relax_to_equilibrium(initial, TWO_POP, DEFAULTS)
        assert result.converged

        s = occupancy((rho_c, rho_t), TWO_POP.populations)
        eq = free_phase_equilibrium(rho_c, rho_t, TWO_POP.lattices, s)
        np.testing.assert_allclose(result.final_state.distributions[0], eq.f_car,
                                   atol=1e-10)
        np.testing.assert_allclose(result.final_state.distributions[1], eq.f_truck,
                                   atol=1e-10)
        # trucks end up entirely in their top class
        assert result.final_state.distributions[1][0] < 1e-10
        assert result.final_state.distributions[1][1] == pytest.approx(16.667)

    def test_vacuum_converges_immediately(self):
        result = relax_to_equilibrium(MixtureState((np.zeros(3), np.zeros(2))),
                                      TWO_POP, DEFAULTS)
        assert result.converged
        assert result.steps == 0
        assert result.residual == 0.0

    def test_naive_formulation_captures_spurious_vacuum(self):
        rho = 0.3
        initial = MixtureState.uniform((rho * (1.0 - 1e-6),), (2,))
        result = relax_to_equilibrium(initial, SINGLE, DEFAULTS, formulation="naive")
        assert result.final_state.total_density < 0.01 * rho
        assert not result.converged          # flagged by the mass post-check
        assert result.mass_drift[0] > 0.2

    def test_naive_rejected_for_two_populations(self):
        initial = MixtureState.uniform((10.0, 5.0), (3, 2))
        with pytest.raises(ValueError, match="single-population"):
            relax_to_equilibrium(initial, TWO_POP, DEFAULTS, formulation="naive")

    def test_inadmissible_initial_state_rejected(self):
        initial = MixtureState.uniform((250.0, 50.0), (3, 2))
        with pytest.raises(ValueError, match="admissible"):
            relax_to_equilibrium(initial, TWO_POP, DEFAULTS)

    def test_mass_drift_below_tolerance_when_converged(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            rho_c = rng.uniform(5.0, 150.0)
            rho_t = rng.uniform(0.0, 40.0)
            if not occupancy((rho_c, rho_t), TWO_POP.populations) <= 1.0:
                continue
            initial = MixtureState.uniform((rho_c, rho_t), (3, 2))
            result = relax_to_equilibrium(initial, TWO_POP,
                                          NumericsParams(tol=1e-9, t_max=200.0))
            assert all(d <= 1e-9 for d in result.mass_drift)

    def test_initial_condition_independence(self):
        rng = np.random.default_rng(5)
        numerics = NumericsParams(tol=1e-11, t_max=500.0)
        for rho_c, rho_t in ((30.0, 10.0), (120.0, 20.0), (60.0, 40.0)):
            finals = []
            for _ in range(5):
                weights_c = rng.random(3) + 1e-3
                weights_t = rng.random(2) + 1e-3
                f_c = rho_c * weights_c / weights_c.sum()
                f_t = rho_t * weights_t / weights_t.sum()
                result = relax_to_equilibrium(MixtureState((f_c, f_t)),
                                              TWO_POP, numerics)
                assert result.converged
                finals.append(result.final_state.stacked())
            base = finals[0]
            for other in finals[1:]:
                assert np.max(np.abs(other - base)) < 1e-6

    def test_monotone_residual_tail(self):
        initial = MixtureState.uniform((80.0, 20.0), (3, 2))
        result = relax_to_equilibrium(initial, TWO_POP, DEFAULTS,
                                      record_residuals=True)
        assert result.converged
        hist = result.residual_history
        tail = hist[-max(2, len(hist) // 10):]
        assert np.all(np.diff(tail) <= 1e-18)

    def test_trajectory_recording(self):
        initial = MixtureState.uniform((40.0, 10.0), (3, 2))
        result = relax_to_equilibrium(initial, TWO_POP, DEFAULTS, trajectory_every=5)
        assert result.trajectory is not None
        assert result.trajectory[0][0] == 0.0
        assert result.trajectory[-1][0] == pytest.approx(result.t_final)
        np.testing.assert_allclose(result.trajectory[0][1].stacked(),
                                   initial.stacked(), atol=1e-15)


class TestPositivity:
    def test_euler_steps_stay_nonnegative(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            rho_c = rng.uniform(0.1, 180.0)
            rho_t = rng.uniform(0.0, 50.0)
            if occupancy((rho_c, rho_t), TWO_POP.populations) > 1.0:
                continue
            s = occupancy((rho_c, rho_t), TWO_POP.populations)
            tables = build_game_tables(TWO_POP, s)
            rhs = make_rhs(tables, eta=1.0)
            f = np.concatenate([rng.random(3), rng.random(2)])
            f *= (rho_c + rho_t) / f.sum()
            dt = stability_timestep(1.0, f.sum())
            for _ in range(20):
                f = f + dt * rhs(f)
                assert np.all(f >= -1e-12)

    def test_rk4_steps_stay_nonnegative(self):
        rng = np.random.default_rng(77)
        numerics = NumericsParams(tol=1e-10, t_max=100.0)
        for _ in range(20):
            rho_c = rng.uniform(1.0, 150.0)
            rho_t = rng.uniform(0.0, 40.0)
            if occupancy((rho_c, rho_t), TWO_POP.populations) > 1.0:
                continue
            initial = MixtureState.uniform((rho_c, rho_t), (3, 2))
            result = relax_to_equilibrium(initial, TWO_POP, numerics)
            for f in result.final_state.distributions:
                assert np.all(f >= 0.0)
