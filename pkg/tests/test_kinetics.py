import numpy as np
import pytest

from trafficmix.config import single_population_params, table1_params
from trafficmix.kinetics import (
    MixtureState,
    moments,
    rhs_single,
    rhs_single_naive,
    rhs_two_population,
)
from trafficmix.oracle import free_phase_equilibrium
from trafficmix.tables import build_game_tables

SINGLE = single_population_params(n=2, v_max=100.0, length=1.0)
TWO_POP = table1_params()


def single_tables(rho, params=SINGLE):
    s = rho / params.populations[0].rho_max
    return build_game_tables(params, s)


class TestMoments:
    def test_all_mass_at_top_speed(self):
        state = MixtureState((np.array([0.0, 0.0, 125.0]), np.array([0.0, 0.0])))
        mom = moments(state, TWO_POP.lattices)
        assert mom.rho[0] == 125.0
        assert mom.q[0] == pytest.approx(12500.0)
        assert mom.u[0] == pytest.approx(100.0)

    def test_empty_state_has_nan_speed(self):
        state = MixtureState((np.zeros(3), np.zeros(2)))
        mom = moments(state, TWO_POP.lattices)
        assert mom.rho_total == 0.0
        assert mom.q_total == 0.0
        assert np.isnan(mom.u_total)
        assert np.isnan(mom.u[0]) and np.isnan(mom.u[1])

    def test_truck_flux_at_top_class(self):
        rho_t = 20.0
        state = MixtureState((np.zeros(3), np.array([0.0, rho_t])))
        mom = moments(state, TWO_POP.lattices)
        assert mom.q[1] == pytest.approx(50.0 * rho_t)

    def test_dimension_mismatch(self):
        state = MixtureState((np.zeros(4), np.zeros(2)))
        with pytest.raises(ValueError):
            moments(state, TWO_POP.lattices)


class TestMixtureState:
    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            MixtureState((np.array([-0.5, 1.0]),))

    def test_roundoff_dust_clamped(self):
        state = MixtureState((np.array([-1e-15, 1.0]),))
        assert state.distributions[0][0] == 0.0

    def test_uniform_mass(self):
        state = MixtureState.uniform((30.0, 9.0), (3, 2))
        assert state.densities == pytest.approx((30.0, 9.0))


class TestSingleRHS:
    def test_free_equilibrium_is_fixed_point(self):
        # all mass at the top class is stationary for rho <= rho_max/2
        rho = 0.3
        f = np.array([0.0, rho])
        out = rhs_single(f, single_tables(rho), eta=1.0)
        assert np.max(np.abs(out)) < 1e-15

    def test_vacuum_fixed_point_exact(self):
        out = rhs_single(np.zeros(2), single_tables(0.3), eta=1.0)
        assert np.all(out == 0.0)

    def test_mass_conserved_for_random_states(self):
        rng = np.random.default_rng(2024)
        tables = single_tables(0.4)
        for _ in range(1000):
            f = rng.random(2) * 0.4
            out = rhs_single(f, tables, eta=1.0)
            assert abs(out.sum()) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            rhs_single(np.zeros(3), single_tables(0.3), eta=1.0)


class TestNaiveRHS:
    def test_identical_on_the_mass_manifold(self):
        rho = 0.4
        tables = single_tables(rho)
        f = np.array([0.15, 0.25])  # sums to rho exactly
        wb = rhs_single(f, tables, eta=1.0)
        naive = rhs_single_naive(f, tables, eta=1.0, rho_param=rho)
        np.testing.assert_allclose(naive, wb, atol=1e-14)

    def test_mass_decays_below_the_manifold(self):
        rho = 0.4
        tables = single_tables(rho)
        for eps in (1e-8, 1e-4, 1e-2):
            f = np.array([0.5, 0.5]) * rho * (1.0 - eps)
            naive = rhs_single_naive(f, tables, eta=1.0, rho_param=rho)
            assert naive.sum() < 0.0

    def test_vacuum_fixed_point(self):
        out = rhs_single_naive(np.zeros(2), single_tables(0.3), eta=1.0, rho_param=0.3)
        assert np.all(out == 0.0)


class TestTwoPopulationRHS:
    def test_free_phase_equilibrium_is_stationary(self):
        rho_c, rho_t = 50.0, 16.667
        from trafficmix.config import occupancy

        s = occupancy((rho_c, rho_t), TWO_POP.populations)
        eq = free_phase_equilibrium(rho_c, rho_t, TWO_POP.lattices, s)
        state = MixtureState((eq.f_car, eq.f_truck))
        tables = build_game_tables(TWO_POP, s)
        out = rhs_two_population(state, tables, eta=1.0)
        assert max(np.max(np.abs(v)) for v in out) < 1e-10

    def test_empty_partner_reduces_to_single_population(self):
        rho_c = 40.0
        s = rho_c * 0.004
        tables = build_game_tables(TWO_POP, s)
        f_c = np.array([5.0, 10.0, 25.0])
        state = MixtureState((f_c, np.zeros(2)))
        out = rhs_two_population(state, tables, eta=1.0)

        solo = single_population_params(n=3, v_max=100.0, length=0.004)
        solo_tables = build_game_tables(solo, s)
        expected = rhs_single(f_c, solo_tables, eta=1.0)
        np.testing.assert_allclose(out[0], expected, atol=1e-12)
        np.testing.assert_allclose(out[1], np.zeros(2), atol=1e-15)

    def test_per_species_mass_conserved_random_states(self):
        rng = np.random.default_rng(7)
        tables = build_game_tables(TWO_POP, 0.55)
        for _ in range(1000):
            state = MixtureState((rng.random(3) * 50, rng.random(2) * 15))
            out = rhs_two_population(state, tables, eta=1.0)
            for v in out:
                assert abs(v.sum()) < 1e-12

    def test_indifferentiability_of_identical_populations(self):
        # same length, same lattice: summed two-population dynamics must equal
        # the single-population dynamics of the summed state
        from trafficmix.config import ModelParams, PopulationSpec, SpeedLattice

        lattice = SpeedLattice.equispaced(3, 100.0)
        params = ModelParams(populations=(
            PopulationSpec("car", 0.004, lattice),
            PopulationSpec("truck", 0.004, lattice),
        ))
        solo = single_population_params(n=3, v_max=100.0, length=0.004)
        rng = np.random.default_rng(99)
        for _ in range(50):
            f = rng.random(3)
            split = rng.random(3)
            f_c, f_t = f * split, f * (1.0 - split)
            rho = f.sum()
            s = rho * 0.004
            out = rhs_two_population(MixtureState((f_c, f_t)),
                                     build_game_tables(params, s), eta=1.0)
            expected = rhs_single(f, build_game_tables(solo, s), eta=1.0)
            np.testing.assert_allclose(out[0] + out[1], expected, atol=1e-12)

    def test_vacuum(self):
        tables = build_game_tables(TWO_POP, 0.0)
        out = rhs_two_population(MixtureState((np.zeros(3), np.zeros(2))), tables)
        assert all(np.all(v == 0.0) for v in out)
