import numpy as np
import pytest

from trafficmix.config import table1_params
from trafficmix.tables import (
    TransitionProbabilities,
    build_cross_tables,
    build_game_tables,
    build_self_tables,
    check_stochastic,
    dump_tables_csv,
    transition_probabilities,
)

S_GRID = np.linspace(0.0, 1.0, 21)
ALPHAS = (0.0, 0.5, 1.0)
GAMMAS = (0.5, 1.0, 2.0)


class TestTransitionProbabilities:
    def test_empty_road(self):
        probs = transition_probabilities(0.0, alpha=1.0, gamma=1.0)
        assert probs.p == 1.0
        assert probs.q == 0.0

    def test_jam(self):
        probs = transition_probabilities(1.0, alpha=1.0, gamma=1.0)
        assert probs.p == 0.0
        assert probs.q == 0.0

    def test_gamma_law(self):
        probs = transition_probabilities(0.25, alpha=1.0, gamma=0.5)
        assert probs.p == pytest.approx(1.0 - np.sqrt(0.25))
        assert probs.p == pytest.approx(0.5)

    def test_out_of_range_occupancy(self):
        with pytest.raises(ValueError):
            transition_probabilities(1.2, alpha=1.0, gamma=1.0)

    def test_sum_bounded_everywhere(self):
        for s in S_GRID:
            for alpha in ALPHAS:
                for gamma in GAMMAS:
                    probs = transition_probabilities(s, alpha, gamma)
                    assert probs.p + probs.q <= 1.0 + 1e-15

    def test_monotonicity(self):
        for alpha in ALPHAS:
            for gamma in GAMMAS:
                ps = [transition_probabilities(s, alpha, gamma).p for s in S_GRID]
                qs = [transition_probabilities(s, alpha, gamma).q for s in S_GRID]
                assert all(b <= a + 1e-15 for a, b in zip(ps, ps[1:]))
                assert all(b >= a - 1e-15 for a, b in zip(qs, qs[1:]))


class TestSelfTables:
    def test_interior_equal_speed_entries(self):
        # h = k = 2 on a 3-lattice: brake Q, keep 1-(P+Q), accelerate P
        t = build_self_tables(3, TransitionProbabilities(p=0.4, q=0.2))
        assert t[0, 1, 1] == pytest.approx(0.2)
        assert t[1, 1, 1] == pytest.approx(0.4)
        assert t[2, 1, 1] == pytest.approx(0.4)

    def test_full_acceleration_limit(self):
        # P = 1: every interaction that can accelerate does
        probs = transition_probabilities(0.0, alpha=1.0)
        t = build_self_tables(2, probs)
        assert t[1, 0, 0] == 1.0  # equal speeds at the bottom: accelerate
        assert t[0, 0, 0] == 0.0
        assert t.sum(axis=0) == pytest.approx(np.ones((2, 2)))

    def test_alpha_one_sparse_patterns(self):
        # with Q = 0 the j=1 table is R on its first row and column, else 0,
        # and the j=n table is P on its last row plus the (n, n) unit entry
        # with P at (n-1, n-1) and (n-1, n)
        for n in (3, 4, 5):
            probs = transition_probabilities(0.3, alpha=1.0)
            p, r = probs.p, probs.r
            t = build_self_tables(n, probs)

            expected_first = np.zeros((n, n))
            expected_first[0, :] = r
            expected_first[:, 0] = r
            np.testing.assert_allclose(t[0], expected_first, atol=1e-15)

            expected_last = np.zeros((n, n))
            expected_last[n - 1, :] = p
            expected_last[n - 1, n - 1] = 1.0
            expected_last[n - 2, n - 2] = p
            expected_last[n - 2, n - 1] = p
            np.testing.assert_allclose(t[n - 1], expected_last, atol=1e-15)

    def test_rules_by_enumeration(self):
        # independent re-statement of the interaction rules
        p_val, q_val = 0.35, 0.25
        n = 4
        t = build_self_tables(n, TransitionProbabilities(p=p_val, q=q_val))
        for h in range(n):
            for k in range(n):
                expected = np.zeros(n)
                if h < k:
                    expected[h] = 1 - p_val
                    expected[h + 1] = p_val
                elif h > k:
                    expected[k] = 1 - p_val
                    expected[h] += p_val
                elif h == 0:
                    expected[0] = 1 - p_val
                    expected[1] = p_val
                elif h == n - 1:
                    expected[h - 1] = q_val
                    expected[h] = 1 - q_val
                else:
                    expected[h - 1] = q_val
                    expected[h] = 1 - (p_val + q_val)
                    expected[h + 1] = p_val
                np.testing.assert_allclose(t[:, h, k], expected, atol=1e-15)

    def test_small_lattice_rejected(self):
        with pytest.raises(ValueError):
            build_self_tables(1, transition_probabilities(0.5, 1.0))


class TestCrossTables:
    def test_capped_truck_keeps_speed_against_faster_car(self):
        # candidate at its top class 2 meeting field classes 3..n_q
        for s in (0.0, 0.3, 0.49):
            probs = transition_probabilities(s, alpha=1.0)
            b = build_cross_tables(2, 3, probs, p_is_slower_capped=True)
            assert b[1, 1, 2] == 1.0
            assert b[0, 1, 2] == 0.0

    def test_identical_lattices_reduce_to_self_tables(self):
        probs = transition_probabilities(0.35, alpha=0.7)
        a = build_self_tables(3, probs)
        b_ct = build_cross_tables(3, 3, probs, p_is_slower_capped=False)
        b_tc = build_cross_tables(3, 3, probs, p_is_slower_capped=True)
        np.testing.assert_array_equal(a, b_ct)
        np.testing.assert_array_equal(a, b_tc)

    def test_cars_against_trucks_enumerated(self):
        # n_cars = 3, n_trucks = 2, alpha = 1: the (h, k) cases are
        #   h=1,k=1 equal bottom; h=1,k=2 faster field; h=2,k=1 slower field;
        #   h=2,k=2 equal interior (cars can still accelerate to class 3);
        #   h=3,k=1 and h=3,k=2 slower field.
        probs = transition_probabilities(0.3, alpha=1.0)
        p, r = probs.p, probs.r
        b = build_cross_tables(3, 2, probs, p_is_slower_capped=False)
        expected = np.zeros((3, 3, 2))
        expected[:, 0, 0] = (r, p, 0.0)
        expected[:, 0, 1] = (r, p, 0.0)
        expected[:, 1, 0] = (r, p, 0.0)
        expected[:, 1, 1] = (0.0, r, p)   # Q = 0: keep with 1-P, accelerate with P
        expected[:, 2, 0] = (r, 0.0, p)
        expected[:, 2, 1] = (0.0, r, p)
        np.testing.assert_allclose(b, expected, atol=1e-15)

    def test_nesting_violation(self):
        probs = transition_probabilities(0.2, alpha=1.0)
        with pytest.raises(ValueError):
            build_cross_tables(3, 2, probs, p_is_slower_capped=True)
        with pytest.raises(ValueError):
            build_cross_tables(2, 3, probs, p_is_slower_capped=False)


class TestStochasticity:
    def test_clean_across_parameter_grid(self):
        for s in S_GRID:
            for alpha in ALPHAS:
                for gamma in GAMMAS:
                    params = table1_params(alpha=alpha, gamma=gamma)
                    tables = build_game_tables(params, s)
                    report = check_stochastic(tables)
                    assert report.ok, str(report)

    def test_fault_injection_is_named(self):
        tables = build_game_tables(table1_params(), 0.4)
        assert tables.self_tables[0][0, 2, 0] > 0  # slower-field keep entry
        tables.self_tables[0][0, 2, 0] = 0.0
        report = check_stochastic(tables)
        assert not report.ok
        assert any(h == 3 and k == 1 for _, _, h, k, _ in report.violations)

    def test_jam_tables_clean(self):
        tables = build_game_tables(table1_params(), 1.0)  # P = 0
        assert check_stochastic(tables).ok


class TestStructuralProperties:
    def test_acceleration_bound(self):
        # nonzero probability only for outcomes j <= h+1
        for s in (0.0, 0.3, 0.7, 1.0):
            tables = build_game_tables(table1_params(n_car=4, n_truck=3, alpha=0.6), s)
            stacks = list(tables.self_tables) + [
                tables.cross_tables[0][1], tables.cross_tables[1][0]]
            for stack in stacks:
                nz = np.argwhere(stack > 0)
                assert np.all(nz[:, 0] <= nz[:, 1] + 1)

    def test_deceleration_reach(self):
        # against a slower field vehicle the outcome is either k or h
        for s in (0.2, 0.6):
            tables = build_game_tables(table1_params(n_car=5, n_truck=3, alpha=0.5), s)
            stack = tables.self_tables[0]
            n = stack.shape[1]
            for h in range(n):
                for k in range(h):
                    nz = set(np.nonzero(stack[:, h, k])[0])
                    assert nz <= {k, h}

    def test_entries_within_unit_interval(self):
        for s in S_GRID:
            tables = build_game_tables(table1_params(alpha=0.5), s)
            for stack in (*tables.self_tables, tables.cross_tables[0][1],
                          tables.cross_tables[1][0]):
                assert np.all(stack >= 0.0)
                assert np.all(stack <= 1.0 + 1e-15)


def test_dump_tables_csv(tmp_path):
    tables = build_game_tables(table1_params(), 0.4)
    path = tmp_path / "tables.csv"
    dump_tables_csv(tables, path)
    text = path.read_text()
    assert "table,car,truck,j=1" in text
    assert text.startswith("# interaction tables")
