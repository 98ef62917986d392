import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotidn.errors import DomainError, GridTooLarge
from cotidn.optimizer import (
    DeploymentDecision,
    OptimizerConfig,
    brute_force_oracle,
    centroid_baseline,
    check_feasible,
    optimize_deployment,
    oracle_size,
    search_deployment,
    wireless_objective,
)
from cotidn.physics import (
    NetworkScenario,
    Position3D,
    UavNode,
    UserTerminal,
    evaluate_scenario,
    make_scenario,
)
from cotidn.evaluation import q_wireless


def single_user(x=500.0, y=500.0, range_m=400.0):
    return NetworkScenario(
        users=(UserTerminal(0, Position3D(x, y, 0.0)),),
        uavs=(UavNode(0, Position3D(500, 500, 100), 20.0, range_m),),
    )


def fixture_instance(i):
    """The shared 20-instance fixture: 1..10 users, ranges cycling 200..600 m."""
    return make_scenario(1000 + i, 1 + i % 10, range_m=200.0 + 50.0 * (i % 9))


class TestObjective:
    def test_bounded_by_two(self):
        sc = single_user()
        v = wireless_objective(sc, DeploymentDecision((Position3D(500, 500, 100),), (20.0,)))
        assert v == pytest.approx(2.0, abs=1e-9)

    def test_switched_off_keeps_coverage_only(self):
        sc = make_scenario(4, 10, range_m=450.0)
        pos = centroid_baseline(sc).uav_positions
        on = wireless_objective(sc, DeploymentDecision(pos, (20.0,)))
        off = wireless_objective(sc, DeploymentDecision(pos, (-math.inf,)))
        faint = wireless_objective(sc, DeploymentDecision(pos, (0.0,)))
        q_c = evaluate_scenario(
            NetworkScenario(users=sc.users, uavs=(UavNode(0, pos[0], 20.0, 450.0),))
        ).coverage_ratio
        assert off == pytest.approx(q_c, abs=1e-12)
        assert off < faint < on

    def test_dimension_mismatch(self):
        sc = single_user()
        with pytest.raises(DomainError):
            wireless_objective(sc, DeploymentDecision((), ()))
        with pytest.raises(DomainError):
            DeploymentDecision((Position3D(1, 1, 100),), (1.0, 2.0))

    def test_matches_oracle_value(self):
        sc = fixture_instance(3)
        o = brute_force_oracle(sc, 100.0, 2.0)
        assert wireless_objective(sc, o.best_decision) == o.best_objective


class TestOracle:
    def test_single_user_centre(self):
        o = brute_force_oracle(single_user(), 100.0, 2.0)
        assert o.best_decision.uav_positions == (Position3D(500.0, 500.0, 100.0),)
        assert o.best_decision.tx_powers_dbm == (20.0,)

    def test_counts(self):
        sc = single_user()
        o = brute_force_oracle(sc, 100.0, 2.0)
        assert o.evaluations == 11 * 11 * 11
        assert oracle_size(sc, 25.0, 1.0) == 41 * 41 * 21

    def test_beats_hand_picked(self):
        sc = fixture_instance(7)
        o = brute_force_oracle(sc, 100.0, 2.0)
        for x in range(0, 1001, 100):
            for p in (0.0, 10.0, 20.0):
                d = DeploymentDecision((Position3D(float(x), 300.0, 100.0),), (p,))
                assert o.best_objective >= wireless_objective(sc, d) - 1e-12

    def test_tie_break_low_power_row_major(self):
        # users far outside range: every cell and power scores 0, so the first
        # enumerated candidate wins
        far = NetworkScenario(
            users=(UserTerminal(0, Position3D(1999.0, 1999.0, 0.0)),),
            uavs=(UavNode(0, Position3D(500, 500, 100), 20.0, 100.0),),
            area_m=(2000.0, 2000.0),
        )
        o = brute_force_oracle(far, 500.0, 10.0)
        assert o.best_objective == 0.0
        assert o.best_decision.uav_positions[0] == Position3D(0.0, 0.0, 100.0)
        assert o.best_decision.tx_powers_dbm == (0.0,)

    def test_refuses_large_grid(self):
        sc = make_scenario(1, 5, n_uavs=2)
        with pytest.raises(GridTooLarge):
            brute_force_oracle(sc, 25.0, 1.0)


class TestHeuristic:
    def test_single_user_converges_above(self):
        for x, y in [(500.0, 500.0), (137.0, 822.0), (990.0, 12.0)]:
            sc = single_user(x, y)
            d = optimize_deployment(sc)
            p = d.uav_positions[0]
            assert math.hypot(p.x - x, p.y - y) < 1.0
            assert d.tx_powers_dbm == (20.0,)

    def test_deterministic(self):
        sc = fixture_instance(9)
        cfg = OptimizerConfig(seed=42)
        assert optimize_deployment(sc, cfg) == optimize_deployment(sc, cfg)

    def test_ten_user_seed_42_within_two_percent(self):
        sc = make_scenario(42, 10, range_m=400.0)
        o = brute_force_oracle(sc, 25.0, 1.0)
        assert wireless_objective(sc, optimize_deployment(sc, OptimizerConfig(seed=42))) >= 0.98 * o.best_objective

    @pytest.mark.parametrize("i", range(10))
    def test_not_worse_than_baseline_or_grid(self, i):
        sc = fixture_instance(i)
        res = search_deployment(sc)
        assert res.objective >= wireless_objective(sc, centroid_baseline(sc)) - 1e-12
        assert res.objective >= res.grid_objective - 1e-12
        check_feasible(sc, res.decision)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32), st.integers(1, 3), st.floats(200, 600))
    def test_always_feasible(self, seed, k, r):
        sc = make_scenario(seed, 6, n_uavs=k, range_m=r)
        check_feasible(sc, optimize_deployment(sc, OptimizerConfig(local_search_iters=20)))

    def test_multi_uav_beats_baseline(self):
        sc = make_scenario(11, 10, n_uavs=2, range_m=250.0)
        res = search_deployment(sc)
        assert res.objective > wireless_objective(sc, centroid_baseline(sc))


class TestCentroid:
    def test_two_corners(self):
        sc = NetworkScenario(
            users=(UserTerminal(0, Position3D(0, 0, 0)), UserTerminal(1, Position3D(1000, 1000, 0))),
            uavs=(UavNode(0, Position3D(1, 1, 100), 5.0, 300.0),),
        )
        d = centroid_baseline(sc)
        assert d.uav_positions == (Position3D(500, 500, 100),)
        assert d.tx_powers_dbm == (20.0,)

    def test_single_user(self):
        d = centroid_baseline(single_user(123.0, 456.0))
        assert (d.uav_positions[0].x, d.uav_positions[0].y) == (123.0, 456.0)


def test_command_round_trip():
    sc = fixture_instance(5)
    d = optimize_deployment(sc)
    assert DeploymentDecision.from_command(d.to_command(), sc.altitude_m) == d
    q_c, _ = q_wireless(evaluate_scenario(sc), sc)
    assert 0.0 <= q_c <= 1.0
