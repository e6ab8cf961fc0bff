from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from gridreconf import (
    Bus,
    Configuration,
    Line,
    Network,
    NotRadial,
    check_constraints,
    solve,
    system_loss,
)


def two_bus(resistance=0.01, reactance=0.0, load=0.1 + 0j):
    return Network(
        buses=(Bus(id=1, is_substation=True), Bus(id=2, load=load)),
        lines=(Line((1, 2), resistance, reactance),),
    )


class TestTwoBusClosedForm:
    # with a purely resistive line R and real load P, the receiving-end
    # voltage solves V^2 - V + R*P = 0, giving V = (1 + sqrt(1-4RP)) / 2
    def test_voltage_matches_quadratic_root(self):
        net = two_bus(resistance=0.01, load=0.1 + 0j)
        res = solve(net.initial_configuration(), net.base_loads())
        expected_v2 = (1 + math.sqrt(1 - 4 * 0.01 * 0.1)) / 2
        assert res.converged
        assert res.voltages[0] == 1.0
        assert res.voltages[1] == pytest.approx(expected_v2, abs=1e-10)

    def test_loss_matches_closed_form(self):
        net = two_bus(resistance=0.01, load=0.1 + 0j)
        res = solve(net.initial_configuration(), net.base_loads())
        v2 = (1 + math.sqrt(1 - 4 * 0.01 * 0.1)) / 2
        current = 0.1 / v2
        assert res.total_loss == pytest.approx(
            current * current * 0.01 * 1000.0, rel=1e-9
        )


class TestSolveBasics:
    def test_zero_loads_stay_flat(self, ieee33):
        res = solve(ieee33.initial_configuration(), [0j] * 33)
        assert res.converged
        assert res.iterations == 1
        assert res.total_loss == 0.0
        assert all(v == 1.0 for v in res.voltages)

    def test_substation_voltage_is_exactly_one(self, ieee33):
        res = solve(ieee33.initial_configuration(), ieee33.base_loads())
        assert res.voltages[0] == 1.0

    def test_currents_cover_exactly_the_closed_lines(self, ieee33):
        config = ieee33.initial_configuration()
        res = solve(config, ieee33.base_loads())
        assert set(res.currents) == set(config.closed_pairs)
        assert set(res.line_flows) == set(config.closed_pairs)

    def test_loss_consistent_with_currents(self, ieee33):
        config = ieee33.initial_configuration()
        res = solve(config, ieee33.base_loads())
        by_pair = ieee33.lines_by_pair
        recomputed = sum(
            i * i * by_pair[p].resistance for p, i in res.currents.items()
        )
        assert res.total_loss == pytest.approx(
            recomputed * ieee33.base_power * 1000.0, rel=1e-9
        )

    def test_mapping_loads_accepted(self):
        net = two_bus()
        by_seq = solve(net.initial_configuration(), [0j, 0.1 + 0j])
        by_map = solve(net.initial_configuration(), {2: 0.1 + 0j})
        assert by_seq.voltages == by_map.voltages

    def test_wrong_load_length_rejected(self):
        net = two_bus()
        with pytest.raises(ValueError, match="expected 2 loads"):
            solve(net.initial_configuration(), [0j])

    def test_not_radial_on_closed_ring(self, ieee33):
        with pytest.raises(NotRadial):
            solve(
                Configuration(network=ieee33, open_lines=frozenset()),
                ieee33.base_loads(),
            )

    def test_not_radial_on_disconnection(self, ieee33):
        # 32 closed lines (right count) but bus 18 isolated: both its lines
        # are open while the closed tie (25,29) forms a cycle elsewhere
        open_set = frozenset({(8, 21), (9, 15), (12, 22), (18, 33), (17, 18)})
        with pytest.raises(NotRadial):
            solve(
                Configuration(network=ieee33, open_lines=open_set),
                ieee33.base_loads(),
            )

    def test_iteration_cap_reports_not_converged(self, ieee33):
        res = solve(
            ieee33.initial_configuration(), ieee33.base_loads(), max_iterations=1
        )
        assert not res.converged
        assert res.iterations == 1

    def test_system_loss_wrapper(self, ieee33):
        config = ieee33.initial_configuration()
        assert system_loss(config, ieee33.base_loads()) == pytest.approx(
            solve(config, ieee33.base_loads()).total_loss
        )

    def test_impedance_changes_are_not_masked_by_caching(self):
        light = two_bus(resistance=0.01)
        heavy = two_bus(resistance=0.02)
        loss_light = solve(light.initial_configuration(), light.base_loads())
        loss_heavy = solve(heavy.initial_configuration(), heavy.base_loads())
        assert loss_heavy.total_loss > loss_light.total_loss


class TestAgainstNewtonRaphson:
    @pytest.mark.parametrize("seed", range(6))
    def test_voltages_match_dense_solver(self, seed):
        rng = random.Random(seed)
        net = oracles.random_radial_network(rng, rng.randint(3, 10))
        res = solve(net.initial_configuration(), net.base_loads())
        ref_v, ref_loss, ref_ok = oracles.newton_raphson(net, net.base_loads())
        assert res.converged and ref_ok
        for mine, ref in zip(res.voltages, ref_v):
            assert mine == pytest.approx(abs(ref), abs=1e-6)
        assert res.total_loss == pytest.approx(ref_loss, abs=1e-3)


class TestCheckConstraints:
    def test_balance_residual_small(self, ieee33):
        config = ieee33.initial_configuration()
        res = solve(config, ieee33.base_loads())
        rep = check_constraints(config, res)
        assert rep.radial
        assert rep.balance_residual < 1e-7
        assert rep.overloaded_lines == ()
        assert rep.voltage_violations == ()

    def test_voltage_violations_reported(self, ieee33):
        config = ieee33.initial_configuration()
        res = solve(config, ieee33.base_loads())
        rep = check_constraints(config, res, v_min=0.95)
        violated = {bus for bus, _ in rep.voltage_violations}
        assert 18 in violated
        assert all(v < 0.95 for _, v in rep.voltage_violations)

    def test_overload_reported_against_capacity(self):
        net = Network(
            buses=(Bus(id=1, is_substation=True), Bus(id=2, load=0.1 + 0j)),
            lines=(Line((1, 2), 0.01, 0.0, capacity=0.05),),
        )
        config = net.initial_configuration()
        res = solve(config, net.base_loads())
        rep = check_constraints(config, res)
        assert rep.overloaded_lines == ((1, 2),)


class TestRandomizedBalance:
    @given(seed=st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=60, deadline=None)
    def test_power_balance_on_random_trees(self, seed):
        rng = random.Random(seed)
        net = oracles.random_radial_network(rng, rng.randint(2, 8))
        config = net.initial_configuration()
        res = solve(config, net.base_loads())
        assert res.converged
        rep = check_constraints(config, res)
        assert rep.balance_residual < 1e-7
