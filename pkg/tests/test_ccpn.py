from fractions import Fraction

import numpy as np
import pytest

from src.ccpn import (
    Enabling,
    MacroMarking,
    NonConvergence,
    Terminal,
    compute_speeds,
    enabling_state,
    evolution_graph,
    macro_marking,
    macro_reachability_graph,
    marking_derivative,
    next_zero_event,
    simulate_ccpn,
)
from src.net import INFINITY, Marking
from src.netgen import random_autonomous, random_ccpn
from src.parser import parse_model

PLACES = ("P1", "P2", "P3")


def marking(*values):
    return Marking(zip(PLACES, (Fraction(v) for v in values)))


def macro(*signs):
    return MacroMarking(PLACES, tuple(bool(s) for s in signs))


def values(vector):
    return tuple(vector.values())


class TestMacroMarking:
    @pytest.mark.parametrize(
        "amounts, signs",
        [((25, 10, 5), "111"), ((15, 0, 95), "101"), ((0, 0, 0), "000")],
    )
    def test_sign_abstraction(self, tanks3, amounts, signs):
        assert str(macro_marking(tanks3, marking(*amounts))) == signs

    def test_autonomous_tanks3_has_four_macro_markings(self, tanks3_autonomous):
        graph = macro_reachability_graph(tanks3_autonomous)

        assert {str(node) for node in graph.nodes} == {"111", "011", "101", "001"}
        assert all(a != b for a, _, b in graph.edges)

    def test_single_place_without_transitions(self):
        net = parse_model("place P continuous = 3\n")

        assert len(macro_reachability_graph(net).nodes) == 1

    def test_node_count_bounded_on_random_nets(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            net = random_autonomous(rng)
            assert len(macro_reachability_graph(net).nodes) <= 2 ** len(net.places)


class TestEnabling:
    def test_all_strong_at_initial_marking(self, tanks3):
        assert {enabling_state(tanks3, tanks3.initial_marking, t.id) for t in tanks3.transitions} == {Enabling.STRONG}

    def test_weak_when_input_empty(self, tanks3):
        assert enabling_state(tanks3, marking(15, 0, 95), "T4") is Enabling.WEAK

    def test_source_transition_is_strong(self, tanks3):
        assert enabling_state(tanks3, marking(0, 0, 0), "T1") is Enabling.STRONG


class TestSpeeds:
    @pytest.mark.parametrize(
        "signs, speeds",
        [((1, 1, 1), (2, 5, 3, 6)), ((1, 0, 1), (2, 5, 3, 5)), ((0, 0, 1), (2, 5, 2, 5))],
    )
    def test_tanks3_phases(self, tanks3, signs, speeds):
        assert values(compute_speeds(tanks3, macro(*signs))) == speeds

    @pytest.mark.parametrize(
        "speeds, derivative",
        [((2, 5, 3, 6), (-1, -1, 9)), ((2, 5, 3, 5), (-1, 0, 8)), ((0, 0, 0, 0), (0, 0, 0))],
    )
    def test_derivative(self, tanks3, speeds, derivative):
        vector = dict(zip(("T1", "T2", "T3", "T4"), (Fraction(s) for s in speeds)))

        assert values(marking_derivative(tanks3, vector)) == derivative

    def test_inactive_transitions_run_at_zero(self, tanks3):
        speeds = compute_speeds(tanks3, macro(1, 1, 1), active={"T3", "T4"})

        assert values(speeds) == (0, 0, 3, 6)

    def test_inflow_shared_proportionally(self):
        net = parse_model(
            "place P continuous = 0\n"
            "transition Tin continuous speed=3\n"
            "transition A continuous speed=2\n"
            "transition B continuous speed=4\n"
            "arc Tin -> P\narc P -> A\narc P -> B\n"
        )

        speeds = compute_speeds(net, MacroMarking(("P",), (False,)))

        assert speeds == {"Tin": 3, "A": 1, "B": 2}

    def test_speeds_stay_within_caps(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            net = random_ccpn(rng)
            zero = MacroMarking(tuple(p.id for p in net.places), (False,) * len(net.places))
            for t in net.transitions:
                assert 0 <= compute_speeds(net, zero)[t.id] <= t.max_speed

    def test_non_convergence_is_reported(self):
        net = parse_model(
            "place P1 continuous = 0\n"
            "place P2 continuous = 0\n"
            "transition A continuous speed=1\n"
            "transition B continuous speed=1\n"
            "transition Leak continuous speed=1\n"
            "arc P1 -> A\narc A -> P2\n"
            "arc P2 -> B\narc B -> P1\n"
            "arc P2 -> Leak\n"
        )

        with pytest.raises(NonConvergence) as excinfo:
            compute_speeds(net, MacroMarking(("P1", "P2"), (False, False)))

        assert excinfo.value.places == ("P1", "P2")


class TestNextZeroEvent:
    def test_first_phase(self):
        derivative = dict(zip(PLACES, (Fraction(-1), Fraction(-1), Fraction(9))))

        assert next_zero_event(marking(25, 10, 5), derivative) == (10, ("P2",))

    def test_second_phase(self):
        derivative = dict(zip(PLACES, (Fraction(-1), Fraction(0), Fraction(8))))

        assert next_zero_event(marking(15, 0, 95), derivative) == (15, ("P1",))

    def test_simultaneous_events(self):
        derivative = dict(zip(PLACES, (Fraction(-2), Fraction(-1), Fraction(0))))

        assert next_zero_event(marking(4, 2, 1), derivative) == (2, ("P1", "P2"))

    def test_no_draining_place(self):
        derivative = dict(zip(PLACES, (Fraction(0), Fraction(1), Fraction(0))))

        assert next_zero_event(marking(1, 1, 1), derivative) == (INFINITY, ())


class TestEvolutionGraph:
    def test_tanks3_has_three_phases(self, tanks3):
        graph = evolution_graph(tanks3)

        assert graph.terminal is Terminal.STEADY_STATE
        assert [values(p.speeds) for p in graph.phases] == [(2, 5, 3, 6), (2, 5, 3, 5), (2, 5, 2, 5)]
        assert [values(p.derivative) for p in graph.phases] == [(-1, -1, 9), (-1, 0, 8), (0, 0, 7)]
        assert [p.start_time for p in graph.phases] == [0, 10, 25]
        assert [p.duration for p in graph.phases] == [10, 15, INFINITY]
        assert [p.exit_event for p in graph.phases] == [("P2",), ("P1",), ()]

    def test_horizon_truncates_first_phase(self, tanks3):
        graph = evolution_graph(tanks3, Fraction(5))

        assert len(graph.phases) == 1
        assert graph.phases[0].duration == 5
        assert graph.terminal is Terminal.HORIZON

    def test_source_only_net_is_steady(self):
        net = parse_model("place P continuous = 0\ntransition T continuous speed=1\narc T -> P\n")

        graph = evolution_graph(net)

        assert len(graph.phases) == 1
        assert graph.phases[0].duration == INFINITY

    def test_phase_starts_increase(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            graph = evolution_graph(random_ccpn(rng), Fraction(50))
            starts = [p.start_time for p in graph.phases]
            assert starts == sorted(set(starts))

    def test_autonomous_net_has_no_speeds(self, tanks3_autonomous):
        with pytest.raises(ValueError, match="autonomous; constant speeds are missing for T1"):
            evolution_graph(tanks3_autonomous)


class TestSimulateCcpn:
    def test_tanks3_checkpoints(self, tanks3):
        trajectory = simulate_ccpn(tanks3, 40)

        assert trajectory.at(10) == {"P1": 15, "P2": 0, "P3": 95}
        assert trajectory.at(25) == {"P1": 0, "P2": 0, "P3": 215}
        assert trajectory.at(40) == {"P1": 0, "P2": 0, "P3": 320}
        assert trajectory.times == [0, 10, 25, 40]

    def test_interpolation_between_breakpoints(self, tanks3):
        trajectory = simulate_ccpn(tanks3, 40)

        assert trajectory.at(Fraction(35, 2))["P3"] == 95 + 8 * Fraction(15, 2)

    def test_horizon_must_be_positive_and_finite(self, tanks3):
        with pytest.raises(ValueError):
            simulate_ccpn(tanks3, 0)
        with pytest.raises(ValueError):
            simulate_ccpn(tanks3, INFINITY)

    def test_autonomous_net_is_refused(self, tanks3_autonomous):
        with pytest.raises(ValueError, match="autonomous"):
            simulate_ccpn(tanks3_autonomous, 10)

    def test_markings_never_negative(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            trajectory = simulate_ccpn(random_ccpn(rng), 30)
            assert all(amount >= 0 for _, m in trajectory.points for amount in m.values())

    def test_total_marking_is_conserved(self):
        net = parse_model(
            "place P1 continuous = 5\n"
            "place P2 continuous = 5\n"
            "place P3 continuous = 1\n"
            "transition A continuous speed=3\n"
            "transition B continuous speed=1\n"
            "transition C continuous speed=2\n"
            "arc P1 -> A\narc A -> P2\n"
            "arc P2 -> B\narc B -> P3\n"
            "arc P3 -> C\narc C -> P1\n"
        )

        trajectory = simulate_ccpn(net, 20)

        assert {sum(m.values()) for _, m in trajectory.points} == {11}

    def test_matches_fixed_step_euler(self):
        rng = np.random.default_rng(2024)
        for _ in range(4):
            net = random_ccpn(rng, max_places=4)
            exact = simulate_ccpn(net, 3)
            for time, approx in _euler(net, 3, step=1e-4, samples=(0.5, 1.5, 3.0)):
                expected = exact.at(Fraction(time))
                for place, amount in approx.items():
                    assert abs(float(expected[place]) - amount) <= 1e-3, (net, place, time)


def _euler(net, horizon, step, samples):
    """Fixed-increment oracle: places within eps of zero count as empty."""
    places = [p.id for p in net.places]
    m = np.array([float(net.initial_marking[p]) for p in places])
    cache = {}
    eps = 1e-7
    results = []
    pending = list(samples)
    t = 0.0
    steps = int(round(horizon / step))
    for k in range(steps + 1):
        t = k * step
        while pending and t >= pending[0] - step / 2:
            results.append((pending.pop(0), dict(zip(places, m.tolist()))))
        if k == steps:
            break
        signs = tuple(bool(v > eps) for v in m)
        if signs not in cache:
            speeds = compute_speeds(net, MacroMarking(tuple(places), signs))
            cache[signs] = np.array([float(v) for v in marking_derivative(net, speeds).values()])
        m = np.maximum(m + step * cache[signs], 0.0)
    return results
