import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations

from .net import INFINITY, Marking, adjacency, format_rational
from .trajectory import Trajectory

logger = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    def __init__(self, places, message=None):
        self.places = tuple(places)
        super().__init__(message or f"speed resolution does not settle on places {', '.join(self.places)}")


class Enabling(Enum):
    STRONG = "strong"
    WEAK = "weak"


@dataclass(frozen=True)
class MacroMarking:
    """Sign vector over the continuous places: True for a positive marking, False for zero."""

    places: tuple
    signs: tuple

    def __getitem__(self, place):
        return self.signs[self.places.index(place)]

    @property
    def positive(self):
        return tuple(p for p, s in zip(self.places, self.signs) if s)

    @property
    def zero(self):
        return tuple(p for p, s in zip(self.places, self.signs) if not s)

    def with_sign(self, place, positive):
        index = self.places.index(place)
        return MacroMarking(self.places, self.signs[:index] + (positive,) + self.signs[index + 1:])

    def __str__(self):
        return "".join("1" if s else "0" for s in self.signs)


def macro_marking(net, marking):
    places = tuple(p.id for p in net.continuous_places)
    return MacroMarking(places, tuple(marking[p] > 0 for p in places))


@dataclass(frozen=True)
class MacroGraph:
    initial: MacroMarking
    nodes: tuple
    edges: tuple


def macro_reachability_graph(net):
    """Breadth-first closure of the sign-vector successor rule from macro(M0)."""
    initial = macro_marking(net, net.initial_marking)
    arcs = []
    for transition in net.continuous_transitions:
        inputs, outputs = adjacency(net, transition.id)
        inputs = tuple(p for p in inputs if net.place(p).continuous)
        outputs = tuple(p for p in outputs if net.place(p).continuous)
        emptiable = tuple(
            p for p in inputs
            if p not in outputs or net.post_weight(p, transition.id) < net.pre_weight(p, transition.id)
        )
        arcs.append((transition.id, inputs, outputs, emptiable))

    nodes = [initial]
    edges = []
    seen = {initial}
    queue = deque([initial])
    while queue:
        node = queue.popleft()
        for transition_id, inputs, outputs, emptiable in arcs:
            if not all(node[p] for p in inputs):
                continue
            fired = node
            for place in outputs:
                fired = fired.with_sign(place, True)
            for size in range(len(emptiable) + 1):
                for emptied in combinations(emptiable, size):
                    successor = fired
                    for place in emptied:
                        successor = successor.with_sign(place, False)
                    if successor == node:
                        continue
                    edges.append((node, transition_id, successor))
                    if successor not in seen:
                        seen.add(successor)
                        nodes.append(successor)
                        queue.append(successor)
    logger.debug(f"Macro-marking graph of {net.name}: {len(nodes)} nodes, {len(edges)} edges")
    return MacroGraph(initial, tuple(nodes), tuple(dict.fromkeys(edges)))


def enabling_state(net, marking, transition_id):
    inputs, _ = adjacency(net, transition_id)
    if all(marking[p] > 0 for p in inputs if net.place(p).continuous):
        return Enabling.STRONG
    return Enabling.WEAK


def compute_speeds(net, macro, active=None):
    """Resolve instantaneous speeds by proportional sharing of the inflow of every zero place.

    Speeds start at V_j for active transitions and 0 otherwise; each pass visits the
    zero places in declaration order and scales the outputs of any place whose
    outflow exceeds its inflow by IN/OUT. Passes repeat until nothing changes.
    """
    transitions = net.continuous_transitions
    unspeeded = [t.id for t in transitions if t.max_speed is None and (active is None or t.id in active)]
    if unspeeded:
        raise ValueError(
            f"net {net.name} is {net.net_class.value}; constant speeds are missing for {', '.join(unspeeded)}"
        )
    speeds = {
        t.id: Fraction(t.max_speed) if (active is None or t.id in active) else Fraction(0)
        for t in transitions
    }
    zero_places = macro.zero
    limit = max(1, 2 ** len(macro.places) * len(transitions))
    for _ in range(limit + 1):
        unbalanced = []
        for place in zero_places:
            inflow = sum((net.post_weight(place, t.id) * speeds[t.id] for t in transitions), Fraction(0))
            outflow = sum((net.pre_weight(place, t.id) * speeds[t.id] for t in transitions), Fraction(0))
            if outflow > inflow:
                unbalanced.append(place)
                factor = inflow / outflow
                for t in transitions:
                    if net.pre_weight(place, t.id) > 0:
                        speeds[t.id] *= factor
        if not unbalanced:
            return speeds
    raise NonConvergence(unbalanced)


def marking_derivative(net, speeds):
    """Exact product W . v over the continuous places."""
    return {
        p.id: sum(
            ((net.post_weight(p.id, t) - net.pre_weight(p.id, t)) * v for t, v in speeds.items()),
            Fraction(0),
        )
        for p in net.continuous_places
    }


def next_zero_event(marking, derivative):
    """Time until the first draining place empties, and every place emptying then."""
    best = INFINITY
    places = []
    for place, rate in derivative.items():
        if rate >= 0 or marking[place] <= 0:
            continue
        delay = marking[place] / -rate
        if delay < best:
            best, places = delay, [place]
        elif delay == best:
            places.append(place)
    return best, tuple(places)


def settle(net, marking, macro, active=None):
    """Apply the switches that happen at the current instant until the sign vector is stable.

    A place flagged positive whose marking is zero and still draining switches to
    zero; a zero place whose derivative is positive switches to positive. The lowest
    declaration index switches first and speeds are resolved again after each switch.
    """
    zeroed = []
    switched = set()
    while True:
        speeds = compute_speeds(net, macro, active)
        derivative = marking_derivative(net, speeds)
        draining = next((p for p in macro.positive if marking[p] == 0 and derivative[p] < 0), None)
        filling = next((p for p in macro.zero if derivative[p] > 0), None)
        place = draining or filling
        if place is None:
            return macro, speeds, derivative, zeroed
        if place in switched:
            raise NonConvergence([place], f"place {place} switches sign twice at one instant")
        switched.add(place)
        if draining:
            zeroed.append(place)
        macro = macro.with_sign(place, not draining)


def advance(marking, derivative, delay):
    return marking.updated({p: marking[p] + rate * delay for p, rate in derivative.items()})


class Terminal(Enum):
    STEADY_STATE = "steady-state"
    HORIZON = "horizon-reached"
    CYCLE = "cycle"


@dataclass(frozen=True)
class Phase:
    macro: MacroMarking
    speeds: dict
    derivative: dict
    start_time: Fraction
    duration: object
    exit_event: tuple
    start_marking: Marking

    @property
    def end_time(self):
        return self.start_time + self.duration


@dataclass
class EvolutionGraph:
    phases: list = field(default_factory=list)
    terminal: Terminal = Terminal.STEADY_STATE


def _evolve(net, horizon, stop_on_cycle):
    places = tuple(p.id for p in net.continuous_places)
    marking = net.initial_marking.restricted(places)
    macro, speeds, derivative, _ = settle(net, marking, macro_marking(net, marking))
    time = Fraction(0)
    graph = EvolutionGraph()
    seen = set()
    while True:
        key = (macro, tuple(speeds.values()))
        if stop_on_cycle and key in seen:
            graph.terminal = Terminal.CYCLE
            break
        seen.add(key)
        delay, emptied = next_zero_event(marking, derivative)
        if delay == INFINITY:
            graph.phases.append(Phase(macro, speeds, derivative, time, INFINITY, (), marking))
            graph.terminal = Terminal.STEADY_STATE
            break
        if time + delay > horizon:
            graph.phases.append(Phase(macro, speeds, derivative, time, horizon - time, (), marking))
            graph.terminal = Terminal.HORIZON
            break
        graph.phases.append(Phase(macro, speeds, derivative, time, delay, emptied, marking))
        logger.debug(f"Phase at t={format_rational(time)}: v={_show(speeds)} lasts {format_rational(delay)}, ends with {emptied}")
        time += delay
        marking = advance(marking, derivative, delay)
        macro, speeds, derivative, _ = settle(net, marking, macro)
        if time == horizon:
            graph.terminal = Terminal.HORIZON
            break
    return graph


def evolution_graph(net, horizon=INFINITY):
    graph = _evolve(net, horizon, stop_on_cycle=True)
    logger.info(f"Evolution graph of {net.name}: {len(graph.phases)} phase(s), {graph.terminal.value}")
    return graph


def simulate_ccpn(net, horizon):
    if horizon == INFINITY or horizon <= 0:
        raise ValueError(f"horizon must be finite and positive, got {horizon}")
    horizon = Fraction(horizon)
    graph = _evolve(net, horizon, stop_on_cycle=False)
    trajectory = Trajectory(tuple(p.id for p in net.continuous_places))
    for phase in graph.phases:
        trajectory.record(phase.start_time, phase.start_marking)
    last = graph.phases[-1]
    end = min(last.end_time, horizon)
    trajectory.record(end, advance(last.start_marking, last.derivative, end - last.start_time))
    logger.info(f"Simulated {net.name} up to t={format_rational(horizon)}: {len(trajectory.points)} breakpoints")
    return trajectory


def _show(vector):
    return "(" + ", ".join(format_rational(v) for v in vector.values()) + ")"
