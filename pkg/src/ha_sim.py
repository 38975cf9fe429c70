import logging
from fractions import Fraction

from .automaton import EdgeKind, clock_bounds
from .ccpn import NonConvergence
from .hybrid import DEFAULT_MAX_EVENTS, Event, EventKind, EventLog, ZenoSuspect
from .net import INFINITY, Interval, Marking, format_rational
from .policy import FiringPolicy
from .trajectory import Trajectory

logger = logging.getLogger(__name__)


class AutomatonRun:
    """Event-driven run of a translated automaton with constant flows and clock guards.

    Clocks advance at rate 1 and are zeroed by the resets of the discrete edges
    taken. A transition is enabled in a location when a discrete edge carries its
    label; its firing window is read from the guard and invariant bounds of its
    clock, counted from the instant the clock last read zero.
    """

    def __init__(self, ha, horizon, policy, max_events):
        if horizon == INFINITY or horizon <= 0:
            raise ValueError(f"horizon must be finite and positive, got {horizon}")
        self.ha = ha
        self.horizon = Fraction(horizon)
        self.scheduler = policy.scheduler(self.horizon)
        self.max_events = max_events
        self.transitions = {t: c for c, t in ha.clocks.items()}
        self.order = tuple(ha.clocks.values())
        self.time = Fraction(0)
        self.location = ha.location(ha.initial)
        self.values = {v: Fraction(ha.initial_valuation.get(v, 0)) for v in ha.variables}
        self.clocks = {c: Fraction(ha.initial_valuation.get(c, 0)) for c in ha.clocks}
        self.tracked = {place: variable for variable, place in ha.variables.items()}
        self.enabled_since = {}
        self.scheduled = {}
        self.log = EventLog()
        self.trajectory = Trajectory(ha.place_order)

    def marking(self):
        discrete = dict(self.location.marking)
        return Marking(
            (p, self.values[self.tracked[p]] if p in self.tracked else discrete[p]) for p in self.ha.place_order
        )

    def _emit(self, kind, subject, detail=""):
        self.log.append(Event(self.time, kind, subject, detail, self.marking()))
        if len(self.log) > self.max_events:
            raise ZenoSuspect(f"more than {self.max_events} events before t={format_rational(self.time)}")

    def _enabled(self, location):
        return {e.label for e in self.ha.outgoing(location.id) if e.kind is EdgeKind.DISCRETE}

    def _start(self, transition_id):
        clock = self.transitions[transition_id]
        alpha, beta = clock_bounds(self.ha, self.location, clock)
        since = self.time - self.clocks[clock]
        firing = self.scheduler.select_firing_time(transition_id, Interval(alpha, beta), since)
        self.enabled_since[transition_id] = since
        self.scheduled[transition_id] = firing

    def _stop(self, transition_id):
        self.enabled_since.pop(transition_id, None)
        self.scheduled.pop(transition_id, None)

    def _urgent_edge(self):
        """Zero edges first, then fill edges, each in variable order."""
        edges = self.ha.outgoing(self.location.id)
        variables = tuple(self.ha.variables)
        for kind in (EdgeKind.ZERO, EdgeKind.FILL):
            candidates = [
                e for e in edges
                if e.kind is kind and all(c.holds(self.values) for c in e.guard)
            ]
            if candidates:
                return min(candidates, key=lambda e: variables.index(e.guard[0].variable))
        return None

    def _discrete_edge(self):
        edges = {e.label: e for e in self.ha.outgoing(self.location.id) if e.kind is EdgeKind.DISCRETE}
        for transition_id in self.order:
            if transition_id in edges and self.scheduled.get(transition_id, INFINITY) <= self.time:
                return edges[transition_id]
        return None

    def _take_discrete(self, edge):
        before = self._enabled(self.location)
        for clock in edge.resets:
            self.clocks[clock] = Fraction(0)
        self.location = self.ha.location(edge.target)
        self.scheduler.fired(edge.label, self.time)
        logger.debug(f"t={format_rational(self.time)}: {edge.label} -> {edge.target}")
        self._emit(EventKind.DISCRETE_FIRE, edge.label)
        after = self._enabled(self.location)
        for transition_id in self.order:
            reset = self.transitions[transition_id] in edge.resets
            if transition_id in after and (transition_id not in before or reset):
                self._start(transition_id)
                self._emit(EventKind.ENABLE_CHANGE, transition_id, "enabled")
            elif transition_id in before and transition_id not in after:
                self._stop(transition_id)
                self._emit(EventKind.ENABLE_CHANGE, transition_id, "disabled")

    def _instant(self):
        switched = set()
        while True:
            edge = self._urgent_edge()
            if edge is not None:
                variable = edge.guard[0].variable
                place = self.ha.variables[variable]
                if place in switched:
                    raise NonConvergence([place], f"place {place} switches sign twice at one instant")
                switched.add(place)
                self.location = self.ha.location(edge.target)
                if edge.kind is EdgeKind.ZERO:
                    self._emit(EventKind.CONTINUOUS_ZERO, place)
                continue
            edge = self._discrete_edge()
            if edge is None:
                return
            switched = set()
            self._take_discrete(edge)

    def _delay(self):
        best = min(self.scheduled.values(), default=INFINITY) - self.time
        for variable, rate in self.location.flow.items():
            if rate < 0 and self.values[variable] > 0:
                best = min(best, self.values[variable] / -rate)
        return min(best, self.horizon - self.time)

    def run(self):
        self.trajectory.record(self.time, self.marking())
        initial = self._enabled(self.location)
        for transition_id in self.order:
            if transition_id in initial:
                self._start(transition_id)
                self._emit(EventKind.ENABLE_CHANGE, transition_id, "enabled")
        while True:
            self._instant()
            self.trajectory.record(self.time, self.marking())
            if self.time >= self.horizon:
                break
            step = self._delay()
            for variable, rate in self.location.flow.items():
                self.values[variable] += rate * step
            for clock in self.clocks:
                self.clocks[clock] += step
            self.time += step
            self.trajectory.record(self.time, self.marking())
        logger.info(f"Simulated automaton {self.ha.name} up to t={format_rational(self.horizon)}: {len(self.log)} event(s)")
        return self.trajectory, self.log


def simulate_ha(ha, horizon, policy=None, max_events=DEFAULT_MAX_EVENTS):
    policy = policy or FiringPolicy.earliest()
    return AutomatonRun(ha, horizon, policy, max_events).run()
