import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .ccpn import macro_marking, next_zero_event, settle
from .net import INFINITY, Marking, adjacency, format_rational
from .policy import FiringPolicy
from .trajectory import Trajectory

logger = logging.getLogger(__name__)

DEFAULT_MAX_EVENTS = 10**6


class FiringUnderflow(RuntimeError):
    pass


class ZenoSuspect(RuntimeError):
    pass


class EventKind(Enum):
    CONTINUOUS_ZERO = "continuous-zero"
    DISCRETE_FIRE = "discrete-fire"
    ENABLE_CHANGE = "enable-change"


@dataclass(frozen=True)
class Event:
    time: Fraction
    kind: EventKind
    subject: str
    detail: str
    marking: Marking

    def __str__(self):
        detail = f" {self.detail}" if self.detail else ""
        return f"t={format_rational(self.time)} {self.kind.value} {self.subject}{detail}"


class EventLog(list):
    def of_kind(self, kind):
        return [event for event in self if event.kind is kind]

    def firings(self):
        return self.of_kind(EventKind.DISCRETE_FIRE)

    def first_divergence(self, other):
        """Index and the two differing entries, or None when both logs are identical."""
        for index in range(max(len(self), len(other))):
            mine = self[index] if index < len(self) else None
            theirs = other[index] if index < len(other) else None
            if mine != theirs:
                return index, mine, theirs
        return None


class TimerState:
    """Enabling clocks of the discrete transitions, with the instant each one is due."""

    def __init__(self, transition_ids):
        self.enabled_since = dict.fromkeys(transition_ids)
        self.scheduled = dict.fromkeys(transition_ids, INFINITY)

    def enabled(self, transition_id):
        return self.enabled_since[transition_id] is not None

    def start(self, transition_id, now, firing_time):
        self.enabled_since[transition_id] = now
        self.scheduled[transition_id] = firing_time

    def stop(self, transition_id):
        self.enabled_since[transition_id] = None
        self.scheduled[transition_id] = INFINITY

    def next_firing(self):
        return min(self.scheduled.values(), default=INFINITY)


def d_enabled(net, marking, transition_id):
    inputs, _ = adjacency(net, transition_id)
    return all(marking[p] >= net.pre_weight(p, transition_id) for p in inputs)


def _forward_enabled(net, marking, transition_id, derivative):
    """Enabled now and still enabled an instant later given the continuous derivative."""
    if not d_enabled(net, marking, transition_id):
        return False
    inputs, _ = adjacency(net, transition_id)
    return not any(
        p in derivative and marking[p] == net.pre_weight(p, transition_id) and derivative[p] < 0
        for p in inputs
    )


def fire_discrete(net, marking, transition_id):
    changes = {}
    for place in net.places:
        delta = net.post_weight(place.id, transition_id) - net.pre_weight(place.id, transition_id)
        if not delta:
            continue
        amount = marking[place.id] + delta
        if amount < 0:
            raise FiringUnderflow(f"firing {transition_id} leaves {place.id} at {format_rational(amount)}")
        if not place.continuous:
            amount = int(amount)
        changes[place.id] = amount
    return marking.updated(changes)


def active_configuration(net, marking):
    """Continuous transitions whose discrete loop places currently allow them to run."""
    active = set()
    for transition in net.continuous_transitions:
        inputs, _ = adjacency(net, transition.id)
        if all(marking[p] >= net.pre_weight(p, transition.id) for p in inputs if not net.place(p).continuous):
            active.add(transition.id)
    return active


def _threshold_delay(net, marking, derivative):
    """Time until a continuous input of a discrete transition crosses its arc weight."""
    best = INFINITY
    for transition in net.discrete_transitions:
        for place in net.continuous_places:
            weight = net.pre_weight(place.id, transition.id)
            rate = derivative[place.id]
            if not weight or not rate:
                continue
            gap = weight - marking[place.id]
            if gap * rate > 0:
                best = min(best, gap / rate)
    return best


class HybridSimulation:
    """One run of a hybrid net: owns the marking, sign vector, clocks and log."""

    def __init__(self, net, horizon, policy, max_events):
        if not net.net_class.is_hybrid:
            raise ValueError(f"net {net.name} is {net.net_class.value}; the hybrid engine needs hybrid or delementary")
        if horizon == INFINITY or horizon <= 0:
            raise ValueError(f"horizon must be finite and positive, got {horizon}")
        self.net = net
        self.horizon = Fraction(horizon)
        self.scheduler = policy.scheduler(self.horizon)
        self.max_events = max_events
        self.continuous = tuple(p.id for p in net.continuous_places)
        self.discrete = tuple(t.id for t in net.discrete_transitions)
        self.time = Fraction(0)
        self.marking = net.initial_marking
        self.macro = macro_marking(net, self.marking)
        self.timers = TimerState(self.discrete)
        self.log = EventLog()
        self.trajectory = Trajectory(tuple(p.id for p in net.places))

    def _settle(self):
        active = active_configuration(self.net, self.marking)
        return settle(self.net, self.marking.restricted(self.continuous), self.macro, active)

    def _emit(self, kind, subject, detail=""):
        self.log.append(Event(self.time, kind, subject, detail, self.marking))
        if len(self.log) > self.max_events:
            raise ZenoSuspect(f"more than {self.max_events} events before t={format_rational(self.time)}")

    def _start(self, transition_id):
        interval = self.net.transition(transition_id).interval
        firing = self.scheduler.select_firing_time(transition_id, interval, self.time)
        self.timers.start(transition_id, self.time, firing)

    def _refresh_timers(self, derivative, fired=None, before=None):
        """Update enabling memory and log the changes in declaration order."""
        before = before if before is not None else {t: self.timers.enabled(t) for t in self.discrete}
        for transition_id in self.discrete:
            now = _forward_enabled(self.net, self.marking, transition_id, derivative)
            if now and (not before[transition_id] or transition_id == fired):
                self._start(transition_id)
                self._emit(EventKind.ENABLE_CHANGE, transition_id, "enabled")
            elif before[transition_id] and not now:
                self.timers.stop(transition_id)
                self._emit(EventKind.ENABLE_CHANGE, transition_id, "disabled")

    def _resync_signs(self, transition_id):
        """Continuous places touched by a discrete firing take the sign of their new marking."""
        macro = self.macro
        for place in self.continuous:
            if self.net.pre_weight(place, transition_id) or self.net.post_weight(place, transition_id):
                macro = macro.with_sign(place, self.marking[place] > 0)
        return macro

    def _due(self):
        for transition_id in self.discrete:
            if (
                self.timers.enabled(transition_id)
                and self.timers.scheduled[transition_id] <= self.time
                and d_enabled(self.net, self.marking, transition_id)
            ):
                return transition_id
        return None

    def _instant(self):
        """Process everything that happens at the current time; return the settled derivative."""
        while True:
            self.macro, _, derivative, zeroed = self._settle()
            for place in zeroed:
                self._emit(EventKind.CONTINUOUS_ZERO, place)
            transition_id = self._due()
            if transition_id is not None:
                before = {t: self.timers.enabled(t) for t in self.discrete}
                self.marking = fire_discrete(self.net, self.marking, transition_id)
                self.macro = self._resync_signs(transition_id)
                self.scheduler.fired(transition_id, self.time)
                logger.debug(f"t={format_rational(self.time)}: fire {transition_id}")
                self._emit(EventKind.DISCRETE_FIRE, transition_id)
                _, _, after, _ = self._settle()
                self._refresh_timers(after, fired=transition_id, before=before)
                continue
            count = len(self.log)
            self._refresh_timers(derivative)
            if len(self.log) == count or self.timers.next_firing() > self.time:
                return derivative

    def run(self):
        self.trajectory.record(self.time, self.marking)
        _, _, derivative, _ = self._settle()
        self._refresh_timers(derivative, before=dict.fromkeys(self.discrete, False))
        while True:
            derivative = self._instant()
            self.trajectory.record(self.time, self.marking)
            if self.time >= self.horizon:
                break
            continuous = self.marking.restricted(self.continuous)
            delay, _ = next_zero_event(continuous, derivative)
            step = min(
                delay,
                self.timers.next_firing() - self.time,
                _threshold_delay(self.net, continuous, derivative),
                self.horizon - self.time,
            )
            self.marking = self.marking.updated(
                {p: self.marking[p] + rate * step for p, rate in derivative.items()}
            )
            self.time += step
            self.trajectory.record(self.time, self.marking)
        logger.info(
            f"Simulated {self.net.name} up to t={format_rational(self.horizon)}: "
            f"{len(self.log.firings())} firing(s), {len(self.log)} event(s)"
        )
        return self.trajectory, self.log


def simulate_hybrid(net, horizon, policy=None, max_events=DEFAULT_MAX_EVENTS):
    policy = policy or FiringPolicy.earliest()
    return HybridSimulation(net, horizon, policy, max_events).run()