import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .net import Marking, adjacency
from .trajectory import Trajectory

logger = logging.getLogger(__name__)


class StepUnderflow(RuntimeError):
    pass


def _continuous_inputs(net, transition_id):
    inputs, _ = adjacency(net, transition_id)
    return tuple(p for p in inputs if net.place(p).continuous)


def vcpn_speeds(net, marking):
    """v_j = V_j times the smallest input marking; source transitions run at V_j."""
    speeds = {}
    for transition in net.continuous_transitions:
        inputs = _continuous_inputs(net, transition.id)
        rate = float(transition.max_speed)
        speeds[transition.id] = rate * min(float(marking[p]) for p in inputs) if inputs else rate
    return speeds


@dataclass(frozen=True, eq=False)
class VcpnRegion:
    """Linear dynamics dm/dt = A m + b valid while every transition keeps its argmin place."""

    places: tuple
    argmin: dict
    A: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    def derivative(self, values):
        return self.A @ values + self.b

    def same_switches(self, other):
        return self.argmin == other.argmin


def region_of(net, marking, forced=None):
    forced = forced or {}
    places = tuple(p.id for p in net.continuous_places)
    index = {p: i for i, p in enumerate(places)}
    A = np.zeros((len(places), len(places)))
    b = np.zeros(len(places))
    argmin = {}
    for transition in net.continuous_transitions:
        inputs = _continuous_inputs(net, transition.id)
        rate = float(transition.max_speed)
        if inputs:
            # min() keeps the first of equal values, i.e. the lowest declaration index
            chosen = forced.get(transition.id) or min(inputs, key=lambda p: float(marking[p]))
            argmin[transition.id] = chosen
        else:
            chosen = None
            argmin[transition.id] = None
        for place in places:
            effect = float(net.post_weight(place, transition.id) - net.pre_weight(place, transition.id))
            if not effect:
                continue
            if chosen is None:
                b[index[place]] += effect * rate
            else:
                A[index[place], index[chosen]] += effect * rate
    return VcpnRegion(places, argmin, A, b)


@dataclass(frozen=True)
class VcpnEvent:
    time: float
    description: str


def _switch_event(position, reference):
    def crossing(_, y):
        return y[position] - y[reference]

    crossing.terminal = True
    crossing.direction = -1
    return crossing


def _zero_event(position):
    def empties(_, y):
        return y[position]

    empties.terminal = True
    empties.direction = -1
    return empties


def _region_events(net, region, y):
    """Event functions that can still cross zero downwards from the segment start `y`."""
    index = {p: i for i, p in enumerate(region.places)}
    slope = region.derivative(y)
    events, meaning = [], []
    for transition in net.continuous_transitions:
        chosen = region.argmin[transition.id]
        if chosen is None:
            continue
        for place in _continuous_inputs(net, transition.id):
            if place == chosen:
                continue
            gap = y[index[place]] - y[index[chosen]]
            if gap > 0 or slope[index[place]] < slope[index[chosen]]:
                events.append(_switch_event(index[place], index[chosen]))
                meaning.append(("switch", transition.id, chosen, place))
    for place in region.places:
        if y[index[place]] <= 0 and slope[index[place]] >= 0:
            continue
        events.append(_zero_event(index[place]))
        meaning.append(("zero", None, None, place))
    return events, meaning


def simulate_vcpn(net, horizon, rel_tol=1e-9, event_tol=1e-9):
    """Integrate the piecewise-linear VCPN dynamics region by region.

    Each region is handed to RK45 with terminal events for argmin switches and
    zero crossings; the segment ends at the first event and the next region is
    assembled from the marking there.
    """
    if not horizon > 0 or horizon == float("inf"):
        raise ValueError(f"horizon must be finite and positive, got {horizon}")
    if rel_tol <= 0 or event_tol <= 0:
        raise ValueError("tolerances must be positive")
    horizon = float(horizon)
    places = tuple(p.id for p in net.continuous_places)
    y = np.array([float(net.initial_marking[p]) for p in places])
    time = 0.0
    trajectory = Trajectory(places)
    trajectory.record(time, _snapshot(places, y))
    events = []
    forced = {}
    clustered = 0
    cluster_limit = 4 * (len(places) + len(net.continuous_transitions)) + 4

    while time < horizon:
        region = region_of(net, _snapshot(places, y), forced)
        functions, meaning = _region_events(net, region, y)
        solution = solve_ivp(
            lambda _, values: region.derivative(values),
            (time, horizon),
            y,
            method="RK45",
            rtol=rel_tol,
            atol=rel_tol * 1e-3,
            max_step=horizon / 1000,
            events=functions or None,
        )
        if solution.status == -1:
            raise StepUnderflow(f"integration failed at t={time}: {solution.message}")
        for t, values in zip(solution.t[1:], solution.y.T[1:]):
            trajectory.record(float(t), _snapshot(places, values))
        y = np.array(solution.y[:, -1])
        previous, time = time, float(solution.t[-1])
        forced = {}
        if solution.status != 1:
            break

        fired = next(k for k, hits in enumerate(solution.t_events) if len(hits))
        kind, transition_id, old, new = meaning[fired]
        if kind == "zero":
            y[places.index(new)] = 0.0
            description = f"zero {new}"
        else:
            for other in net.continuous_transitions:
                if region.argmin[other.id] == old and new in _continuous_inputs(net, other.id):
                    forced[other.id] = new
            description = f"argmin {transition_id}: {old} -> {new}"
        events.append(VcpnEvent(time, description))
        logger.debug(f"VCPN event at t={time:.9g}: {description}")

        clustered = clustered + 1 if time - previous <= event_tol else 0
        if clustered > cluster_limit:
            raise StepUnderflow(f"{clustered} events within {event_tol} of t={time}; cannot separate them")
        if np.any(y < -event_tol):
            raise StepUnderflow(f"marking fell below -{event_tol} at t={time}")

    logger.info(f"Simulated VCPN {net.name} up to t={horizon}: {len(trajectory.points)} points, {len(events)} event(s)")
    return trajectory, events


def _snapshot(places, values):
    return Marking((p, max(0.0, float(v))) for p, v in zip(places, values))
