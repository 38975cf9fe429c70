import json
import logging
from collections import deque
from dataclasses import replace
from fractions import Fraction

from .automaton import (
    Constraint,
    Edge,
    EdgeKind,
    HybridAutomaton,
    Location,
    MacroLocation,
    TimedAutomaton,
    to_document,
)
from .ccpn import MacroMarking, compute_speeds, macro_marking, marking_derivative
from .hybrid import active_configuration, d_enabled, fire_discrete
from .net import HybridNet, Marking, NetClass

logger = logging.getLogger(__name__)


class MarkingCapExceeded(RuntimeError):
    def __init__(self, cap):
        self.cap = cap
        super().__init__(f"more than {cap} reachable discrete markings")


def clock_name(transition_id):
    return f"x_{transition_id}"


def variable_names(net):
    return {f"m{i}": place.id for i, place in enumerate(net.continuous_places, start=1)}


def extract_discrete_part(net):
    places = net.discrete_places
    transitions = net.discrete_transitions
    keep = {t.id for t in transitions}
    return HybridNet(
        name=f"{net.name}-discrete",
        net_class=NetClass.D_ELEMENTARY,
        places=places,
        transitions=transitions,
        pre={arc: w for arc, w in net.pre.items() if arc[1] in keep},
        post={arc: w for arc, w in net.post.items() if arc[1] in keep},
        initial_marking=net.initial_marking.restricted(p.id for p in places),
    )


def _marking_key(marking):
    return tuple(marking.items())


def timepn_to_timed_automaton(tpn, marking_cap):
    """Marking-graph timed automaton with one clock per transition.

    A clock is reset whenever its transition becomes newly enabled, the fired
    transition included when it stays enabled.
    """
    transitions = tpn.discrete_transitions
    clocks = {clock_name(t.id): t.id for t in transitions}
    ta = TimedAutomaton(
        name=tpn.name,
        variables={},
        clocks=clocks,
        place_order=tuple(p.id for p in tpn.places),
        initial_valuation={clock: Fraction(0) for clock in clocks},
    )

    def enabled(marking):
        return tuple(t.id for t in transitions if d_enabled(tpn, marking, t.id))

    def location(marking, index):
        active = enabled(marking)
        invariant = tuple(
            Constraint(clock_name(t), "<=", tpn.transition(t).interval.beta)
            for t in active if tpn.transition(t).interval.bounded
        )
        return Location(f"S{index}", invariant=invariant, marking=_marking_key(marking), enabled=active)

    initial = tpn.initial_marking
    ids = {_marking_key(initial): "S0"}
    ta.add_location(location(initial, 0))
    ta.initial = "S0"
    queue = deque([initial])
    while queue:
        marking = queue.popleft()
        source = ids[_marking_key(marking)]
        before = enabled(marking)
        for transition_id in before:
            successor = fire_discrete(tpn, marking, transition_id)
            key = _marking_key(successor)
            if key not in ids:
                if len(ids) >= marking_cap:
                    raise MarkingCapExceeded(marking_cap)
                ids[key] = f"S{len(ids)}"
                ta.add_location(location(successor, len(ids) - 1))
                queue.append(successor)
            after = enabled(successor)
            resets = tuple(
                clock_name(t) for t in after if t not in before or t == transition_id
            )
            alpha = tpn.transition(transition_id).interval.alpha
            ta.edges.append(Edge(
                source=source,
                target=ids[key],
                label=transition_id,
                guard=(Constraint(clock_name(transition_id), ">=", alpha),),
                resets=resets,
            ))
    logger.debug(f"Timed automaton of {tpn.name}: {len(ta.locations)} locations, {len(ta.edges)} edges")
    return ta


def ccpn_configuration(net, d_marking):
    """The CCPN over the continuous places running under a given discrete marking."""
    active = active_configuration(net, d_marking)
    places = net.continuous_places
    transitions = tuple(t for t in net.continuous_transitions if t.id in active)
    keep = {t.id for t in transitions}
    continuous = {p.id for p in places}
    return HybridNet(
        name=net.name,
        net_class=NetClass.CCPN,
        places=places,
        transitions=transitions,
        pre={arc: w for arc, w in net.pre.items() if arc[1] in keep and arc[0] in continuous},
        post={arc: w for arc, w in net.post.items() if arc[1] in keep and arc[0] in continuous},
        initial_marking=net.initial_marking.restricted(p.id for p in places),
    )


class InnerAutomaton:
    """Sign-vector locations of one CCPN configuration, built on demand."""

    def __init__(self, ccpn):
        self.ccpn = ccpn
        self.places = tuple(p.id for p in ccpn.continuous_places)
        self.names = {place: variable for variable, place in variable_names(ccpn).items()}
        self._locations = {}
        self._edges = {}

    def _macro(self, signs):
        return MacroMarking(self.places, tuple(s == "1" for s in signs))

    def location(self, signs):
        if signs not in self._locations:
            macro = self._macro(signs)
            derivative = marking_derivative(self.ccpn, compute_speeds(self.ccpn, macro))
            invariant = tuple(
                Constraint(self.names[p], ">=" if macro[p] else "<=", Fraction(0)) for p in self.places
            )
            flow = {self.names[p]: derivative[p] for p in self.places}
            self._locations[signs] = Location(signs, flow=flow, invariant=invariant, signs=signs)
        return self._locations[signs]

    def edges(self, signs):
        """Urgent sign switches: draining positive places empty, filling zero places turn positive."""
        if signs not in self._edges:
            location = self.location(signs)
            macro = self._macro(signs)
            edges = []
            for place in self.places:
                variable = self.names[place]
                rate = location.flow[variable]
                if macro[place] and rate < 0:
                    target = str(macro.with_sign(place, False))
                    edges.append(Edge(signs, target, f"{variable} = 0",
                                      (Constraint(variable, "==", Fraction(0)),), kind=EdgeKind.ZERO))
                elif not macro[place] and rate > 0:
                    target = str(macro.with_sign(place, True))
                    edges.append(Edge(signs, target, f"{variable} > 0",
                                      (Constraint(variable, ">=", Fraction(0)),), kind=EdgeKind.FILL))
            self._edges[signs] = edges
        return self._edges[signs]


def ccpn_to_ha(ccpn):
    inner = InnerAutomaton(ccpn)
    initial = str(macro_marking(ccpn, ccpn.initial_marking))
    ha = HybridAutomaton(
        name=ccpn.name,
        variables=variable_names(ccpn),
        clocks={},
        place_order=tuple(p.id for p in ccpn.places),
        initial=initial,
        initial_valuation={inner.names[p]: Fraction(ccpn.initial_marking[p]) for p in inner.places},
    )
    queue = deque([initial])
    seen = {initial}
    while queue:
        signs = queue.popleft()
        ha.add_location(inner.location(signs))
        for edge in inner.edges(signs):
            ha.edges.append(edge)
            if edge.target not in seen:
                seen.add(edge.target)
                queue.append(edge.target)
    return ha


def flat_id(ta_location, signs):
    return f"{ta_location}|{signs}"


def flatten(ta, inner, initial_signs, variables, place_order, initial_valuation, name=None):
    """Product of the timed automaton with the inner automata, reachable part only.

    Discrete edges keep the sign vector, since a discrete firing leaves the
    continuous markings unchanged.
    """
    ha = HybridAutomaton(
        name=name or ta.name,
        variables=variables,
        clocks=dict(ta.clocks),
        place_order=place_order,
        initial=flat_id(ta.initial, initial_signs),
        initial_valuation={**initial_valuation, **ta.initial_valuation},
    )
    queue = deque([(ta.initial, initial_signs)])
    seen = {(ta.initial, initial_signs)}

    def visit(pair):
        if pair not in seen:
            seen.add(pair)
            queue.append(pair)

    while queue:
        q, signs = queue.popleft()
        outer = ta.location(q)
        local = inner[q].location(signs)
        source = flat_id(q, signs)
        ha.add_location(replace(
            local,
            id=source,
            invariant=local.invariant + outer.invariant,
            marking=outer.marking,
            enabled=outer.enabled,
        ))
        for edge in inner[q].edges(signs):
            ha.edges.append(replace(edge, source=source, target=flat_id(q, edge.target)))
            visit((q, edge.target))
        for edge in ta.outgoing(q):
            ha.edges.append(replace(edge, source=source, target=flat_id(edge.target, signs)))
            visit((edge.target, signs))
    return ha


def _inner_automata(net, ta):
    return {
        q.id: InnerAutomaton(ccpn_configuration(net, Marking(q.marking)))
        for q in ta.locations.values()
    }


def translate(net, marking_cap):
    """Discrete part to a timed automaton, each discrete marking to a CCPN automaton, then flatten."""
    if net.net_class not in (NetClass.D_ELEMENTARY, NetClass.CCPN):
        raise ValueError(f"net {net.name} is {net.net_class.value}; translation needs a delementary net")
    if not net.discrete_places and not net.discrete_transitions:
        logger.warning(f"{net.name} has no discrete part; translating its continuous part alone")
        return ccpn_to_ha(net)

    ta = timepn_to_timed_automaton(extract_discrete_part(net), marking_cap)
    if not net.continuous_places:
        ta.name = net.name
        return ta
    variables = variable_names(net)
    ha = flatten(
        ta,
        _inner_automata(net, ta),
        initial_signs=str(macro_marking(net, net.initial_marking)),
        variables=variables,
        place_order=tuple(p.id for p in net.places),
        initial_valuation={v: Fraction(net.initial_marking[p]) for v, p in variables.items()},
        name=net.name,
    )
    bound = len(ta.locations) * 2 ** len(net.continuous_places)
    assert len(ha.locations) <= bound, f"{len(ha.locations)} flat locations exceed n*2^m = {bound}"
    logger.info(
        f"Translated {net.name}: n={len(ta.locations)} m={len(net.continuous_places)} "
        f"locations={len(ha.locations)} bound={bound}"
    )
    return ha


def hierarchy(net, marking_cap):
    """Macro-locations of the discrete part, each holding the automaton of its CCPN configuration."""
    ta = timepn_to_timed_automaton(extract_discrete_part(net), marking_cap)
    return [
        MacroLocation(q.id, q.marking, ccpn_to_ha(ccpn_configuration(net, Marking(q.marking))))
        for q in ta.locations.values()
    ]


def export_hierarchy(net, marking_cap):
    document = {
        "name": net.name,
        "macro_locations": [
            {"id": m.id, "marking": dict(m.marking), "inner": to_document(m.inner)}
            for m in hierarchy(net, marking_cap)
        ],
    }
    return json.dumps(document, indent=2) + "\n"
