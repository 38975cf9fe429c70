import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property

logger = logging.getLogger(__name__)

INFINITY = math.inf


class NetClass(Enum):
    AUTONOMOUS = "autonomous"
    CCPN = "ccpn"
    VCPN = "vcpn"
    HYBRID_TIMED = "hybrid"
    D_ELEMENTARY = "delementary"

    @property
    def is_continuous(self):
        return self in (NetClass.AUTONOMOUS, NetClass.CCPN, NetClass.VCPN)

    @property
    def is_hybrid(self):
        return self in (NetClass.HYBRID_TIMED, NetClass.D_ELEMENTARY)


class Kind(Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class Interval:
    alpha: Fraction
    beta: object = INFINITY

    @property
    def bounded(self):
        return self.beta != INFINITY

    def __str__(self):
        beta = "inf" if not self.bounded else format_rational(self.beta)
        return f"[{format_rational(self.alpha)},{beta}]"


@dataclass(frozen=True)
class Place:
    id: str
    kind: Kind

    @property
    def continuous(self):
        return self.kind is Kind.CONTINUOUS


@dataclass(frozen=True)
class Transition:
    id: str
    kind: Kind
    max_speed: Fraction = None
    duration: Fraction = None
    firing_interval: Interval = None

    @property
    def continuous(self):
        return self.kind is Kind.CONTINUOUS

    @property
    def interval(self):
        """Firing window of a discrete transition; a duration d is the window [d, d]."""
        if self.firing_interval is not None:
            return self.firing_interval
        if self.duration is not None:
            return Interval(self.duration, self.duration)
        return None


class Marking(Mapping):
    """Immutable place -> amount map keeping the net's declaration order."""

    __slots__ = ("_items", "_index")

    def __init__(self, values=()):
        items = tuple(values.items()) if isinstance(values, Mapping) else tuple(values)
        self._items = items
        self._index = {place: amount for place, amount in items}

    def __getitem__(self, place):
        return self._index[place]

    def __iter__(self):
        return (place for place, _ in self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        return hash(frozenset(self._index.items()))

    def __eq__(self, other):
        if isinstance(other, Mapping):
            return self._index == dict(other.items())
        return NotImplemented

    def __repr__(self):
        body = ", ".join(f"{place}={format_rational(amount)}" for place, amount in self._items)
        return f"Marking({body})"

    def updated(self, changes):
        return Marking((place, changes.get(place, amount)) for place, amount in self._items)

    def restricted(self, places):
        return Marking((place, self._index[place]) for place in places)


@dataclass(frozen=True)
class HybridNet:
    name: str
    net_class: NetClass
    places: tuple
    transitions: tuple
    pre: Mapping = field(default_factory=dict)
    post: Mapping = field(default_factory=dict)
    initial_marking: Marking = field(default_factory=Marking)

    def place(self, place_id):
        return self._places_by_id[place_id]

    def transition(self, transition_id):
        try:
            return self._transitions_by_id[transition_id]
        except KeyError:
            raise UnknownTransition(transition_id) from None

    @cached_property
    def _places_by_id(self):
        index = {}
        for place in self.places:
            index.setdefault(place.id, place)
        return index

    @cached_property
    def _transitions_by_id(self):
        index = {}
        for transition in self.transitions:
            index.setdefault(transition.id, transition)
        return index

    @cached_property
    def arcs(self):
        """transition id -> (input place ids, output place ids), places in declaration order."""
        return {
            t.id: (
                tuple(p.id for p in self.places if self.pre_weight(p.id, t.id) > 0),
                tuple(p.id for p in self.places if self.post_weight(p.id, t.id) > 0),
            )
            for t in self.transitions
        }

    @cached_property
    def continuous_places(self):
        return tuple(p for p in self.places if p.continuous)

    @cached_property
    def discrete_places(self):
        return tuple(p for p in self.places if not p.continuous)

    @cached_property
    def continuous_transitions(self):
        return tuple(t for t in self.transitions if t.continuous)

    @cached_property
    def discrete_transitions(self):
        return tuple(t for t in self.transitions if not t.continuous)

    def pre_weight(self, place_id, transition_id):
        return self.pre.get((place_id, transition_id), Fraction(0))

    def post_weight(self, place_id, transition_id):
        return self.post.get((place_id, transition_id), Fraction(0))

    def with_transitions(self, transition_ids, name=None):
        """Sub-net keeping every place but only the given transitions and their arcs."""
        keep = set(transition_ids)
        return replace(
            self,
            name=name or self.name,
            transitions=tuple(t for t in self.transitions if t.id in keep),
            pre={arc: w for arc, w in self.pre.items() if arc[1] in keep},
            post={arc: w for arc, w in self.post.items() if arc[1] in keep},
        )

    def as_d_elementary(self):
        """Replace every fixed duration d with the degenerate interval [d, d]."""
        if self.net_class is not NetClass.HYBRID_TIMED:
            raise ValueError(f"net {self.name} is {self.net_class.value}, not hybrid")
        transitions = tuple(
            replace(t, duration=None, firing_interval=Interval(t.duration, t.duration))
            if not t.continuous else t
            for t in self.transitions
        )
        return replace(self, net_class=NetClass.D_ELEMENTARY, transitions=transitions)


class UnknownTransition(KeyError):
    pass


def format_rational(value):
    if value == INFINITY:
        return "inf"
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def incidence_matrix(net):
    """W[i][j] = Post(Pi, Tj) - Pre(Pi, Tj), rows and columns in declaration order."""
    return tuple(
        tuple(net.post_weight(p.id, t.id) - net.pre_weight(p.id, t.id) for t in net.transitions)
        for p in net.places
    )


def adjacency(net, transition_id):
    """Return (input places, output places) of a transition, as ordered tuples of ids."""
    net.transition(transition_id)
    return net.arcs[transition_id]


class Rule(Enum):
    DUPLICATE_ID = "place and transition identifiers are unique"
    NEGATIVE_MARKING = "initial marking is non-negative"
    DISCRETE_MARKING = "discrete places hold a whole number of tokens"
    WEIGHT = "arc weights are positive"
    CONTINUOUS_TO_DISCRETE = "no arc joins a continuous place and a discrete transition (D-elementary)"
    LOOP = "a discrete place and a continuous transition are joined by a loop with Pre = Post"
    TIMING = "transition timing matches its kind and the net class"
    INTERVAL = "firing interval satisfies alpha <= beta"
    NET_CLASS = "purely continuous net classes have no discrete nodes"


@dataclass(frozen=True)
class Violation:
    rule: Rule
    subject: str
    message: str

    def __str__(self):
        return f"[{self.rule.name}] {self.subject}: {self.message} (rule: {self.rule.value})"


class ValidationReport(list):
    @property
    def ok(self):
        return not self

    def rules(self):
        return {violation.rule for violation in self}


def validate_structure(net):
    report = ValidationReport()
    seen = set()
    for node in (*net.places, *net.transitions):
        if node.id in seen:
            report.append(Violation(Rule.DUPLICATE_ID, node.id, "identifier declared twice"))
        seen.add(node.id)

    for place in net.places:
        amount = net.initial_marking.get(place.id, 0)
        if amount < 0:
            report.append(Violation(Rule.NEGATIVE_MARKING, place.id, f"initial marking {format_rational(amount)} < 0"))
        if not place.continuous and Fraction(amount).denominator != 1:
            report.append(Violation(Rule.DISCRETE_MARKING, place.id, f"initial marking {format_rational(amount)} is not an integer"))

    for arcs in (net.pre, net.post):
        for (place_id, transition_id), weight in arcs.items():
            if weight <= 0:
                report.append(Violation(Rule.WEIGHT, f"{place_id}/{transition_id}", f"weight {format_rational(weight)}"))

    if net.net_class.is_continuous:
        for node in (*net.discrete_places, *net.discrete_transitions):
            report.append(Violation(Rule.NET_CLASS, node.id, f"discrete node in a {net.net_class.value} net"))

    if net.net_class is NetClass.D_ELEMENTARY:
        for transition in net.discrete_transitions:
            for place in net.continuous_places:
                if net.pre_weight(place.id, transition.id) or net.post_weight(place.id, transition.id):
                    report.append(Violation(
                        Rule.CONTINUOUS_TO_DISCRETE,
                        f"{place.id}/{transition.id}",
                        f"arc between continuous place {place.id} and discrete transition {transition.id}",
                    ))

    if net.net_class.is_hybrid:
        for transition in net.continuous_transitions:
            for place in net.discrete_places:
                pre = net.pre_weight(place.id, transition.id)
                post = net.post_weight(place.id, transition.id)
                if pre != post:
                    report.append(Violation(
                        Rule.LOOP,
                        f"{place.id}/{transition.id}",
                        f"Pre={format_rational(pre)} but Post={format_rational(post)}",
                    ))

    for transition in net.transitions:
        report.extend(_timing_violations(net, transition))

    logger.debug(f"Validated {net.name}: {len(report)} violation(s)")
    return report


def _timing_violations(net, transition):
    timed = [x for x in (transition.max_speed, transition.duration, transition.firing_interval) if x is not None]
    if transition.continuous:
        if transition.duration is not None or transition.firing_interval is not None:
            yield Violation(Rule.TIMING, transition.id, "continuous transition with discrete timing")
        if net.net_class is NetClass.AUTONOMOUS:
            if transition.max_speed is not None:
                yield Violation(Rule.TIMING, transition.id, "autonomous nets carry no firing speeds")
        elif transition.max_speed is None:
            yield Violation(Rule.TIMING, transition.id, "missing maximal firing speed")
        elif transition.max_speed < 0:
            yield Violation(Rule.TIMING, transition.id, "negative maximal firing speed")
        return
    if len(timed) != 1:
        yield Violation(Rule.TIMING, transition.id, "discrete transition needs exactly one of duration / interval")
        return
    if net.net_class is NetClass.HYBRID_TIMED and transition.duration is None:
        yield Violation(Rule.TIMING, transition.id, "hybrid nets use fixed durations")
    if net.net_class is NetClass.D_ELEMENTARY and transition.firing_interval is None:
        yield Violation(Rule.TIMING, transition.id, "D-elementary nets use firing intervals")
    if transition.duration is not None and transition.duration < 0:
        yield Violation(Rule.TIMING, transition.id, "negative duration")
    interval = transition.firing_interval
    if interval is not None and (interval.alpha < 0 or interval.alpha > interval.beta):
        yield Violation(Rule.INTERVAL, transition.id, f"interval {interval}")
