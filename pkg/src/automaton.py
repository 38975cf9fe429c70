import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .net import INFINITY, format_rational

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "hpn-ha/1"
OPERATORS = ("<=", ">=", "==")


@dataclass(frozen=True)
class Constraint:
    """Linear atom `variable op bound` over a continuous variable or a clock."""

    variable: str
    op: str
    bound: Fraction

    def holds(self, valuation):
        value = valuation[self.variable]
        if self.op == "<=":
            return value <= self.bound
        if self.op == ">=":
            return value >= self.bound
        return value == self.bound

    def __str__(self):
        return f"{self.variable} {self.op} {format_rational(self.bound)}"

    @classmethod
    def parse(cls, text):
        variable, op, bound = text.split()
        if op not in OPERATORS:
            raise ValueError(f"unknown operator in constraint '{text}'")
        return cls(variable, op, Fraction(bound))


class EdgeKind(Enum):
    DISCRETE = "discrete"
    ZERO = "zero"
    FILL = "fill"


@dataclass(frozen=True)
class Location:
    id: str
    flow: dict = field(default_factory=dict)
    invariant: tuple = ()
    marking: tuple = ()
    signs: str = ""
    enabled: tuple = ()

    def flow_text(self):
        return [f"d{variable}/dt={format_rational(rate)}" for variable, rate in self.flow.items()]


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    label: str
    guard: tuple = ()
    resets: tuple = ()
    kind: EdgeKind = EdgeKind.DISCRETE


@dataclass
class HybridAutomaton:
    """Locations with constant flows, linear invariants and guarded edges that reset clocks.

    `variables` maps each continuous variable to the place it tracks and `clocks`
    maps each clock to its discrete transition, both in declaration order.
    """

    name: str
    variables: dict
    clocks: dict
    place_order: tuple
    locations: dict = field(default_factory=dict)
    edges: list = field(default_factory=list)
    initial: str = None
    initial_valuation: dict = field(default_factory=dict)
    _outgoing: dict = field(default=None, init=False, repr=False, compare=False)
    _indexed: list = field(default=None, init=False, repr=False, compare=False)
    _indexed_size: int = field(default=0, init=False, repr=False, compare=False)

    def add_location(self, location):
        self.locations[location.id] = location

    def location(self, location_id):
        return self.locations[location_id]

    def outgoing(self, location_id):
        # rebuilt whenever the edge list is replaced or appended to
        if self._indexed is not self.edges or self._indexed_size != len(self.edges):
            self._outgoing = {}
            for edge in self.edges:
                self._outgoing.setdefault(edge.source, []).append(edge)
            self._indexed = self.edges
            self._indexed_size = len(self.edges)
        return self._outgoing.get(location_id, [])

    @property
    def labels(self):
        return tuple(dict.fromkeys(edge.label for edge in self.edges))

    def variable_of(self, place_id):
        for variable, place in self.variables.items():
            if place == place_id:
                return variable
        raise KeyError(place_id)


class TimedAutomaton(HybridAutomaton):
    """A hybrid automaton whose only variables are clocks of rate 1."""


@dataclass(frozen=True)
class MacroLocation:
    id: str
    marking: tuple
    inner: HybridAutomaton


def _quote(text):
    return '"{}"'.format(text.replace('"', r'\"'))


def _dot(ha):
    yield f"digraph {_quote(ha.name)} {{\n"
    yield "  rankdir=LR;\n"
    for location in ha.locations.values():
        shape = "doubleoctagon" if location.id == ha.initial else "box"
        lines = [location.id, *location.flow_text(), *(str(c) for c in location.invariant)]
        yield f"  {_quote(location.id)} [shape={shape} label={_quote(chr(10).join(lines))}];\n"
    for edge in ha.edges:
        parts = [edge.label]
        if edge.guard:
            parts.append(" && ".join(str(c) for c in edge.guard))
        if edge.resets:
            parts.append(", ".join(f"{clock}:=0" for clock in edge.resets))
        style = "" if edge.kind is EdgeKind.DISCRETE else " style=dashed"
        yield f"  {_quote(edge.source)} -> {_quote(edge.target)} [label={_quote(chr(10).join(parts))}{style}];\n"
    yield "}\n"


def to_document(ha):
    return {
        "schema": SCHEMA_VERSION,
        "name": ha.name,
        "kind": "timed" if isinstance(ha, TimedAutomaton) else "hybrid",
        "places": list(ha.place_order),
        "variables": [{"name": v, "place": p} for v, p in ha.variables.items()],
        "clocks": [{"name": c, "transition": t} for c, t in ha.clocks.items()],
        "locations": [
            {
                "id": location.id,
                "flow": {v: format_rational(rate) for v, rate in location.flow.items()},
                "invariant": [str(c) for c in location.invariant],
                "marking": {p: tokens for p, tokens in location.marking},
                "signs": location.signs,
                "enabled": list(location.enabled),
            }
            for location in ha.locations.values()
        ],
        "edges": [
            {
                "src": edge.source,
                "dst": edge.target,
                "label": edge.label,
                "kind": edge.kind.value,
                "guards": [str(c) for c in edge.guard],
                "resets": list(edge.resets),
            }
            for edge in ha.edges
        ],
        "init": {
            "location": ha.initial,
            "valuation": {v: format_rational(value) for v, value in ha.initial_valuation.items()},
        },
    }


def export_ha(ha, fmt="structured"):
    if fmt == "dot":
        return "".join(_dot(ha))
    if fmt == "structured":
        return json.dumps(to_document(ha), indent=2) + "\n"
    raise ValueError(f"unknown automaton format '{fmt}'")


def from_document(document):
    if document.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported automaton schema {document.get('schema')!r}, expected {SCHEMA_VERSION}")
    cls = TimedAutomaton if document.get("kind") == "timed" else HybridAutomaton
    ha = cls(
        name=document["name"],
        variables={entry["name"]: entry["place"] for entry in document["variables"]},
        clocks={entry["name"]: entry["transition"] for entry in document["clocks"]},
        place_order=tuple(document["places"]),
        initial=document["init"]["location"],
        initial_valuation={v: Fraction(value) for v, value in document["init"]["valuation"].items()},
    )
    for entry in document["locations"]:
        ha.add_location(Location(
            id=entry["id"],
            flow={v: Fraction(rate) for v, rate in entry["flow"].items()},
            invariant=tuple(Constraint.parse(text) for text in entry["invariant"]),
            marking=tuple(entry["marking"].items()),
            signs=entry["signs"],
            enabled=tuple(entry["enabled"]),
        ))
    for entry in document["edges"]:
        ha.edges.append(Edge(
            source=entry["src"],
            target=entry["dst"],
            label=entry["label"],
            guard=tuple(Constraint.parse(text) for text in entry["guards"]),
            resets=tuple(entry["resets"]),
            kind=EdgeKind(entry["kind"]),
        ))
    missing = {e.source for e in ha.edges} | {e.target for e in ha.edges} | {ha.initial}
    missing -= set(ha.locations)
    if missing:
        raise ValueError(f"edges reference undeclared locations: {', '.join(sorted(missing))}")
    return ha


def load_ha(text):
    ha = from_document(json.loads(text))
    logger.debug(f"Loaded automaton {ha.name}: {len(ha.locations)} locations, {len(ha.edges)} edges")
    return ha


def clock_bounds(ha, location, clock):
    """Firing window (alpha, beta) a location gives the transition behind `clock`."""
    alpha = next(
        (c.bound for edge in ha.outgoing(location.id) if edge.kind is EdgeKind.DISCRETE
         for c in edge.guard if c.variable == clock and c.op == ">="),
        Fraction(0),
    )
    beta = next((c.bound for c in location.invariant if c.variable == clock and c.op == "<="), INFINITY)
    return alpha, beta
