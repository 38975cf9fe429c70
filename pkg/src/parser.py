import logging
import re
from fractions import Fraction
from pathlib import Path

from .net import INFINITY, HybridNet, Interval, Kind, Marking, NetClass, Place, Transition, format_rational

logger = logging.getLogger(__name__)

RATIONAL = r"[+-]?\d+(?:\.\d+)?(?:/\d+)?"
IDENT = r"[A-Za-z_][A-Za-z0-9_.\-]*"

NET_LINE = re.compile(rf"^net\s+(?P<id>{IDENT})(?:\s+(?P<cls>\S+))?$")
PLACE_LINE = re.compile(rf"^place\s+(?P<id>{IDENT})\s+(?P<kind>continuous|discrete)\s*=\s*(?P<init>\S+)$")
TRANSITION_LINE = re.compile(rf"^transition\s+(?P<id>{IDENT})\s+(?P<kind>continuous|discrete)(?:\s+(?P<timing>.+))?$")
ARC_LINE = re.compile(rf"^arc\s+(?P<src>{IDENT})\s*->\s*(?P<dst>{IDENT})(?:\s+weight\s*=\s*(?P<weight>\S+))?$")
SPEED = re.compile(r"^speed\s*=\s*(?P<value>\S+)$")
DURATION = re.compile(r"^duration\s*=\s*(?P<value>\S+)$")
INTERVAL = re.compile(r"^interval\s*=\s*\[\s*(?P<alpha>[^,\]]+?)\s*,\s*(?P<beta>[^\]]+?)\s*\]$")


class ModelSyntaxError(ValueError):
    def __init__(self, message, line=0, column=0):
        self.line = line
        self.column = column
        location = f"line {line}, column {column}: " if line else ""
        super().__init__(f"{location}{message}")


def _rational(text, line, column, what):
    if not re.fullmatch(RATIONAL, text):
        raise ModelSyntaxError(f"{what} '{text}' is not a rational number", line, column)
    return Fraction(text)


def _column(raw, match=None, group=None):
    """1-based column of a matched group in the raw line; matches run on the stripped line."""
    indent = len(raw) - len(raw.lstrip())
    if match is None or match[group] is None:
        return indent + 1
    return indent + match.start(group) + 1


def parse_model(text, name="model"):
    """Parse the line-oriented model grammar into a HybridNet.

    Arcs may reference nodes declared further down the file, so declarations
    are collected first and arcs resolved afterwards.
    """
    header = None
    places = []
    transitions = []
    initial = {}
    arc_lines = []
    declared = {}

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword = line.split()[0]
        if keyword == "net":
            match = NET_LINE.match(line)
            if not match:
                raise ModelSyntaxError("malformed net header", number, 1)
            if header is not None:
                raise ModelSyntaxError("duplicate net header", number, 1)
            header = (match["id"], match["cls"], number, _column(raw, match, "cls"))
        elif keyword == "place":
            match = PLACE_LINE.match(line)
            if not match:
                raise ModelSyntaxError("expected 'place <id> continuous|discrete = <initial>'", number, 1)
            _declare(declared, match["id"], "place", number, _column(raw, match, "id"))
            kind = Kind(match["kind"])
            amount = _rational(match["init"], number, _column(raw, match, "init"), "initial marking")
            if kind is Kind.DISCRETE and amount.denominator == 1:
                amount = int(amount)
            places.append(Place(match["id"], kind))
            initial[match["id"]] = amount
        elif keyword == "transition":
            match = TRANSITION_LINE.match(line)
            if not match:
                raise ModelSyntaxError("expected 'transition <id> continuous|discrete [timing]'", number, 1)
            _declare(declared, match["id"], "transition", number, _column(raw, match, "id"))
            transitions.append(_transition(match, raw, number))
        elif keyword == "arc":
            match = ARC_LINE.match(line)
            if not match:
                raise ModelSyntaxError("expected 'arc <source> -> <target> [weight=<rational>]'", number, 1)
            arc_lines.append((match, raw, number))
        else:
            raise ModelSyntaxError(f"unknown statement '{keyword}'", number, _column(raw))

    if not places:
        raise ModelSyntaxError("net must have at least one place")

    pre, post = {}, {}
    for match, raw, number in arc_lines:
        src, dst = match["src"], match["dst"]
        for group in ("src", "dst"):
            ref = match[group]
            if ref not in declared:
                raise ModelSyntaxError(f"reference to undeclared node '{ref}'", number, _column(raw, match, group))
        weight = Fraction(1)
        if match["weight"] is not None:
            weight = _rational(match["weight"], number, _column(raw, match, "weight"), "weight")
            if weight <= 0:
                raise ModelSyntaxError(f"weight must be positive, got {match['weight']}", number, _column(raw, match, "weight"))
        kinds = (declared[src][0], declared[dst][0])
        if kinds == ("place", "transition"):
            target, key = pre, (src, dst)
        elif kinds == ("transition", "place"):
            target, key = post, (dst, src)
        else:
            raise ModelSyntaxError(f"arc {src} -> {dst} must join a place and a transition", number, 1)
        if key in target:
            raise ModelSyntaxError(f"duplicate arc {src} -> {dst}", number, 1)
        target[key] = weight

    net_name, net_class = name, None
    if header is not None:
        net_name, cls, number, column = header
        if cls is not None:
            try:
                net_class = NetClass(cls)
            except ValueError:
                raise ModelSyntaxError(f"unknown net class '{cls}'", number, column) from None
    if net_class is None:
        net_class = _infer_class(transitions)

    net = HybridNet(
        name=net_name,
        net_class=net_class,
        places=tuple(places),
        transitions=tuple(transitions),
        pre=pre,
        post=post,
        initial_marking=Marking((p.id, initial[p.id]) for p in places),
    )
    logger.debug(f"Parsed {net.name}: {len(net.places)} places, {len(net.transitions)} transitions, class {net_class.value}")
    return net


def _declare(declared, node_id, kind, number, column):
    if node_id in declared:
        raise ModelSyntaxError(f"'{node_id}' already declared on line {declared[node_id][1]}", number, column)
    declared[node_id] = (kind, number)


def _transition(match, raw, number):
    kind = Kind(match["kind"])
    timing = (match["timing"] or "").strip()
    column = _column(raw, match, "timing")
    if kind is Kind.CONTINUOUS:
        if not timing:
            return Transition(match["id"], kind)
        speed = SPEED.match(timing)
        if not speed:
            raise ModelSyntaxError("continuous transitions take 'speed=<rational>'", number, column)
        value = _rational(speed["value"], number, column, "speed")
        if value < 0:
            raise ModelSyntaxError(f"speed must be non-negative, got {speed['value']}", number, column)
        return Transition(match["id"], kind, max_speed=value)

    duration = DURATION.match(timing)
    if duration:
        value = _rational(duration["value"], number, column, "duration")
        if value < 0:
            raise ModelSyntaxError(f"duration must be non-negative, got {duration['value']}", number, column)
        return Transition(match["id"], kind, duration=value)
    interval = INTERVAL.match(timing)
    if interval:
        alpha = _rational(interval["alpha"], number, column, "interval bound")
        beta_text = interval["beta"]
        beta = INFINITY if beta_text in ("inf", "oo", "∞") else _rational(beta_text, number, column, "interval bound")
        if alpha < 0:
            raise ModelSyntaxError(f"malformed interval {timing}: negative alpha", number, column)
        if alpha > beta:
            raise ModelSyntaxError(f"malformed interval {timing}: alpha > beta", number, column)
        return Transition(match["id"], kind, firing_interval=Interval(alpha, beta))
    raise ModelSyntaxError("discrete transitions take 'duration=<rational>' or 'interval=[<alpha>,<beta>|inf]'", number, column)


def _infer_class(transitions):
    discrete = [t for t in transitions if t.kind is Kind.DISCRETE]
    if any(t.firing_interval is not None for t in discrete):
        return NetClass.D_ELEMENTARY
    if discrete:
        return NetClass.HYBRID_TIMED
    continuous = [t for t in transitions if t.kind is Kind.CONTINUOUS]
    if continuous and all(t.max_speed is None for t in continuous):
        return NetClass.AUTONOMOUS
    return NetClass.CCPN


def serialize_model(net):
    lines = [f"net {net.name} {net.net_class.value}"]
    for place in net.places:
        amount = net.initial_marking[place.id]
        lines.append(f"place {place.id} {place.kind.value} = {format_rational(amount)}")
    for transition in net.transitions:
        line = f"transition {transition.id} {transition.kind.value}"
        if transition.max_speed is not None:
            line += f" speed={format_rational(transition.max_speed)}"
        elif transition.duration is not None:
            line += f" duration={format_rational(transition.duration)}"
        elif transition.firing_interval is not None:
            line += f" interval={transition.firing_interval}"
        lines.append(line)
    for transition in net.transitions:
        for place in net.places:
            weight = net.pre.get((place.id, transition.id))
            if weight is not None:
                lines.append(_arc(place.id, transition.id, weight))
        for place in net.places:
            weight = net.post.get((place.id, transition.id))
            if weight is not None:
                lines.append(_arc(transition.id, place.id, weight))
    return "\n".join(lines) + "\n"


def _arc(src, dst, weight):
    suffix = "" if weight == 1 else f" weight={format_rational(weight)}"
    return f"arc {src} -> {dst}{suffix}"


def load_model(path):
    path = Path(path)
    return parse_model(path.read_text(), name=path.stem)
