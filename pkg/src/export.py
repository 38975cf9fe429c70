import csv
import io
import json
import logging
from fractions import Fraction
from pathlib import Path

from .net import INFINITY, format_rational

logger = logging.getLogger(__name__)


def format_decimal(value):
    """Shortest round-trip decimal; whole numbers print without a fractional part."""
    if value == INFINITY:
        return "inf"
    if isinstance(value, (int, Fraction)) and Fraction(value).denominator == 1:
        return str(int(value))
    number = float(value)
    if number.is_integer():
        return str(int(number))
    return repr(number)


def _writer(buffer):
    return csv.writer(buffer, lineterminator="\n")


def trajectory_csv(trajectory, events=()):
    buffer = io.StringIO()
    writer = _writer(buffer)
    writer.writerow(["time", *trajectory.places])
    for time, marking in trajectory.points:
        writer.writerow([format_decimal(time), *(format_decimal(marking[p]) for p in trajectory.places)])
    for event in events:
        buffer.write(f"# event,{format_decimal(event.time)},{event.description}\n")
    return buffer.getvalue()


def events_csv(log, places):
    buffer = io.StringIO()
    writer = _writer(buffer)
    writer.writerow(["time", "kind", "detail", *places])
    for event in log:
        detail = f"{event.subject} {event.detail}".strip()
        writer.writerow([
            format_decimal(event.time),
            event.kind.value,
            detail,
            *(format_decimal(event.marking[p]) for p in places),
        ])
    return buffer.getvalue()


def _vector(values):
    return {key: format_rational(value) for key, value in values.items()}


def evolution_document(graph):
    return {
        "terminal": graph.terminal.value,
        "phases": [
            {
                "macro": str(phase.macro),
                "speeds": _vector(phase.speeds),
                "derivative": _vector(phase.derivative),
                "start": format_rational(phase.start_time),
                "duration": format_rational(phase.duration),
                "event": list(phase.exit_event),
            }
            for phase in graph.phases
        ],
    }


def evolution_json(graph):
    return json.dumps(evolution_document(graph), indent=2) + "\n"


def _quote(text):
    return '"{}"'.format(text.replace('"', r'\"'))


def evolution_dot(graph, name="evolution"):
    lines = [f"digraph {_quote(name)} {{", "  rankdir=TB;"]
    for index, phase in enumerate(graph.phases):
        label = "\n".join([
            f"phase {index + 1}: t={format_rational(phase.start_time)}",
            "v=(" + ", ".join(format_rational(v) for v in phase.speeds.values()) + ")",
            *(f"dm{i}/dt={format_rational(rate)}" for i, rate in enumerate(phase.derivative.values(), start=1)),
        ])
        lines.append(f"  phase{index} [shape=box label={_quote(label)}];")
    for index, phase in enumerate(graph.phases[:-1]):
        event = ", ".join(f"m({p}) = 0" for p in phase.exit_event) or "switch"
        label = f"{event}\\nafter {format_rational(phase.duration)}"
        lines.append(f'  phase{index} -> phase{index + 1} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def macro_graph_document(graph):
    return {
        "initial": str(graph.initial),
        "nodes": [str(node) for node in graph.nodes],
        "edges": [{"src": str(a), "label": t, "dst": str(b)} for a, t, b in graph.edges],
    }


def macro_graph_json(graph):
    return json.dumps(macro_graph_document(graph), indent=2) + "\n"


def macro_graph_dot(graph, name="macro"):
    lines = [f"digraph {_quote(name)} {{"]
    for node in graph.nodes:
        shape = "doublecircle" if node == graph.initial else "circle"
        lines.append(f"  {_quote(str(node))} [shape={shape}];")
    for source, transition_id, target in graph.edges:
        lines.append(f"  {_quote(str(source))} -> {_quote(str(target))} [label={_quote(transition_id)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_outputs(directory, files):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in files.items():
        path = directory / name
        path.write_text(text)
        written.append(path)
        logger.debug(f"Wrote {path}")
    return written
