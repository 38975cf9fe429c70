import argparse
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .automaton import export_ha, load_ha
from .batch import run_batch
from .ccpn import NonConvergence, evolution_graph, macro_reachability_graph, simulate_ccpn
from .config import Config
from .export import (
    events_csv,
    evolution_dot,
    evolution_json,
    macro_graph_dot,
    macro_graph_json,
    trajectory_csv,
    write_outputs,
)
from .ha_sim import simulate_ha
from .hybrid import FiringUnderflow, ZenoSuspect, simulate_hybrid
from .net import INFINITY, NetClass, format_rational, validate_structure
from .parser import ModelSyntaxError, load_model
from .policy import FiringPolicy, ScriptViolation
from .translate import MarkingCapExceeded, export_hierarchy, translate
from .vcpn import StepUnderflow, simulate_vcpn

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

FORMATS = ("csv", "dot", "structured")
ENGINES = ("ccpn", "vcpn", "hybrid")
SEMANTIC_ERRORS = (
    NonConvergence,
    StepUnderflow,
    ZenoSuspect,
    FiringUnderflow,
    MarkingCapExceeded,
    ScriptViolation,
)


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: Path
    command: str
    horizon: Fraction = None
    policy: str = None
    seed: int = None
    rel_tol: float = 1e-9
    event_tol: float = 1e-9
    out: Path = Path("runs")
    formats: tuple = FORMATS
    cap: int = 10_000
    max_events: int = 1_000_000
    engine: str = None
    analysis: str = None
    ha: Path = None
    hierarchy: bool = False

    def __post_init__(self):
        if self.horizon is not None and not self.horizon > 0:
            raise UsageError(f"horizon must be positive, got {self.horizon}")
        is_random = (self.policy or "").partition("=")[0] == "random"
        if is_random and self.seed is None:
            raise UsageError("--policy random needs --seed")
        if self.seed is not None and not is_random:
            raise UsageError("--seed only applies to --policy random")

    def firing_policy(self):
        return FiringPolicy.parse(self.policy or "earliest", self.seed)

    def run_dir(self):
        label = self.firing_policy().label if self.policy else "default"
        return self.out / f"{self.model.stem}-{self.command}-{label}"

    def require_horizon(self):
        if self.horizon is None:
            raise UsageError(f"{self.command} needs --horizon")
        return self.horizon


@dataclass
class CommandResult:
    exit_code: int
    lines: list = field(default_factory=list)


def _rational(text):
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"'{text}' is not a rational number") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _formats(text):
    formats = tuple(part.strip() for part in text.split(",") if part.strip())
    unknown = [f for f in formats if f not in FORMATS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown format(s): {', '.join(unknown)}")
    return formats


class Cli:
    def __init__(self, config=None):
        self.config = config or Config()

    def build_parser(self):
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("models", nargs="+", type=Path, help="model files")
        common.add_argument("--out", type=Path, default=self.config.OUTPUT_DIR, help="output directory")
        common.add_argument("--format", type=_formats, default=FORMATS, dest="formats",
                            help="comma-separated subset of csv,dot,structured")
        common.add_argument("--jobs", type=int, default=self.config.JOBS, help="models processed in parallel")

        timed = argparse.ArgumentParser(add_help=False)
        timed.add_argument("--horizon", type=_rational, help="simulation horizon (rational)")
        timed.add_argument("--policy", help="earliest|latest|random|script=<file>")
        timed.add_argument("--seed", type=int, help="seed for --policy random")

        parser = argparse.ArgumentParser(prog="hybrid-pn", description="Hybrid Petri net toolkit")
        commands = parser.add_subparsers(dest="command", required=True)
        commands.add_parser("validate", parents=[common], help="check structural rules")

        simulate = commands.add_parser("simulate", parents=[common, timed], help="simulate a net")
        simulate.add_argument("--engine", choices=ENGINES, help="engine (defaults from the net class)")
        simulate.add_argument("--rel-tol", type=float, default=self.config.REL_TOL)
        simulate.add_argument("--event-tol", type=float, default=self.config.EVENT_TOL)

        analyze = commands.add_parser("analyze", parents=[common], help="macro-marking or evolution graph")
        which = analyze.add_mutually_exclusive_group(required=True)
        which.add_argument("--macro-graph", action="store_const", const="macro-graph", dest="analysis")
        which.add_argument("--evolution-graph", action="store_const", const="evolution-graph", dest="analysis")
        analyze.add_argument("--horizon", type=_rational, help="truncate the evolution graph")

        translate_cmd = commands.add_parser("translate", parents=[common], help="translate to a hybrid automaton")
        translate_cmd.add_argument("--cap", type=int, default=self.config.MARKING_CAP, help="discrete marking cap")
        translate_cmd.add_argument("--hierarchy", action="store_true", help="also dump the macro-locations")

        check = commands.add_parser("check-equivalence", parents=[common, timed],
                                    help="compare the net and its automaton")
        check.add_argument("--cap", type=int, default=self.config.MARKING_CAP, help="discrete marking cap")
        check.add_argument("--ha", type=Path, help="structured automaton file to use instead of translating")
        return parser

    def run_configs(self, args):
        return [
            RunConfig(
                model=model,
                command=args.command,
                horizon=getattr(args, "horizon", None),
                policy=getattr(args, "policy", None),
                seed=getattr(args, "seed", None),
                rel_tol=getattr(args, "rel_tol", self.config.REL_TOL),
                event_tol=getattr(args, "event_tol", self.config.EVENT_TOL),
                out=args.out,
                formats=args.formats,
                cap=getattr(args, "cap", self.config.MARKING_CAP),
                max_events=self.config.MAX_EVENTS,
                engine=getattr(args, "engine", None),
                analysis=getattr(args, "analysis", None),
                ha=getattr(args, "ha", None),
                hierarchy=getattr(args, "hierarchy", False),
            )
            for model in args.models
        ]

    def run(self, argv=None):
        logging.basicConfig(level=self.config.LOG_LEVEL)
        try:
            args = self.build_parser().parse_args(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_USAGE
        try:
            configs = self.run_configs(args)
        except UsageError as e:
            logger.error(str(e))
            print(f"Error: {e}")
            return EXIT_USAGE
        if args.jobs < 1:
            print("Error: --jobs must be at least 1")
            return EXIT_USAGE

        if len(configs) > 1 and args.jobs > 1:
            results = run_batch(self.execute, configs, args.jobs)
        else:
            results = [self.execute(c) for c in configs]
        for result in results:
            for line in result.lines:
                print(line)
        return max(result.exit_code for result in results)

    def execute(self, run_config):
        """Run one command on one model and collect its printed lines."""
        handler = {
            "validate": self.cmd_validate,
            "simulate": self.cmd_simulate,
            "analyze": self.cmd_analyze,
            "translate": self.cmd_translate,
            "check-equivalence": self.cmd_check_equivalence,
        }[run_config.command]
        prefix = f"{run_config.model.name}: "
        try:
            net = load_model(run_config.model)
            result = handler(net, run_config)
        except (OSError, ModelSyntaxError, UsageError) as e:
            logger.error(f"{run_config.command} {run_config.model} failed: {e}")
            return CommandResult(EXIT_USAGE, [f"{prefix}error: {e}"])
        except SEMANTIC_ERRORS as e:
            logger.error(f"{run_config.command} {run_config.model} failed: {e}")
            return CommandResult(EXIT_FAILURE, [f"{prefix}error: {e}"])
        except ValueError as e:
            logger.error(f"{run_config.command} {run_config.model} failed: {e}")
            return CommandResult(EXIT_USAGE, [f"{prefix}error: {e}"])
        result.lines = [prefix + line for line in result.lines]
        return result

    def _policy(self, run_config):
        try:
            return run_config.firing_policy()
        except ValueError as e:
            raise UsageError(str(e)) from None

    def _check_valid(self, net):
        report = validate_structure(net)
        return None if report.ok else CommandResult(EXIT_FAILURE, [str(v) for v in report])

    def cmd_validate(self, net, run_config):
        report = validate_structure(net)
        if report.ok:
            return CommandResult(EXIT_OK, [f"valid {net.net_class.value} net"])
        return CommandResult(EXIT_FAILURE, [str(violation) for violation in report])

    def cmd_simulate(self, net, run_config):
        horizon = run_config.require_horizon()
        policy = self._policy(run_config)
        engine = run_config.engine or _default_engine(net)
        expected = {
            "ccpn": (NetClass.CCPN,),
            "vcpn": (NetClass.VCPN,),
            "hybrid": (NetClass.HYBRID_TIMED, NetClass.D_ELEMENTARY),
        }[engine]
        if net.net_class not in expected:
            return CommandResult(EXIT_FAILURE, [f"engine {engine} cannot run a {net.net_class.value} net"])
        invalid = self._check_valid(net)
        if invalid:
            return invalid

        files = {}
        if engine == "ccpn":
            trajectory = simulate_ccpn(net, horizon)
            files["trajectory.csv"] = trajectory_csv(trajectory)
            summary = f"{len(trajectory.points)} breakpoints up to t={format_rational(horizon)}"
        elif engine == "vcpn":
            trajectory, events = simulate_vcpn(net, horizon, run_config.rel_tol, run_config.event_tol)
            files["trajectory.csv"] = trajectory_csv(trajectory, events)
            summary = f"{len(trajectory.points)} points, {len(events)} region event(s)"
        else:
            trajectory, log = simulate_hybrid(net, horizon, policy, run_config.max_events)
            files["trajectory.csv"] = trajectory_csv(trajectory)
            files["events.csv"] = events_csv(log, trajectory.places)
            summary = f"{len(log.firings())} discrete firing(s), {len(log)} event(s)"
        if "csv" in run_config.formats:
            write_outputs(run_config.run_dir(), files)
        return CommandResult(EXIT_OK, [summary])

    def cmd_analyze(self, net, run_config):
        files = {}
        if run_config.analysis == "macro-graph":
            if not net.net_class.is_continuous:
                return CommandResult(EXIT_FAILURE, [f"macro-marking graph needs a continuous net, not {net.net_class.value}"])
            graph = macro_reachability_graph(net)
            files["macro_graph.dot"] = macro_graph_dot(graph, net.name)
            files["macro_graph.json"] = macro_graph_json(graph)
            summary = f"{len(graph.nodes)} nodes, {len(graph.edges)} edges"
        else:
            if net.net_class is not NetClass.CCPN:
                return CommandResult(EXIT_FAILURE, [f"evolution graph needs a ccpn net, not {net.net_class.value}"])
            graph = evolution_graph(net, run_config.horizon or INFINITY)
            files["evolution.dot"] = evolution_dot(graph, net.name)
            files["evolution.json"] = evolution_json(graph)
            summary = f"{len(graph.phases)} phases, {graph.terminal.value}"
        write_outputs(run_config.run_dir(), _select(files, run_config.formats))
        return CommandResult(EXIT_OK, [summary])

    def cmd_translate(self, net, run_config):
        if net.net_class not in (NetClass.D_ELEMENTARY, NetClass.CCPN):
            return CommandResult(EXIT_FAILURE, [f"translation needs a delementary net, not {net.net_class.value}"])
        invalid = self._check_valid(net)
        if invalid:
            return invalid
        lines = []
        if not net.discrete_places and not net.discrete_transitions:
            lines.append("warning: no discrete part, translating the continuous part alone")
        ha = translate(net, run_config.cap)
        files = {
            "automaton.json": export_ha(ha, "structured"),
            "automaton.dot": export_ha(ha, "dot"),
        }
        if run_config.hierarchy and net.discrete_transitions:
            files["hierarchy.json"] = export_hierarchy(net, run_config.cap)
        write_outputs(run_config.run_dir(), _select(files, run_config.formats))
        n = len({location.marking for location in ha.locations.values()}) if ha.clocks else 1
        m = len(net.continuous_places)
        lines.append(f"n={n} m={m} locations={len(ha.locations)} bound {n * 2 ** m}")
        return CommandResult(EXIT_OK, lines)

    def cmd_check_equivalence(self, net, run_config):
        horizon = run_config.require_horizon()
        policy = self._policy(run_config)
        if net.net_class is not NetClass.D_ELEMENTARY:
            return CommandResult(EXIT_FAILURE, [f"equivalence check needs a delementary net, not {net.net_class.value}"])
        ha = load_ha(run_config.ha.read_text()) if run_config.ha else translate(net, run_config.cap)
        _, expected = simulate_hybrid(net, horizon, policy, run_config.max_events)
        _, got = simulate_ha(ha, horizon, policy, run_config.max_events)
        divergence = expected.first_divergence(got)
        if divergence is None:
            return CommandResult(EXIT_OK, [f"equivalent: {len(expected)} events"])
        index, mine, theirs = divergence
        time = (mine or theirs).time
        return CommandResult(EXIT_FAILURE, [
            f"divergence at event {index}, t={format_rational(time)}",
            f"  expected: {mine} {mine.marking if mine else ''}",
            f"  got:      {theirs} {theirs.marking if theirs else ''}",
        ])


def _default_engine(net):
    if net.net_class is NetClass.VCPN:
        return "vcpn"
    if net.net_class.is_hybrid:
        return "hybrid"
    return "ccpn"


def _select(files, formats):
    suffixes = {"dot": ".dot", "structured": ".json", "csv": ".csv"}
    wanted = {suffixes[f] for f in formats}
    return {name: text for name, text in files.items() if Path(name).suffix in wanted}
