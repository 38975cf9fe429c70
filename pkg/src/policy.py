import logging
from collections import defaultdict, deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np

from .net import INFINITY, format_rational

logger = logging.getLogger(__name__)

RANDOM_DENOMINATOR = 10**6


class ScriptViolation(ValueError):
    pass


class PolicyKind(Enum):
    EARLIEST = "earliest"
    LATEST = "latest"
    RANDOM = "random"
    SCRIPTED = "script"


@dataclass(frozen=True)
class FiringPolicy:
    """How a firing instant is picked inside an enabled transition's window."""

    kind: PolicyKind
    seed: int = None
    script: tuple = ()

    @classmethod
    def earliest(cls):
        return cls(PolicyKind.EARLIEST)

    @classmethod
    def latest(cls):
        return cls(PolicyKind.LATEST)

    @classmethod
    def uniform_random(cls, seed):
        if seed is None:
            raise ValueError("the random policy needs a seed")
        return cls(PolicyKind.RANDOM, seed=int(seed))

    @classmethod
    def scripted(cls, entries):
        return cls(PolicyKind.SCRIPTED, script=tuple((tid, Fraction(time)) for tid, time in entries))

    @classmethod
    def parse(cls, spec, seed=None):
        """Build a policy from the command-line form earliest|latest|random|script=<file>."""
        name, _, argument = spec.partition("=")
        if name == "earliest":
            return cls.earliest()
        if name == "latest":
            return cls.latest()
        if name == "random":
            return cls.uniform_random(seed)
        if name == "script" and argument:
            return cls.scripted(load_script(argument))
        raise ValueError(f"unknown policy '{spec}'")

    @property
    def label(self):
        if self.kind is PolicyKind.RANDOM:
            return f"random{self.seed}"
        return self.kind.value

    def scheduler(self, horizon=INFINITY):
        return FiringScheduler(self, horizon)


class FiringScheduler:
    """Per-run policy state: the seeded generator and the script cursors.

    A scripted transition is scheduled at its next entry; the entry is only
    consumed when the engine reports the firing through `fired`.
    """

    def __init__(self, policy, horizon=INFINITY):
        self.policy = policy
        self.horizon = horizon
        self.rng = np.random.default_rng(policy.seed) if policy.kind is PolicyKind.RANDOM else None
        self.pending = defaultdict(deque)
        for transition_id, time in policy.script:
            self.pending[transition_id].append(time)
        self.exhausted = set()

    def select_firing_time(self, transition_id, interval, enabled_since):
        earliest = enabled_since + interval.alpha
        latest = enabled_since + interval.beta if interval.bounded else INFINITY
        kind = self.policy.kind
        if kind is PolicyKind.EARLIEST:
            return earliest
        if kind is PolicyKind.LATEST:
            return latest
        if kind is PolicyKind.RANDOM:
            return self._draw(earliest, latest)

        queue = self.pending[transition_id]
        if not queue:
            if transition_id not in self.exhausted:
                self.exhausted.add(transition_id)
                logger.warning(f"Script has no more firings for {transition_id}; falling back to latest")
            return latest
        time = queue[0]
        if time < earliest:
            raise ScriptViolation(
                f"scripted firing of {transition_id} at {format_rational(time)} is outside "
                f"[{format_rational(earliest)}, {format_rational(latest)}] (enabled at {format_rational(enabled_since)})"
            )
        if time > latest:
            # a conflicting firing has to disable the transition before its window closes
            return latest
        return time

    def fired(self, transition_id, time):
        """Consume the script entry of a firing; entries of enablings that never fired stay queued."""
        if self.policy.kind is not PolicyKind.SCRIPTED:
            return
        queue = self.pending[transition_id]
        if not queue:
            return
        if queue[0] != time:
            raise ScriptViolation(
                f"{transition_id} fires at {format_rational(time)} but its next scripted firing is at "
                f"{format_rational(queue[0])}"
            )
        queue.popleft()

    def _draw(self, earliest, latest):
        upper = min(latest, self.horizon)
        if upper == INFINITY:
            raise ValueError("the random policy needs a finite horizon for unbounded intervals")
        if earliest >= upper:
            return earliest
        ratio = Fraction(float(self.rng.random())).limit_denominator(RANDOM_DENOMINATOR)
        return earliest + ratio * (Fraction(upper) - earliest)


def load_script(path):
    """Read '<transition> <absolute time>' lines; blank lines and # comments are skipped."""
    entries = []
    for number, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{number}: expected '<transition> <time>'")
        try:
            entries.append((parts[0], Fraction(parts[1])))
        except ValueError:
            raise ValueError(f"{path}:{number}: '{parts[1]}' is not a rational time") from None
    return entries
