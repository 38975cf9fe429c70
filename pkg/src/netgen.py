"""Seeded random nets for property checks and generated corpora.

Continuous transitions built here have at most one continuous input place and
arcs only run from lower to higher place indices, so proportional speed
sharing always settles.
"""

from fractions import Fraction

from .net import INFINITY, HybridNet, Interval, Kind, Marking, NetClass, Place, Transition
from .policy import FiringPolicy


def _fraction(rng, low, high):
    return Fraction(int(rng.integers(low, high + 1)))


class _Builder:
    def __init__(self, name, net_class):
        self.name = name
        self.net_class = net_class
        self.places = []
        self.transitions = []
        self.pre = {}
        self.post = {}
        self.marking = {}

    def place(self, place_id, kind, amount):
        self.places.append(Place(place_id, kind))
        self.marking[place_id] = amount

    def transition(self, transition, inputs=(), outputs=()):
        self.transitions.append(transition)
        for place, weight in inputs:
            self.pre[(place, transition.id)] = Fraction(weight)
        for place, weight in outputs:
            self.post[(place, transition.id)] = Fraction(weight)

    def build(self):
        return HybridNet(
            name=self.name,
            net_class=self.net_class,
            places=tuple(self.places),
            transitions=tuple(self.transitions),
            pre=self.pre,
            post=self.post,
            initial_marking=Marking((p.id, self.marking[p.id]) for p in self.places),
        )


def random_autonomous(rng, places=None, name="random-autonomous"):
    n = places or int(rng.integers(1, 11))
    builder = _Builder(name, NetClass.AUTONOMOUS)
    ids = [f"P{i}" for i in range(1, n + 1)]
    for place_id in ids:
        builder.place(place_id, Kind.CONTINUOUS, _fraction(rng, 0, 5))
    for j in range(1, int(rng.integers(1, n + 2)) + 1):
        inputs = rng.choice(ids, size=int(rng.integers(0, min(2, n) + 1)), replace=False)
        outputs = rng.choice(ids, size=int(rng.integers(0, min(2, n) + 1)), replace=False)
        builder.transition(
            Transition(f"T{j}", Kind.CONTINUOUS),
            [(str(p), 1) for p in inputs],
            [(str(p), 1) for p in outputs],
        )
    return builder.build()


def _tank_part(rng, builder, places):
    """Supply and drain transitions over a chain of tanks; returns the transition ids."""
    ids = [f"P{i}" for i in range(1, places + 1)]
    for place_id in ids:
        builder.place(place_id, Kind.CONTINUOUS, _fraction(rng, 0, 10))
    created = []
    for i, place_id in enumerate(ids):
        if i == 0 or rng.random() < 0.6:
            transition = Transition(f"S{i + 1}", Kind.CONTINUOUS, max_speed=_fraction(rng, 1, 3))
            builder.transition(transition, outputs=[(place_id, 1)])
            created.append(transition.id)
        for k in range(1 if rng.random() < 0.7 else 2):
            later = ids[i + 1:]
            outputs = [(str(rng.choice(later)), 1)] if later and rng.random() < 0.6 else []
            transition = Transition(f"D{i + 1}{'ab'[k]}", Kind.CONTINUOUS, max_speed=_fraction(rng, 1, 3))
            builder.transition(transition, inputs=[(place_id, 1)], outputs=outputs)
            created.append(transition.id)
    return created


def random_ccpn(rng, max_places=4, name="random-ccpn"):
    builder = _Builder(name, NetClass.CCPN)
    _tank_part(rng, builder, int(rng.integers(1, max_places + 1)))
    return builder.build()


def _discrete_cycles(rng, builder, gated, timing):
    """Two-place valve cycles; a cycle may get a second stop or start competing for its token."""
    cycles = int(rng.integers(1, 4))
    for c in range(1, cycles + 1):
        on, off = f"On{c}", f"Off{c}"
        builder.place(on, Kind.DISCRETE, 1)
        builder.place(off, Kind.DISCRETE, 0)
        builder.transition(timing(f"stop{c}"), [(on, 1)], [(off, 1)])
        if rng.random() < 0.4:
            builder.transition(timing(f"halt{c}"), [(on, 1)], [(off, 1)])
        builder.transition(timing(f"start{c}"), [(off, 1)], [(on, 1)])
        if rng.random() < 0.4:
            builder.transition(timing(f"restart{c}"), [(off, 1)], [(on, 1)])
    for transition_id in gated:
        if rng.random() < 0.5:
            on = f"On{int(rng.integers(1, cycles + 1))}"
            builder.pre[(on, transition_id)] = Fraction(1)
            builder.post[(on, transition_id)] = Fraction(1)


def random_delementary(rng, name="random-delementary"):
    """Up to three tanks gated by up to three valve cycles, some with conflicting transitions."""
    builder = _Builder(name, NetClass.D_ELEMENTARY)
    gated = _tank_part(rng, builder, int(rng.integers(1, 4)))

    def timing(transition_id):
        alpha = _fraction(rng, 1, 5)
        beta = INFINITY if rng.random() < 0.3 else alpha + int(rng.integers(0, 4))
        return Transition(transition_id, Kind.DISCRETE, firing_interval=Interval(alpha, beta))

    _discrete_cycles(rng, builder, gated, timing)
    return builder.build()


def _batches(rng, builder, timing):
    """Discrete transitions taking a batch out of a tank, enabled by a threshold on its level.

    A batch either counts on a discrete place or is poured into a later tank.
    """
    tanks = [p.id for p in builder.places if p.continuous]
    for i, place_id in enumerate(tanks):
        if rng.random() < 0.5:
            continue
        weight = _fraction(rng, 1, 5)
        later = tanks[i + 1:]
        if later and rng.random() < 0.5:
            outputs = [(str(rng.choice(later)), weight)]
        else:
            counter = f"Batches{i + 1}"
            builder.place(counter, Kind.DISCRETE, 0)
            outputs = [(counter, 1)]
        builder.transition(timing(f"B{i + 1}"), [(place_id, weight)], outputs)


def random_hybrid_timed(rng, name="random-hybrid", thresholds=False):
    """Tanks and valve cycles with fixed durations; `thresholds` adds batch transitions on tank levels."""
    builder = _Builder(name, NetClass.HYBRID_TIMED)
    gated = _tank_part(rng, builder, int(rng.integers(1, 4)))

    def timing(transition_id):
        return Transition(transition_id, Kind.DISCRETE, duration=_fraction(rng, 1, 5))

    _discrete_cycles(rng, builder, gated, timing)
    if thresholds:
        _batches(rng, builder, timing)
    return builder.build()


def script_from_log(log):
    """Scripted policy replaying the discrete firings of a logged run."""
    return FiringPolicy.scripted((event.subject, event.time) for event in log.firings())
