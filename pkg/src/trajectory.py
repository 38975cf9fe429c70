from bisect import bisect_right
from dataclasses import dataclass, field

from .net import Marking


@dataclass
class Trajectory:
    """Piecewise-linear marking trajectory given by its breakpoints."""

    places: tuple
    points: list = field(default_factory=list)

    def record(self, time, marking):
        """Append a breakpoint; a repeated time keeps both sides of a jump."""
        marking = marking.restricted(self.places)
        if self.points and self.points[-1] == (time, marking):
            return
        self.points.append((time, marking))

    @property
    def times(self):
        return [time for time, _ in self.points]

    @property
    def end(self):
        return self.points[-1][0]

    def at(self, time):
        """Marking at `time`, interpolated linearly between the surrounding breakpoints."""
        times = self.times
        if not times or time < times[0] or time > times[-1]:
            raise ValueError(f"time {time} outside the trajectory span")
        index = bisect_right(times, time) - 1
        start, before = self.points[index]
        if start == time or index + 1 == len(self.points):
            return before
        stop, after = self.points[index + 1]
        ratio = (time - start) / (stop - start)
        return Marking((p, before[p] + (after[p] - before[p]) * ratio) for p in self.places)
