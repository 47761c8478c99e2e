"""Event-count and time-weighted duration CDFs."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from itertools import groupby
from typing import Iterable


@dataclass(frozen=True)
class DurationCDFs:
    count: tuple[tuple[float, float], ...]
    time_weighted: tuple[tuple[float, float], ...]

    @staticmethod
    def _at(points: tuple[tuple[float, float], ...], x: float) -> float:
        i = bisect.bisect_right([p[0] for p in points], x)
        return points[i - 1][1] if i else 0.0

    def count_at(self, x: float) -> float:
        return self._at(self.count, x)

    def time_at(self, x: float) -> float:
        return self._at(self.time_weighted, x)


def duration_distributions(durations: Iterable[float]) -> DurationCDFs:
    """Step CDFs at each distinct duration: fraction of events, fraction of event-time."""
    ds = sorted(float(d) for d in durations)
    if not ds:
        raise ValueError("no events")
    if ds[0] <= 0:
        raise ValueError("durations must be positive")
    n, total = len(ds), sum(ds)
    count, weighted = [], []
    seen = mass = 0.0
    for d, grp in groupby(ds):
        k = len(list(grp))
        seen += k
        mass += k * d
        count.append((d, seen / n))
        weighted.append((d, mass / total))
    count[-1] = (count[-1][0], 1.0)
    weighted[-1] = (weighted[-1][0], 1.0)
    return DurationCDFs(tuple(count), tuple(weighted))
