"""One-sample t-test with embedded critical values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from statistics import fmean, stdev
from typing import Mapping, Sequence

from . import _tcrit


@dataclass(frozen=True)
class TTest:
    t: float
    df: int
    critical: float
    reject: bool


def t_critical(df: int, confidence: float) -> float:
    """One-sided critical value; normal approximation beyond df 200."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if confidence not in _tcrit.TABLE:
        raise ValueError(f"confidence must be one of {_tcrit.CONFIDENCES}")
    if df > 200:
        return _tcrit.NORMAL[confidence]
    return _tcrit.TABLE[confidence][df - 1]


def one_sample_ttest(samples: Sequence[float], mu0: float = 0.0, confidence: float = 0.9975) -> TTest:
    """Reject when the mean exceeds ``mu0`` at the given one-sided confidence.

    A sample that sits exactly on ``mu0`` with no spread gives t = 0; any
    other zero-variance sample has no defined statistic and raises.
    """
    n = len(samples)
    if n < 2:
        raise ValueError("need at least two samples")
    mean = fmean(samples)
    s = stdev(samples)
    crit = t_critical(n - 1, confidence)
    if s == 0:
        if mean == mu0:
            return TTest(0.0, n - 1, crit, False)
        raise ValueError("zero sample variance")
    t = (mean - mu0) / (s / math.sqrt(n))
    return TTest(t, n - 1, crit, t > crit)


def complementary_pairs(vps: Sequence[str], size: int | None = None) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Split the VP set into two disjoint halves every possible way, each split once."""
    size = size or len(vps) // 2
    if 2 * size != len(vps):
        raise ValueError("complementary pairs need an even split")
    ordered = sorted(vps)
    out = []
    for left in combinations(ordered, size):
        right = tuple(v for v in ordered if v not in left)
        if left < right:
            out.append((left, right))
    return out


def complementary_pair_ttests(
    series: Mapping[tuple[str, ...], Sequence[float]],
    pairs: Sequence[tuple[tuple[str, ...], tuple[str, ...]]],
    confidence: float = 0.9975,
) -> dict[tuple[tuple[str, ...], tuple[str, ...]], TTest]:
    """Paired test per split: are the per-period differences centred on zero?

    ``series`` maps a VP subset to its per-period value (one per quarter).
    """
    out = {}
    for left, right in pairs:
        a, b = series[left], series[right]
        if len(a) != len(b):
            raise ValueError("paired series must have equal length")
        out[(left, right)] = one_sample_ttest([x - y for x, y in zip(a, b)], 0.0, confidence)
    return out
