"""Block-time fractions and their convergence over VP subsets."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from statistics import fmean

import numpy as np

from ..detectors import K_ALL_DOWN, K_ALL_UP, K_DISAGREE, ClassifiedRounds, coalesce_runs


class NoMeasurements(ValueError):
    pass


@dataclass(frozen=True)
class BlockTimeFractions:
    all_up: float
    all_down: float
    disagreement: float
    measured: int

    def __post_init__(self) -> None:
        for v in (self.all_up, self.all_down, self.disagreement):
            if not 0.0 <= v <= 1.0:
                raise ValueError("fractions must lie in [0, 1]")
        if abs(self.all_up + self.all_down + self.disagreement - 1.0) > 1e-9:
            raise ValueError("fractions must sum to one")


def blocktime_fractions(classified: ClassifiedRounds, min_event_rounds: int = 1) -> BlockTimeFractions:
    """Share of measured (block, round) cells that are all-up, all-down or disagreeing.

    With ``min_event_rounds`` > 1, all-down and disagreement runs shorter than
    that are left out of both numerator and denominator, so short blips
    neither count as events nor inflate the all-up share.
    """
    if min_event_rounds < 1:
        raise ValueError("min_event_rounds must be >= 1")
    kind = classified.kind
    if min_event_rounds == 1:
        counts = np.bincount(kind, minlength=4)
    else:
        runs = coalesce_runs(classified)
        length = runs.rounds
        keep = (runs.kind == K_ALL_UP) | (length >= min_event_rounds)
        counts = np.bincount(runs.kind[keep], weights=length[keep], minlength=4).astype(np.int64)
    measured = int(counts[K_ALL_UP] + counts[K_ALL_DOWN] + counts[K_DISAGREE])
    if measured == 0:
        raise NoMeasurements("no measured rounds")
    up, down, dis = (float(counts[k]) / measured for k in (K_ALL_UP, K_ALL_DOWN, K_DISAGREE))
    return BlockTimeFractions(up, down, dis, measured)


@dataclass(frozen=True)
class SubsetFractions:
    vps: tuple[str, ...]
    fractions: BlockTimeFractions


def subset_convergence(classified: ClassifiedRounds, k: int, min_event_rounds: int = 1) -> list[SubsetFractions]:
    """Fractions for every k-subset of the VPs, each judged on its own observations."""
    v = len(classified.vps)
    if k > v:
        raise ValueError(f"k={k} exceeds the {v} available VPs")
    if k < 1:
        raise ValueError("k must be positive")
    out = []
    for combo in combinations(range(v), k):
        mask = sum(1 << i for i in combo)
        sub = classified.restrict(mask)
        try:
            f = blocktime_fractions(sub, min_event_rounds)
        except NoMeasurements:
            continue
        out.append(SubsetFractions(tuple(classified.vps[i] for i in combo), f))
    return out


@dataclass(frozen=True)
class ConvergencePoint:
    k: int
    subsets: int
    mean_all_up: float
    mean_all_down: float
    mean_disagreement: float
    min_disagreement: float
    max_disagreement: float


def convergence_curve(classified: ClassifiedRounds, k_min: int = 2, min_event_rounds: int = 1) -> list[ConvergencePoint]:
    """Mean fractions per subset size, k = k_min .. V."""
    curve = []
    for k in range(k_min, len(classified.vps) + 1):
        subs = subset_convergence(classified, k, min_event_rounds)
        if not subs:
            continue
        dis = [s.fractions.disagreement for s in subs]
        curve.append(
            ConvergencePoint(
                k,
                len(subs),
                fmean(s.fractions.all_up for s in subs),
                fmean(s.fractions.all_down for s in subs),
                fmean(dis),
                min(dis),
                max(dis),
            )
        )
    return curve


def disagreement_counts(classified: ClassifiedRounds, k: int) -> list[int]:
    """Number of disagreement cells per k-subset; monotone in the subset regardless of coverage."""
    out = []
    for combo in combinations(range(len(classified.vps)), k):
        sub = classified.restrict(sum(1 << i for i in combo))
        out.append(int(np.count_nonzero(sub.kind == K_DISAGREE)))
    return out
