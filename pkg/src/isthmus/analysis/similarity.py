"""Pairwise site similarity conditioned on disagreement with the rest."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..detectors import ClassifiedRounds


@dataclass(frozen=True)
class PairCounts:
    p1: int = 0
    p0: int = 0
    d_star: int = 0

    @property
    def score(self) -> float | None:
        den = self.p1 + self.p0 + self.d_star
        return (self.p1 + self.p0) / den if den else None


@dataclass(frozen=True)
class SimilarityMatrix:
    vps: tuple[str, ...]
    counts: dict[frozenset[str], PairCounts]

    def s(self, a: str, b: str) -> float | None:
        return self.counts[frozenset((a, b))].score


def similarity_matrix(classified: ClassifiedRounds) -> SimilarityMatrix:
    """P1/P0: the pair agrees up/down while at least one other observer differs.
    D*: the pair disagrees.  Rounds where either VP did not observe are skipped.
    """
    vps = classified.vps
    if len(vps) < 3:
        raise ValueError("similarity needs at least three VPs")
    combos, freq = np.unique(np.stack([classified.up, classified.observed], axis=1), axis=0, return_counts=True)
    acc = {pair: [0, 0, 0] for pair in combinations(range(len(vps)), 2)}
    for (up, obs), n in zip(combos.tolist(), freq.tolist()):
        for (i, j), c in acc.items():
            if not (obs >> i & 1 and obs >> j & 1):
                continue
            ui, uj = up >> i & 1, up >> j & 1
            if ui != uj:
                c[2] += n
                continue
            others = obs & ~((1 << i) | (1 << j))
            if ui and (others & ~up):
                c[0] += n
            elif not ui and (others & up):
                c[1] += n
    return SimilarityMatrix(vps, {frozenset((vps[i], vps[j])): PairCounts(*c) for (i, j), c in acc.items()})
