"""Confusion metrics and the sparse-traceroute comparison pipeline.

The comparison treats the dense detector as the prediction and an
independent sparse prober (daily traceroutes with poor target hit rates) as
the reference.  Which (sites-up, reference category) cell counts as TP, FP,
FN or TN is table data, so the strict and loose readings are two rule sets
over one agreement table.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from ..core import STATE_UNMEASURED, STATE_UP, BlockId, ObservationTable
from ..detectors import K_ALL_DOWN, K_ALL_UP, K_DISAGREE, ClassifiedRounds, coalesce_runs, popcount


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)


@dataclass(frozen=True)
class Metrics:
    precision: float | None
    recall: float | None
    f1: float | None


def confusion_metrics(c: ConfusionCounts) -> Metrics:
    """Precision, recall, F1; None where a denominator is zero."""
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else None
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else None
    f = 2 * p * r / (p + r) if p is not None and r is not None and p + r > 0 else None
    return Metrics(p, r, f)


class ArkCategory(str, Enum):
    CONFLICTING = "conflicting"
    ALL_DOWN = "all_down"
    ALL_UP = "all_up"


class Outcome(str, Enum):
    TP = "tp"
    FP = "fp"
    FN = "fn"
    TN = "tn"


# Row classes: "none" = 0 sites up, "some" = 1..V-1, "most" = exactly V-1
# (a subset of "some", consulted first), "all" = V.
STRICT_RULES: dict[tuple[str, ArkCategory], Outcome | None] = {
    ("some", ArkCategory.CONFLICTING): Outcome.TP,
    ("some", ArkCategory.ALL_DOWN): Outcome.TP,
    ("some", ArkCategory.ALL_UP): Outcome.FP,
    ("none", ArkCategory.CONFLICTING): Outcome.FN,
    ("none", ArkCategory.ALL_DOWN): Outcome.TN,
    ("none", ArkCategory.ALL_UP): Outcome.FN,
    ("all", ArkCategory.CONFLICTING): Outcome.TN,
    ("all", ArkCategory.ALL_DOWN): Outcome.TN,
    ("all", ArkCategory.ALL_UP): Outcome.TN,
}
# Loose: one site down while the reference reached the block is blamed on
# that site's own path and not counted at all.
LOOSE_RULES: dict[tuple[str, ArkCategory], Outcome | None] = {**STRICT_RULES, ("most", ArkCategory.ALL_UP): None}


def apply_rules(rules: Mapping[tuple[str, ArkCategory], Outcome | None], sites_up: int, v: int, category: ArkCategory) -> Outcome | None:
    if sites_up == 0:
        row = "none"
    elif sites_up >= v:
        row = "all"
    else:
        if sites_up == v - 1 and ("most", category) in rules:
            return rules[("most", category)]
        row = "some"
    return rules[(row, category)]


def fold(table: Mapping[tuple[int, ArkCategory], int], v: int, rules: Mapping) -> ConfusionCounts:
    acc = Counter()
    for (sites, cat), n in table.items():
        out = apply_rules(rules, sites, v, cat)
        if out is not None:
            acc[out] += n
    return ConfusionCounts(acc[Outcome.TP], acc[Outcome.FP], acc[Outcome.FN], acc[Outcome.TN])


@dataclass(frozen=True)
class ArkThresholds:
    reliable_uptime: float = 0.85
    flaky_combos: int = 10
    long_event_s: int = 18000
    confirmations: int = 3
    # an all-down reference under a disagreement must be bracketed by reference successes
    require_up_around: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.reliable_uptime <= 1.0:
            raise ValueError("reliable_uptime must be within [0, 1]")
        if self.flaky_combos < 1 or self.long_event_s < 0 or self.confirmations < 1:
            raise ValueError("thresholds out of range")


@dataclass(frozen=True)
class ComparedEvent:
    block: BlockId
    start: int
    end: int
    sites_up: int
    category: ArkCategory
    strict: Outcome | None
    loose: Outcome | None


@dataclass
class ArkComparison:
    vps: int
    table: dict[tuple[int, ArkCategory], int]
    strict: ConfusionCounts
    loose: ConfusionCounts
    events: list[ComparedEvent]
    discarded: dict[str, int] = field(default_factory=dict)

    def row(self, sites_up: int) -> dict[ArkCategory, int]:
        return {c: self.table.get((sites_up, c), 0) for c in ArkCategory}


def reliable_blocks(classified: ClassifiedRounds, uptime: float) -> set[int]:
    """Blocks every VP saw up in at least ``uptime`` of the rounds the block was measured."""
    c = classified
    order = np.argsort(c.block, kind="stable")
    blk = c.block[order]
    starts = np.nonzero(np.r_[True, blk[1:] != blk[:-1]])[0] if len(blk) else np.zeros(0, int)
    total = np.diff(np.append(starts, len(blk)))
    ok = np.ones(len(starts), bool)
    for i in range(len(c.vps)):
        bit = np.uint64(1 << i)
        seen_up = ((c.up[order] & bit) != 0).astype(np.int64)
        ups = np.add.reduceat(seen_up, starts) if len(starts) else np.zeros(0, np.int64)
        ok &= ups >= uptime * total
    return set(blk[starts][ok].tolist())


def flaky_blocks(classified: ClassifiedRounds, max_combos: int) -> set[int]:
    """Blocks whose disagreement rounds show more than ``max_combos`` distinct up-sets."""
    c = classified
    m = c.kind == K_DISAGREE
    pairs = np.unique(np.stack([c.block[m].astype(np.uint64), c.up[m]], axis=1), axis=0)
    if len(pairs) == 0:
        return set()
    blocks, n = np.unique(pairs[:, 0], return_counts=True)
    return set(blocks[n > max_combos].astype(np.int64).tolist())


def ark_comparison(
    classified: ClassifiedRounds,
    ark: ObservationTable,
    thresholds: ArkThresholds = ArkThresholds(),
    exclude_blocks: Iterable[BlockId] = (),
) -> ArkComparison:
    """Build the (sites up, reference category) agreement table and fold it both ways.

    Units are maximal detector runs (all-up, all-down, or one disagreement
    up-set) on blocks that pass the filters and last at least
    ``long_event_s``.  Each needs ``confirmations`` reference observations in
    its span.
    """
    th = thresholds
    v = len(classified.vps)
    window = classified.binning.window
    ark_obs = ark.take(ark.state != STATE_UNMEASURED)
    shared = set(np.unique(classified.block).tolist()) & set(np.unique(ark_obs.block).tolist())
    shared -= {b.prefix24 for b in exclude_blocks}
    if not shared:
        raise ValueError("no blocks shared by the two sources")
    discarded: Counter = Counter()
    ever_up = set(np.unique(ark_obs.block[ark_obs.state == STATE_UP]).tolist())
    discarded["never_reached"] = len(shared - ever_up)
    keep = shared & ever_up
    rel = reliable_blocks(classified, th.reliable_uptime)
    discarded["unreliable"] = len(keep - rel)
    keep &= rel
    flaky = flaky_blocks(classified, th.flaky_combos)
    discarded["flaky"] = len(keep & flaky)
    keep -= flaky

    # reference observations grouped per block, time-sorted
    order = np.lexsort((ark_obs.time, ark_obs.block))
    a_blk, a_t, a_up = ark_obs.block[order], ark_obs.time[order], ark_obs.state[order] == STATE_UP
    a_lo = np.searchsorted(a_blk, np.array(sorted(keep)), "left")
    a_hi = np.searchsorted(a_blk, np.array(sorted(keep)), "right")
    span = {b: (int(lo), int(hi)) for b, lo, hi in zip(sorted(keep), a_lo, a_hi)}

    runs = coalesce_runs(classified)
    table: Counter = Counter()
    events: list[ComparedEvent] = []
    n_up = popcount(runs.up)
    for i in range(len(runs)):
        b = int(runs.block[i])
        if b not in span:
            continue
        start = classified.binning.round_start(int(runs.start_round[i]))
        end = classified.binning.round_start(int(runs.end_round[i]) + 1)
        if end - start < th.long_event_s:
            discarded["short"] += 1
            continue
        lo, hi = span[b]
        t, up = a_t[lo:hi], a_up[lo:hi]
        inside = (t >= start) & (t < end)
        k = int(inside.sum())
        if k < th.confirmations:
            discarded["unconfirmed"] += 1
            continue
        n_in = int(up[inside].sum())
        cat = ArkCategory.ALL_UP if n_in == k else ArkCategory.ALL_DOWN if n_in == 0 else ArkCategory.CONFLICTING
        kind = int(runs.kind[i])
        sites = v if kind == K_ALL_UP else 0 if kind == K_ALL_DOWN else int(n_up[i])
        if th.require_up_around and cat is ArkCategory.ALL_DOWN and 0 < sites < v:
            if not (up[t < start].any() and up[t >= end].any()):
                discarded["not_bracketed"] += 1
                continue
        table[(sites, cat)] += 1
        events.append(
            ComparedEvent(
                BlockId(b), start, end, sites, cat, apply_rules(STRICT_RULES, sites, v, cat), apply_rules(LOOSE_RULES, sites, v, cat)
            )
        )
    tbl = dict(sorted(table.items(), key=lambda kv: (kv[0][0], kv[0][1].value)))
    return ArkComparison(v, tbl, fold(tbl, v, STRICT_RULES), fold(tbl, v, LOOSE_RULES), events, dict(discarded))


def reference_agreement_counts() -> dict[tuple[int, ArkCategory], int]:
    """The published six-site agreement table, for checking the fold rules."""
    C, D, U = ArkCategory.CONFLICTING, ArkCategory.ALL_DOWN, ArkCategory.ALL_UP
    rows = {1: (20, 6, 15), 2: (13, 5, 11), 3: (13, 1, 5), 4: (26, 4, 19), 5: (83, 13, 201), 0: (6, 97, 6), 6: (491120, 90, 1485394)}
    return {(k, cat): n for k, vals in rows.items() for cat, n in zip((C, D, U), vals)}


@dataclass(frozen=True)
class IslandValidation:
    """Reference reachability while a VP is flagged as an island."""

    block_island: int = 0
    address_island: int = 0
    peninsula: int = 0


def island_validation(events: Iterable, reachable_share: Mapping[tuple[str, int], float]) -> IslandValidation:
    """Sort island events by how much the rest of the world could see of the VP.

    ``reachable_share[(vp, start_round)]`` is the share of other observers
    reaching the VP's block during the event.  Zero with an address-level
    event means an address island; zero otherwise a block island; anything
    else suggests a peninsula.
    """
    acc = Counter()
    for ev in events:
        share = reachable_share.get((ev.vp, ev.start_round))
        if share is None:
            continue
        if share > 0:
            acc["peninsula"] += 1
        elif ev.address_island:
            acc["address_island"] += 1
        else:
            acc["block_island"] += 1
    return IslandValidation(acc["block_island"], acc["address_island"], acc["peninsula"])
