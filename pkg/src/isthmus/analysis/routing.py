"""Routing tables, longest-prefix match, prefix-level grouping and traceroute halts."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

from ..core import BlockId, Prefix, format_address


@dataclass(frozen=True, order=True)
class RoutedPrefix:
    prefix: Prefix
    asn: int


class RoutingTable:
    """Routed prefixes indexed by length; lookups probe the longest length first."""

    def __init__(self, entries: Iterable[RoutedPrefix] = ()) -> None:
        self._by_len: dict[int, dict[int, RoutedPrefix]] = defaultdict(dict)
        self._lengths: list[int] = []
        self.conflicts = 0
        for e in entries:
            self.add(e)

    def add(self, entry: RoutedPrefix) -> bool:
        """Insert; a repeated prefix keeps the first origin and counts a conflict."""
        slot = self._by_len[entry.prefix.length]
        existing = slot.get(entry.prefix.base)
        if existing is not None:
            if existing.asn != entry.asn:
                self.conflicts += 1
            return False
        slot[entry.prefix.base] = entry
        if entry.prefix.length not in self._lengths:
            self._lengths.append(entry.prefix.length)
            self._lengths.sort(reverse=True)
        return True

    def __len__(self) -> int:
        return sum(len(s) for s in self._by_len.values())

    def __iter__(self):
        for length in sorted(self._by_len):
            for base in sorted(self._by_len[length]):
                yield self._by_len[length][base]

    def lookup_address(self, address: int) -> RoutedPrefix | None:
        for length in self._lengths:
            mask = (0xFFFFFFFF << (32 - length)) & 0xFFFFFFFF
            hit = self._by_len[length].get(address & mask)
            if hit is not None:
                return hit
        return None

    def lookup(self, block: BlockId) -> RoutedPrefix | None:
        """Longest prefix covering the block's base address."""
        return self.lookup_address(block.base)


def lpm(table: RoutingTable, block: BlockId) -> RoutedPrefix | None:
    return table.lookup(block)


@dataclass(frozen=True)
class PrefixGroup:
    """Peninsula events sharing prefix, start hour, duration hour and up-set."""

    prefix: RoutedPrefix
    start_bin: int
    duration_bin: int
    up_set: frozenset[str]
    blocks: frozenset[BlockId]
    duration_s: int
    fraction: float


def group_by_prefix(
    events: Iterable,
    table: RoutingTable,
    measurable: Iterable[BlockId],
    round_seconds: int,
    epoch: int = 0,
    timebin: int = 3600,
    min_blocks: int = 2,
) -> list[PrefixGroup]:
    """Match block-level peninsulas within each routed prefix.

    Events are matched on start time and duration, both in ``timebin``
    bins, and on identical up-set.  Groups smaller than ``min_blocks`` are
    dropped; the fraction is peninsula blocks over measurable blocks of the
    prefix.
    """
    measurable_per_prefix: dict[RoutedPrefix, set[BlockId]] = defaultdict(set)
    for b in measurable:
        hit = table.lookup(b)
        if hit is not None:
            measurable_per_prefix[hit].add(b)
    buckets: dict[tuple, set[BlockId]] = defaultdict(set)
    durations: dict[tuple, int] = {}
    for ev in events:
        hit = table.lookup(ev.block)
        if hit is None:
            continue
        start = epoch + ev.start_round * round_seconds
        duration = ev.rounds * round_seconds
        key = (hit, (start - epoch) // timebin, duration // timebin, ev.up_set)
        buckets[key].add(ev.block)
        durations[key] = max(durations.get(key, 0), duration)
    groups = []
    for key, blocks in buckets.items():
        denom = len(measurable_per_prefix.get(key[0], ()))
        if len(blocks) < min_blocks or denom == 0:
            continue
        groups.append(PrefixGroup(key[0], key[1], key[2], key[3], frozenset(blocks), durations[key], len(blocks) / denom))
    groups.sort(key=lambda g: (g.prefix, g.start_bin, g.duration_bin, sorted(g.up_set)))
    return groups


def peninsula_prefix_fraction(group_blocks: Iterable[BlockId], prefix: Prefix, measurable: Iterable[BlockId]) -> float | None:
    """Peninsula blocks in ``prefix`` over its measurable blocks; None when nothing is measurable."""
    inside = {b for b in group_blocks if prefix.covers_block(b)}
    denom = {b for b in measurable if prefix.covers_block(b)}
    if not denom:
        return None
    return len(inside & denom) / len(denom)


# Fraction bins for the prefix-size heat map: roughly logarithmic below 1,
# with the whole-prefix case kept on its own.
FRACTION_BIN_EDGES = (0.0, 0.05, 0.1, 0.25, 0.5, 0.999999, 1.0)
FRACTION_BIN_LABELS = ("<=0.05", "0.05-0.1", "0.1-0.25", "0.25-0.5", "0.5-1", "1.0")


def fraction_bin(fraction: float) -> int:
    for i, hi in enumerate(FRACTION_BIN_EDGES[1:]):
        if fraction <= hi:
            return i
    return len(FRACTION_BIN_LABELS) - 1


def prefix_fraction_heatmap(groups: Sequence[PrefixGroup], weight: str = "count") -> dict[tuple[int, int], float]:
    """(prefix length, fraction bin) -> count of groups, or share of peninsula time."""
    if weight not in ("count", "duration"):
        raise ValueError("weight must be 'count' or 'duration'")
    cells: dict[tuple[int, int], float] = defaultdict(float)
    total = sum(g.duration_s * len(g.blocks) for g in groups) or 1
    for g in groups:
        key = (g.prefix.prefix.length, fraction_bin(g.fraction))
        cells[key] += 1 if weight == "count" else g.duration_s * len(g.blocks) / total
    return dict(sorted(cells.items()))


class Halt(str, Enum):
    SUCCESS = "success"
    UNREACHABLE = "unreachable"
    LOOP = "loop"
    GAP = "gap"


@dataclass(frozen=True)
class Hop:
    address: int
    asn: int | None = None
    prefix: Prefix | None = None


@dataclass(frozen=True)
class TracerouteRecord:
    time: int
    vp: str
    dst: int
    halt: Halt
    hops: tuple[Hop, ...] = ()

    def __post_init__(self) -> None:
        if self.halt is Halt.SUCCESS and (not self.hops or self.hops[-1].address >> 8 != self.dst >> 8):
            raise ValueError("successful trace must end in the destination /24")

    @property
    def dst_block(self) -> BlockId:
        return BlockId(self.dst >> 8)

    def to_json(self) -> dict:
        return {
            "time": self.time,
            "vp": self.vp,
            "dst": format_address(self.dst),
            "halt": self.halt.value,
            "hops": [
                {"addr": format_address(h.address), "asn": h.asn, "prefix": str(h.prefix) if h.prefix else None}
                for h in self.hops
            ],
        }


class Position(str, Enum):
    AT = "at"
    BEFORE = "before"


@dataclass(frozen=True)
class HaltClass:
    as_position: Position
    prefix_position: Position
    unmapped: bool = False


def halt_classification(
    trace: TracerouteRecord,
    target_asn: int | None,
    target_prefix: Prefix | None,
    table: RoutingTable,
) -> HaltClass | None:
    """Where a failed trace stopped relative to the target AS and prefix.

    Gapped traces are discarded (None), as are successful ones.
    """
    if trace.halt in (Halt.GAP, Halt.SUCCESS) or not trace.hops:
        return None
    hit = table.lookup_address(trace.hops[-1].address)
    if hit is None:
        return HaltClass(Position.BEFORE, Position.BEFORE, unmapped=True)
    as_pos = Position.AT if target_asn is not None and hit.asn == target_asn else Position.BEFORE
    pfx_pos = Position.AT if target_prefix is not None and hit.prefix == target_prefix else Position.BEFORE
    return HaltClass(as_pos, pfx_pos)


def classify_trace(trace: TracerouteRecord, table: RoutingTable) -> HaltClass | None:
    """Halt classification with the target AS and prefix taken from the table."""
    target = table.lookup(trace.dst_block)
    return halt_classification(trace, target.asn if target else None, target.prefix if target else None, table)


@dataclass
class HaltCounts:
    as_at: int = 0
    as_before: int = 0
    prefix_at: int = 0
    prefix_before: int = 0
    unmapped: int = 0
    discarded: int = 0

    def add(self, hc: HaltClass | None) -> None:
        if hc is None:
            self.discarded += 1
            return
        self.as_at += hc.as_position is Position.AT
        self.as_before += hc.as_position is Position.BEFORE
        self.prefix_at += hc.prefix_position is Position.AT
        self.prefix_before += hc.prefix_position is Position.BEFORE
        self.unmapped += hc.unmapped


def halt_table(
    traces: Iterable[TracerouteRecord],
    table: RoutingTable,
    sites_up: Callable[[BlockId, int], int | None],
) -> dict[int, HaltCounts]:
    """Halt positions per number of sites that saw the target up.

    ``sites_up(block, time)`` returns that count, or None to skip the trace.
    """
    rows: dict[int, HaltCounts] = defaultdict(HaltCounts)
    for tr in traces:
        if tr.halt is Halt.SUCCESS:
            continue
        k = sites_up(tr.dst_block, tr.time)
        if k is None:
            continue
        rows[k].add(classify_trace(tr, table))
    return dict(sorted(rows.items()))


@dataclass(frozen=True)
class VpHaltSummary:
    at_as: tuple[str, ...]
    before_as: tuple[str, ...]
    reached: tuple[str, ...]
    total_vps: int
    traces: int

    @property
    def at_share(self) -> float:
        return len(self.at_as) / self.total_vps if self.total_vps else 0.0

    @property
    def before_share(self) -> float:
        return len(self.before_as) / self.total_vps if self.total_vps else 0.0


def per_vp_halts(traces: Iterable[TracerouteRecord], table: RoutingTable) -> VpHaltSummary:
    """Assign each VP to at-AS / before-AS by the majority of its failed traces (ties go to at).

    VPs whose traces never failed count as having reached the target.
    """
    votes: dict[str, list[int]] = defaultdict(lambda: [0, 0])
    seen: set[str] = set()
    n = 0
    for tr in traces:
        n += 1
        seen.add(tr.vp)
        hc = classify_trace(tr, table)
        if hc is None:
            continue
        votes[tr.vp][0 if hc.as_position is Position.AT else 1] += 1
    at = sorted(v for v, (a, b) in votes.items() if a >= b and a + b)
    before = sorted(v for v, (a, b) in votes.items() if b > a)
    reached = sorted(seen - set(at) - set(before))
    return VpHaltSummary(tuple(at), tuple(before), tuple(reached), len(seen), n)


def parse_routing_line(line: str) -> RoutedPrefix:
    parts = line.split()
    if len(parts) != 2:
        raise ValueError(f"expected 'prefix/len asn', got {line!r}")
    asn = parts[1].upper().removeprefix("AS")
    if not asn.isdigit():
        raise ValueError(f"bad origin ASN {parts[1]!r}")
    return RoutedPrefix(Prefix.parse(parts[0]), int(asn))


def table_from_mapping(entries: Mapping[str, int]) -> RoutingTable:
    return RoutingTable(RoutedPrefix(Prefix.parse(p), asn) for p, asn in entries.items())
