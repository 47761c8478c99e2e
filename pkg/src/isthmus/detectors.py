"""Peninsula, island and country-peninsula detection over observation streams.

Rounds are summarised per (block, round) as two VP bitmasks: who observed
the block and who saw it up.  Everything downstream (events, fractions,
subsets, similarity) works on those masks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    STATE_UNMEASURED,
    STATE_UP,
    BlockId,
    Observation,
    ObservationState,
    ObservationTable,
    RoundClass,
    RoundKind,
    TimeBinning,
)

log = logging.getLogger(__name__)

DEFAULT_ADDRESS_ISLAND_EPS = 0.001

# kind codes used in the columnar tables
K_UNMEASURED, K_ALL_UP, K_ALL_DOWN, K_DISAGREE = 0, 1, 2, 3
KIND_CODES = {
    RoundKind.UNMEASURED: K_UNMEASURED,
    RoundKind.ALL_UP: K_ALL_UP,
    RoundKind.ALL_DOWN: K_ALL_DOWN,
    RoundKind.DISAGREEMENT: K_DISAGREE,
}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}


def mask_of(names: Iterable[str], vps: Sequence[str]) -> int:
    m = 0
    for n in names:
        m |= 1 << vps.index(n)
    return m


def names_of(mask: int, vps: Sequence[str]) -> frozenset[str]:
    return frozenset(v for i, v in enumerate(vps) if mask >> i & 1)


def popcount(values: np.ndarray) -> np.ndarray:
    v = values.astype(np.uint64)
    out = np.zeros(v.shape, np.int64)
    while v.any():
        out += (v & np.uint64(1)).astype(np.int64)
        v = v >> np.uint64(1)
    return out


def kinds_from_masks(up: np.ndarray, observed: np.ndarray) -> np.ndarray:
    kinds = np.full(up.shape, K_DISAGREE, np.int8)
    kinds[up == observed] = K_ALL_UP
    kinds[up == 0] = K_ALL_DOWN
    kinds[observed == 0] = K_UNMEASURED
    return kinds


@dataclass
class ClassifiedRounds:
    """Per (block, round) VP masks, sorted by block then round."""

    vps: tuple[str, ...]
    binning: TimeBinning
    block: np.ndarray
    round: np.ndarray
    up: np.ndarray
    observed: np.ndarray

    def __post_init__(self) -> None:
        self.block = np.asarray(self.block, np.int32)
        self.round = np.asarray(self.round, np.int64)
        self.up = np.asarray(self.up, np.uint64)
        self.observed = np.asarray(self.observed, np.uint64)

    def __len__(self) -> int:
        return len(self.block)

    @property
    def kind(self) -> np.ndarray:
        return kinds_from_masks(self.up, self.observed)

    def round_class(self, i: int) -> RoundClass:
        return RoundClass.from_sets(names_of(int(self.up[i]), self.vps), names_of(int(self.observed[i]), self.vps))

    def for_block(self, block: BlockId) -> list[tuple[int, RoundClass]]:
        idx = np.nonzero(self.block == block.prefix24)[0]
        return [(int(self.round[i]), self.round_class(i)) for i in idx]

    def restrict(self, vp_mask: int) -> ClassifiedRounds:
        """The classification a VP subset would have produced on its own."""
        m = np.uint64(vp_mask)
        up, obs = self.up & m, self.observed & m
        keep = obs != 0
        return ClassifiedRounds(self.vps, self.binning, self.block[keep], self.round[keep], up[keep], obs[keep])

    def take(self, index: np.ndarray) -> ClassifiedRounds:
        return ClassifiedRounds(self.vps, self.binning, self.block[index], self.round[index], self.up[index], self.observed[index])


def _group_starts(*keys: np.ndarray) -> np.ndarray:
    n = len(keys[0])
    if n == 0:
        return np.zeros(0, np.int64)
    change = np.zeros(n, bool)
    change[0] = True
    for k in keys:
        change[1:] |= k[1:] != k[:-1]
    return np.nonzero(change)[0]


def classify_rounds(
    table: ObservationTable,
    binning: TimeBinning,
    quarantine: Mapping[str, Sequence[tuple[int, int]]] | None = None,
) -> ClassifiedRounds:
    """Collapse observations to per-(block, round) up/observed masks.

    Unmeasured observations are dropped; if a VP reports both states in one
    round, Up wins.  Quarantined (vp, round) spans are excluded entirely.
    """
    if len(table.vps) > 63:
        raise ValueError("round masks hold at most 63 vantage points")
    keep = table.state != STATE_UNMEASURED
    rounds = (table.time - binning.epoch) // binning.window
    if quarantine:
        for vp_name, spans in quarantine.items():
            if vp_name not in table.vps or not spans:
                continue
            vi = table.vps.index(vp_name)
            mine = table.vp == vi
            for start, end in spans:
                keep &= ~(mine & (rounds >= start) & (rounds <= end))
    block, rnd, vp, state = table.block[keep], rounds[keep], table.vp[keep], table.state[keep]
    order = np.lexsort((rnd, block))
    block, rnd, vp, state = block[order], rnd[order], vp[order], state[order]
    bits = np.left_shift(np.uint64(1), vp.astype(np.uint64))
    up_bits = np.where(state == STATE_UP, bits, np.uint64(0))
    down_bits = np.where(state == STATE_UP, np.uint64(0), bits)
    starts = _group_starts(block, rnd)
    if len(starts) == 0:
        empty = np.zeros(0)
        return ClassifiedRounds(table.vps, binning, empty, empty, empty, empty)
    observed = np.bitwise_or.reduceat(bits, starts)
    up = np.bitwise_or.reduceat(up_bits, starts)
    conflicts = int(np.count_nonzero(up & np.bitwise_or.reduceat(down_bits, starts)))
    if conflicts:
        log.warning("%d block-rounds had a VP reporting both up and down; treating as up", conflicts)
    return ClassifiedRounds(table.vps, binning, block[starts], rnd[starts], up, observed)


def taitao_classify(observations: Iterable[Observation], binning: TimeBinning | None = None) -> RoundClass:
    """Classify one block in one round: a peninsula shows as 0 < |up| < |observed|."""
    obs = list(observations)
    if len({o.block for o in obs}) > 1:
        raise ValueError("observations span more than one block")
    if binning is not None and len({binning.bin(o.time) for o in obs}) > 1:
        raise ValueError("observations span more than one round")
    observed: set[str] = set()
    up: set[str] = set()
    down: set[str] = set()
    for o in obs:
        if o.state is ObservationState.UNMEASURED:
            continue
        observed.add(o.vp)
        (up if o.state is ObservationState.UP else down).add(o.vp)
    if up & down:
        log.warning("conflicting observations from %s; up wins", ", ".join(sorted(up & down)))
    return RoundClass.from_sets(up, observed)


@dataclass(frozen=True)
class PeninsulaEvent:
    block: BlockId
    start_round: int
    end_round: int
    up_set: frozenset[str]
    observed_set: frozenset[str]

    def __post_init__(self) -> None:
        if not (self.up_set and self.up_set < self.observed_set):
            raise ValueError("peninsula needs a non-empty proper up-set")
        if self.end_round < self.start_round:
            raise ValueError("event ends before it starts")

    @property
    def rounds(self) -> int:
        return self.end_round - self.start_round + 1


@dataclass
class Runs:
    """Maximal runs of equal classification per block (columnar)."""

    vps: tuple[str, ...]
    binning: TimeBinning
    block: np.ndarray
    kind: np.ndarray
    up: np.ndarray
    observed: np.ndarray
    start_round: np.ndarray
    end_round: np.ndarray

    def __len__(self) -> int:
        return len(self.block)

    @property
    def rounds(self) -> np.ndarray:
        return self.end_round - self.start_round + 1


def coalesce_runs(classified: ClassifiedRounds) -> Runs:
    """Group consecutive rounds of one block with the same kind.

    Disagreement runs additionally require an identical up-set, so a change
    of who can reach the block closes one event and opens the next.
    """
    c = classified
    kind = c.kind
    n = len(c)
    if n == 0:
        z = np.zeros(0, np.int64)
        return Runs(c.vps, c.binning, z, z, z.astype(np.uint64), z.astype(np.uint64), z, z)
    new = np.ones(n, bool)
    if n > 1:
        same = (
            (c.block[1:] == c.block[:-1])
            & (c.round[1:] == c.round[:-1] + 1)
            & (kind[1:] == kind[:-1])
            & ((kind[1:] != K_DISAGREE) | (c.up[1:] == c.up[:-1]))
        )
        new[1:] = ~same
    starts = np.nonzero(new)[0]
    ends = np.append(starts[1:] - 1, n - 1)
    return Runs(
        c.vps,
        c.binning,
        c.block[starts],
        kind[starts],
        np.bitwise_or.reduceat(c.up, starts),
        np.bitwise_or.reduceat(c.observed, starts),
        c.round[starts],
        c.round[ends],
    )


def peninsula_events(classified: ClassifiedRounds) -> list[PeninsulaEvent]:
    """All peninsula events, ordered by block then start round."""
    runs = coalesce_runs(classified)
    out = []
    for i in np.nonzero(runs.kind == K_DISAGREE)[0]:
        out.append(
            PeninsulaEvent(
                BlockId(int(runs.block[i])),
                int(runs.start_round[i]),
                int(runs.end_round[i]),
                names_of(int(runs.up[i]), runs.vps),
                names_of(int(runs.observed[i]), runs.vps),
            )
        )
    return out


def taitao_events(rounds: Sequence[tuple[int, RoundClass]], block: BlockId) -> list[PeninsulaEvent]:
    """Coalesce one block's sorted (round, class) pairs into peninsula events."""
    events: list[PeninsulaEvent] = []
    cur: list = []
    for r, rc in rounds:
        if rc.kind is RoundKind.DISAGREEMENT and cur and r == cur[2] + 1 and rc.up_set == cur[3]:
            cur[2] = r
            cur[4] = cur[4] | rc.observed_set
            continue
        if cur:
            events.append(PeninsulaEvent(block, cur[1], cur[2], cur[3], cur[4]))
            cur = []
        if rc.kind is RoundKind.DISAGREEMENT:
            cur = [block, r, r, rc.up_set, rc.observed_set]
    if cur:
        events.append(PeninsulaEvent(block, cur[1], cur[2], cur[3], cur[4]))
    return events


@dataclass(frozen=True)
class IslandEvent:
    vp: str
    start_round: int
    end_round: int
    min_reachable_fraction: float
    address_island: bool

    def __post_init__(self) -> None:
        if not 0 <= self.min_reachable_fraction < 0.5:
            raise ValueError("island events need reachable fraction below one half")

    @property
    def rounds(self) -> int:
        return self.end_round - self.start_round + 1


@dataclass
class ChiloeResult:
    islands: list[IslandEvent] = field(default_factory=list)
    suspected_peninsulas: list[IslandEvent] = field(default_factory=list)


def chiloe_candidates(
    counts: Iterable[tuple[int, int, int]],
    vp: str,
    address_island_eps: float = DEFAULT_ADDRESS_ISLAND_EPS,
    short_rounds: int = 1,
) -> ChiloeResult:
    """Flag rounds where the VP sees fewer core blocks up than down.

    ``counts`` holds (round, reachable, unreachable) per round.  Runs longer
    than ``short_rounds`` must bottom out at ``address_island_eps`` reachable
    or they are reported as suspected peninsulas instead.
    """
    result = ChiloeResult()
    run: list[tuple[int, int, int]] = []

    def close() -> None:
        if not run:
            return
        fracs = [u / (u + d) for _, u, d in run]
        event = IslandEvent(vp, run[0][0], run[-1][0], min(fracs), any(u == 0 for _, u, _ in run))
        if len(run) > short_rounds and event.min_reachable_fraction > address_island_eps:
            result.suspected_peninsulas.append(event)
        else:
            result.islands.append(event)
        run.clear()

    for r, up, down in sorted(counts):
        if up + down == 0:
            close()
            continue
        if 0 <= up < down:
            if run and r != run[-1][0] + 1:
                close()
            run.append((r, up, down))
        else:
            close()
    close()
    return result


def chiloe(counts: Iterable[tuple[int, int, int]], vp: str, address_island_eps: float = DEFAULT_ADDRESS_ISLAND_EPS, short_rounds: int = 1) -> list[IslandEvent]:
    return chiloe_candidates(counts, vp, address_island_eps, short_rounds).islands


def vp_round_counts(
    table: ObservationTable,
    binning: TimeBinning,
    homes: Mapping[str, BlockId | None] | None = None,
) -> dict[str, list[tuple[int, int, int]]]:
    """(round, reachable, unreachable) per VP; each VP's home block is left out.

    The home block sits on the observer's side of any partition, so it says
    nothing about how much of the core the observer can reach.
    """
    homes = homes or {}
    keep = table.state != STATE_UNMEASURED
    for name, home in homes.items():
        if home is not None and name in table.vps:
            keep &= ~((table.vp == table.vps.index(name)) & (table.block == home.prefix24))
    vp = table.vp[keep]
    rnd = (table.time[keep] - binning.epoch) // binning.window
    up = (table.state[keep] == STATE_UP).astype(np.int64)
    blk = table.block[keep]
    out: dict[str, list[tuple[int, int, int]]] = {}
    for vi, name in enumerate(table.vps):
        m = vp == vi
        if not m.any():
            out[name] = []
            continue
        r, b, u = rnd[m], blk[m], up[m]
        # one verdict per block per round, up wins
        order = np.lexsort((b, r))
        r, b, u = r[order], b[order], u[order]
        s = _group_starts(r, b)
        r, u = r[s], np.maximum.reduceat(u, s)
        rs = _group_starts(r)
        ups = np.add.reduceat(u, rs)
        tot = np.diff(np.append(rs, len(r)))
        out[name] = list(zip(r[rs].tolist(), ups.tolist(), (tot - ups).tolist()))
    return out


@dataclass
class Detection:
    classified: ClassifiedRounds
    peninsulas: list[PeninsulaEvent]
    islands: list[IslandEvent]
    suspected_peninsulas: list[IslandEvent]
    quarantine: dict[str, list[tuple[int, int]]]


def detect(
    table: ObservationTable,
    binning: TimeBinning,
    homes: Mapping[str, BlockId | None] | None = None,
    address_island_eps: float = DEFAULT_ADDRESS_ISLAND_EPS,
    short_rounds: int = 1,
) -> Detection:
    """Two passes: Chiloe per VP, then Taitao with island rounds quarantined."""
    counts = vp_round_counts(table, binning, homes)
    islands: list[IslandEvent] = []
    suspects: list[IslandEvent] = []
    for name in table.vps:
        res = chiloe_candidates(counts[name], name, address_island_eps, short_rounds)
        islands.extend(res.islands)
        suspects.extend(res.suspected_peninsulas)
    quarantine: dict[str, list[tuple[int, int]]] = {}
    for ev in islands:
        quarantine.setdefault(ev.vp, []).append((ev.start_round, ev.end_round))
    classified = classify_rounds(table, binning, quarantine)
    islands.sort(key=lambda e: (e.vp, e.start_round))
    suspects.sort(key=lambda e: (e.vp, e.start_round))
    return Detection(classified, peninsula_events(classified), islands, suspects, quarantine)


@dataclass(frozen=True)
class SparseIslandResult:
    island: bool | None
    probed: tuple[str, ...]
    missing: tuple[str, ...]

    @property
    def coverage(self) -> float:
        total = len(self.probed) + len(self.missing)
        return len(self.probed) / total if total else 0.0


def chiloe_sparse(
    results: Iterable[tuple[int, str, bool]],
    targets: Sequence[str],
    window: tuple[int, int],
) -> SparseIslandResult:
    """Island verdict from sparse targets: true only if nothing answered in the window.

    ``results`` holds (time, target, success) for one VP.  Targets never
    probed in the window are left out of the rule and listed as missing;
    with no probes at all the verdict is indeterminate (None).
    """
    if not targets:
        raise ValueError("need at least one target")
    lo, hi = window
    wanted = set(targets)
    probed: set[str] = set()
    success = False
    for t, target, ok in results:
        if lo <= t < hi and target in wanted:
            probed.add(target)
            success = success or ok
    missing = tuple(sorted(wanted - probed))
    if not probed:
        return SparseIslandResult(None, (), missing)
    return SparseIslandResult(not success, tuple(sorted(probed)), missing)


def sparse_islands(
    table: ObservationTable,
    window_s: int = 86400,
    start: int | None = None,
    targets: Sequence[str] | None = None,
) -> list[tuple[str, int, SparseIslandResult]]:
    """Apply :func:`chiloe_sparse` per VP per consecutive window."""
    from .core import format_block

    if len(table) == 0:
        return []
    t0 = int(table.time.min()) if start is None else start
    names = targets or [format_block(BlockId(int(b))) for b in np.unique(table.block)]
    nwin = int((int(table.time.max()) - t0) // window_s) + 1
    out = []
    keep = table.state != STATE_UNMEASURED
    for vi, vp in enumerate(table.vps):
        m = keep & (table.vp == vi)
        rows = [
            (t, format_block(BlockId(b)), s == STATE_UP)
            for t, b, s in zip(table.time[m].tolist(), table.block[m].tolist(), table.state[m].tolist())
        ]
        for w in range(nwin):
            lo = t0 + w * window_s
            out.append((vp, lo, chiloe_sparse(rows, names, (lo, lo + window_s))))
    return out


def country_peninsula(rc: RoundClass, vp_country: Mapping[str, str], min_same_country: int = 2) -> str | None:
    """Country c when exactly the valid observers located in c see the block up."""
    if not rc.up_set or rc.kind is not RoundKind.DISAGREEMENT:
        return None
    countries = {vp_country.get(v, "??") for v in rc.up_set}
    if len(countries) != 1:
        return None
    (country,) = countries
    if country == "??":
        return None
    domestic = {v for v in rc.observed_set if vp_country.get(v, "??") == country}
    if domestic != rc.up_set or len(domestic) < min_same_country:
        return None
    if not rc.observed_set - domestic:
        return None
    return country


@dataclass(frozen=True)
class CountryPeninsulaEvent:
    block: BlockId
    country: str
    start_round: int
    end_round: int
    singleton: bool = False


def country_peninsula_events(
    classified: ClassifiedRounds, vp_country: Mapping[str, str]
) -> tuple[list[CountryPeninsulaEvent], list[CountryPeninsulaEvent]]:
    """Country peninsulas, plus matches where the country has a single VP (kept apart)."""
    runs = coalesce_runs(classified)
    full: list[CountryPeninsulaEvent] = []
    single: list[CountryPeninsulaEvent] = []
    prev: dict[tuple[int, bool], CountryPeninsulaEvent] = {}
    for i in np.nonzero(runs.kind == K_DISAGREE)[0]:
        rc = RoundClass.from_sets(names_of(int(runs.up[i]), runs.vps), names_of(int(runs.observed[i]), runs.vps))
        c = country_peninsula(rc, vp_country)
        is_single = False
        if c is None:
            c = country_peninsula(rc, vp_country, min_same_country=1)
            is_single = c is not None
        if c is None:
            continue
        blk = int(runs.block[i])
        ev = CountryPeninsulaEvent(BlockId(blk), c, int(runs.start_round[i]), int(runs.end_round[i]), is_single)
        key = (blk, is_single)
        last = prev.get(key)
        target = single if is_single else full
        if last and last.country == c and last.end_round + 1 == ev.start_round:
            merged = CountryPeninsulaEvent(last.block, c, last.start_round, ev.end_round, is_single)
            target[target.index(last)] = merged
            prev[key] = merged
        else:
            target.append(ev)
            prev[key] = ev
    return full, single
