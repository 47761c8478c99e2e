"""Synthetic worlds with injected peninsulas, islands and outages.

Scenarios start from a full mesh over N blocks; injections become timed
deltas.  Sampling asks the oracle what each probe would see and then
degrades successes with hit-rate and loss knobs.  Every VP draws from its
own seed stream, so serial and threaded sampling give identical output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .analysis.routing import Halt, Hop, RoutedPrefix, RoutingTable, TracerouteRecord
from .core import (
    STATE_DOWN,
    STATE_UP,
    BlockId,
    ObservationTable,
    Prefix,
    TimeBinning,
    VantagePoint,
    format_block,
    parse_address,
    parse_block,
)
from .oracle import Node, observe
from .scenario import Delta, Scenario, ScenarioError

TRANSIT_ASN = 64496
TRANSIT_PREFIX = Prefix(parse_address("198.18.0.0"), 15)
INFRA_BASE = parse_address("100.64.0.0")


@dataclass(frozen=True)
class ProbingModel:
    """How one VP probes: cadence, target responsiveness, loss, retries."""

    interval: int = 660
    target_hit_rate: float = 1.0
    packet_loss: float = 0.0
    retries: int = 0

    def __post_init__(self) -> None:
        if self.interval <= 0:
            raise ValueError("interval must be positive")
        for name in ("target_hit_rate", "packet_loss"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be within [0, 1]")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    @property
    def success_probability(self) -> float:
        per_try = self.target_hit_rate * (1.0 - self.packet_loss)
        return 1.0 - (1.0 - per_try) ** (self.retries + 1)

    @classmethod
    def trinocular(cls, **kw: Any) -> ProbingModel:
        return cls(**{"interval": 660, "target_hit_rate": 0.95, **kw})

    @classmethod
    def atlas(cls, **kw: Any) -> ProbingModel:
        return cls(**{"interval": 300, "target_hit_rate": 1.0, "retries": 2, **kw})

    @classmethod
    def ark(cls, **kw: Any) -> ProbingModel:
        return cls(**{"interval": 86400, "target_hit_rate": 1 / 6, **kw})

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> ProbingModel:
        preset = doc.get("preset")
        fields = {k: v for k, v in doc.items() if k != "preset"}
        if preset:
            return getattr(cls, preset)(**fields)
        return cls(**fields)


INJECTION_KINDS = ("peninsula", "island", "outage", "country_filter")


@dataclass(frozen=True)
class InjectionSpec:
    """One injected event.  Times are seconds from the scenario start.

    Victims are blocks (peninsula, outage, country_filter) or VP ids
    (island).  ``victim_count``/``severed_count`` draw them at random instead.
    """

    kind: str
    start: int
    duration: int
    victims: tuple[str, ...] = ()
    victim_count: int = 0
    severed_from: tuple[str, ...] = ()
    severed_count: int = 0
    severed_extra_fraction: float = 0.0
    island_extra_blocks: int = 0
    country: str | None = None
    breakpoint: str = "before_as"
    breakpoints: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in INJECTION_KINDS:
            raise ScenarioError(f"unknown injection kind {self.kind!r}")
        if self.duration <= 0:
            raise ScenarioError("injection duration must be positive")
        if self.breakpoint not in BREAKPOINTS:
            raise ScenarioError(f"unknown breakpoint {self.breakpoint!r}")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> InjectionSpec:
        d = dict(doc)
        for key in ("victims", "severed_from"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


BREAKPOINTS = ("before_as", "in_as", "in_prefix")


@dataclass(frozen=True)
class ScenarioConfig:
    blocks: int
    vps: int | Sequence[Mapping[str, str]] = 6
    extra_vps: Mapping[str, int] = field(default_factory=dict)
    injections: Sequence[InjectionSpec] = ()
    start: int = 0
    window: int = 660
    first_block: str = "10.0.0.0/24"
    blocks_per_prefix: int = 256
    asn_base: int = 65000

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> ScenarioConfig:
        d = dict(doc)
        d["injections"] = tuple(InjectionSpec.from_dict(i) for i in d.get("injections", ()))
        return cls(**d)


def _vp_specs(config: ScenarioConfig) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
    if isinstance(config.vps, int):
        primary = [(f"vp{i + 1}", "??") for i in range(config.vps)]
    else:
        primary = [(v["id"], v.get("country", "??")) for v in config.vps]
    extra = []
    for prefix, count in sorted(config.extra_vps.items()):
        width = max(3, len(str(count)))
        extra.extend((f"{prefix}{i + 1:0{width}d}", "??") for i in range(count))
    return primary, extra


def generate_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    """Full mesh over ``config.blocks`` blocks with injections as timed deltas."""
    rng = np.random.default_rng(seed)
    first = parse_block(config.first_block).prefix24
    per_prefix = config.blocks_per_prefix
    if per_prefix & (per_prefix - 1):
        raise ScenarioError("blocks_per_prefix must be a power of two")
    plen = 24 - (per_prefix.bit_length() - 1)
    nodes = []
    for i in range(config.blocks):
        b = BlockId(first + i)
        pbase = (b.prefix24 // per_prefix) * per_prefix
        nodes.append(Node(b, True, config.asn_base + pbase // per_prefix - first // per_prefix, Prefix(pbase << 8, plen)))
    primary, extra = _vp_specs(config)
    all_vps = primary + extra
    if len(all_vps) > config.blocks:
        raise ScenarioError("more vantage points than blocks")
    placement = rng.choice(config.blocks, size=len(all_vps), replace=False)
    vps = {name: VantagePoint(name, country, nodes[int(i)].block) for (name, country), i in zip(all_vps, placement)}
    vp_blocks = {v.home_block for v in vps.values()}
    free = np.array([i for i in range(config.blocks) if nodes[i].block not in vp_blocks])
    primary_ids = [n for n, _ in primary]
    extra_ids = [n for n, _ in extra]

    deltas: list[Delta] = []
    resolved: list[dict[str, Any]] = []
    for k, spec in enumerate(config.injections):
        start = config.start + spec.start
        end = start + spec.duration
        tag = f"{spec.kind}:{k}"
        if spec.kind == "island":
            who = list(spec.victims) or [str(v) for v in rng.choice(primary_ids, size=max(1, spec.victim_count), replace=False)]
            for v in who:
                if v not in vps:
                    raise ScenarioError(f"island injection names unknown VP {v!r}")
            group = [vps[v].home_block for v in who]
            if spec.island_extra_blocks:
                group += [nodes[int(i)].block for i in rng.choice(free, size=spec.island_extra_blocks, replace=False)]
            deltas.append(Delta(start, end, isolate=(tuple(group),), tag=tag))
            resolved.append({"kind": "island", "start": start, "end": end, "vps": list(who), "blocks": [format_block(b) for b in group]})
            continue
        victims = _victim_blocks(spec, nodes, free, rng)
        if spec.kind == "outage":
            deltas.append(Delta(start, end, down=tuple(victims), tag=tag))
            resolved.append({"kind": "outage", "start": start, "end": end, "blocks": [format_block(b) for b in victims]})
            continue
        if spec.kind == "country_filter":
            if not spec.country:
                raise ScenarioError("country_filter needs a country")
            severed = [n for n, v in vps.items() if v.country != spec.country]
        else:
            severed = list(spec.severed_from)
            if spec.severed_count:
                severed += [str(v) for v in rng.choice(primary_ids, size=spec.severed_count, replace=False)]
            if spec.severed_extra_fraction and extra_ids:
                n_extra = int(round(spec.severed_extra_fraction * len(extra_ids)))
                severed += [str(v) for v in rng.choice(extra_ids, size=n_extra, replace=False)]
            severed = sorted(set(severed))
            for v in severed:
                if v not in vps:
                    raise ScenarioError(f"peninsula injection names unknown VP {v!r}")
            if not severed:
                raise ScenarioError("peninsula needs a non-empty severed_from set")
            if not set(vps) - set(severed):
                raise ScenarioError("peninsula with every VP severed is an outage")
        cuts = tuple((b, vps[v].home_block) for b in victims for v in severed)
        deltas.append(Delta(start, end, cut=cuts, tag=tag))
        resolved.append(
            {
                "kind": spec.kind,
                "start": start,
                "end": end,
                "blocks": [format_block(b) for b in victims],
                "severed": severed,
                "breakpoint": spec.breakpoint,
                "breakpoints": dict(spec.breakpoints),
            }
        )
    return Scenario(
        tuple(nodes),
        (),
        True,
        tuple(deltas),
        vps,
        config.start,
        TimeBinning(config.window, config.start),
        {},
        {"injections": resolved, "seed": seed},
    )


def _victim_blocks(spec: InjectionSpec, nodes: Sequence[Node], free: np.ndarray, rng: np.random.Generator) -> list[BlockId]:
    known = {n.block for n in nodes}
    blocks = [parse_block(v) for v in spec.victims]
    for b in blocks:
        if b not in known:
            raise ScenarioError(f"injection names unknown block {format_block(b)}")
    if spec.victim_count:
        blocks += [nodes[int(i)].block for i in rng.choice(free, size=spec.victim_count, replace=False)]
    if not blocks:
        raise ScenarioError(f"{spec.kind} injection has no victims")
    return blocks


def _threads() -> int:
    try:
        n = int(os.environ.get("ISTHMUS_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else min(8, os.cpu_count() or 1)


def _segments(scenario: Scenario, lo: int, hi: int) -> list[int]:
    pts = [p for p in scenario.change_points() if lo < p < hi]
    return [lo] + pts


def sample_observations(
    scenario: Scenario,
    probing: ProbingModel | Mapping[str, ProbingModel],
    horizon: int,
    seed: int,
    vps: Sequence[str] | None = None,
    targets: Sequence[BlockId] | None = None,
) -> ObservationTable:
    """Probe every target from every VP at its model's cadence.

    Probe times are ``start + phase + k * interval`` with a per-(VP, block)
    phase uniform in ``[0, interval)``.  A VP whose own block is down emits
    nothing.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if isinstance(probing, ProbingModel):
        names = list(vps) if vps is not None else list(scenario.vps)
        models = {n: probing for n in names}
    else:
        names = list(vps) if vps is not None else list(probing)
        models = dict(probing)
    for n in names:
        if n not in scenario.vps:
            raise ScenarioError(f"unknown vantage point {n!r}")
    lo, hi = scenario.start, scenario.start + horizon
    seg_starts = np.array(_segments(scenario, lo, hi), np.int64)
    graphs = [scenario.graph_at(int(t)) for t in seg_starts]
    target_blocks = list(targets) if targets is not None else scenario.blocks
    g0 = graphs[0]
    tidx = np.array([g0.index[b] for b in target_blocks], np.int64)
    tcodes = np.array([b.prefix24 for b in target_blocks], np.int32)
    vp_order = {n: i for i, n in enumerate(scenario.vps)}

    def one(vi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        name = names[vi]
        model = models[name]
        home = scenario.vp_home(name)
        rng = np.random.default_rng(np.random.SeedSequence([seed, vp_order[name]]))
        phase = rng.integers(0, model.interval, size=len(tidx))
        kmax = -(-horizon // model.interval)
        times = lo + phase[:, None] + np.arange(kmax, dtype=np.int64)[None, :] * model.interval
        valid = times < hi
        tgt = np.broadcast_to(np.arange(len(tidx))[:, None], times.shape)[valid]
        times = times[valid]
        seg = np.searchsorted(seg_starts, times, side="right") - 1
        reach = np.stack([g.reach_vector(home)[tidx] for g in graphs])
        alive = np.array([g.is_active(home) for g in graphs])
        emit = alive[seg]
        up = reach[seg, tgt]
        p = model.success_probability
        if p < 1.0:
            draws = rng.random(len(times))
            up = up & (draws < p)
        state = np.where(up, STATE_UP, STATE_DOWN).astype(np.int8)
        return times[emit], tcodes[tgt[emit]], state[emit]

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        parts = list(pool.map(one, range(len(names))))
    table = ObservationTable(
        tuple(names),
        np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64),
        np.concatenate([np.full(len(p[0]), i, np.int16) for i, p in enumerate(parts)]) if parts else np.zeros(0, np.int16),
        np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int32),
        np.concatenate([p[2] for p in parts]) if parts else np.zeros(0, np.int8),
    )
    return table.sorted()


def infra_prefixes(scenario: Scenario) -> dict[int, Prefix]:
    """One synthetic router /24 per origin AS, outside the measured space."""
    asns = sorted({n.asn for n in scenario.nodes if n.asn is not None})
    return {asn: Prefix(INFRA_BASE + (k << 8), 24) for k, asn in enumerate(asns)}


def routing_table_for(scenario: Scenario) -> RoutingTable:
    """Routes for node prefixes, per-AS router space and the shared transit."""
    table = RoutingTable()
    for n in scenario.nodes:
        if n.prefix is not None and n.asn is not None:
            table.add(RoutedPrefix(n.prefix, n.asn))
    for asn, pfx in infra_prefixes(scenario).items():
        table.add(RoutedPrefix(pfx, asn))
    table.add(RoutedPrefix(TRANSIT_PREFIX, TRANSIT_ASN))
    return table


def _breakpoint(scenario: Scenario, vp: str, target: BlockId, t: int) -> str:
    for inj in scenario.meta.get("injections", ()):
        if inj["kind"] not in ("peninsula", "country_filter") or not inj["start"] <= t < inj["end"]:
            continue
        victims = inj.get("blocks", ())
        hit = format_block(target) in victims or target in scenario.groups.get(inj.get("group", ""), ())
        if vp in inj.get("severed", ()) and hit:
            return inj.get("breakpoints", {}).get(vp, inj.get("breakpoint", "before_as"))
    return "in_prefix"


def synthesize_traceroutes(
    scenario: Scenario,
    probing: ProbingModel,
    seed: int,
    vps: Sequence[str] | None = None,
    targets: Sequence[BlockId] | None = None,
    window: tuple[int, int] | None = None,
    halt_mix: Mapping[str, float] | None = None,
) -> list[TracerouteRecord]:
    """Abstract three-segment traceroutes: source AS, transit, target AS.

    Reachable pairs succeed (subject to the hit rate, failing at the target
    prefix otherwise).  Severed pairs stop where the injection's breakpoint
    says, with a halt kind drawn from ``halt_mix``.
    """
    mix = dict(halt_mix or {"unreachable": 1.0})
    kinds = sorted(mix)
    weights = np.array([mix[k] for k in kinds], float)
    weights /= weights.sum()
    names = list(vps) if vps is not None else list(scenario.vps)
    lo, hi = window or (scenario.start, scenario.start + 86400)
    target_blocks = list(targets) if targets is not None else scenario.blocks
    infra = infra_prefixes(scenario)
    nodes = {n.block: n for n in scenario.nodes}
    vp_order = {n: i for i, n in enumerate(scenario.vps)}
    out: list[TracerouteRecord] = []
    for name in names:
        home = scenario.vp_home(name)
        src = nodes[home]
        rng = np.random.default_rng(np.random.SeedSequence([seed, vp_order[name], 7]))
        phase = rng.integers(0, probing.interval, size=len(target_blocks))
        first_hop = Hop(home.address(1), src.asn, src.prefix)
        for ti, target in enumerate(target_blocks):
            dst_node = nodes[target]
            t = lo + int(phase[ti])
            while t < hi:
                host = int(rng.integers(1, 255))
                transit = Hop(TRANSIT_PREFIX.base + int(rng.integers(1, 1 << 16)), TRANSIT_ASN, TRANSIT_PREFIX)
                graph = scenario.graph_at(t)
                if not graph.is_active(home):
                    t += probing.interval
                    continue
                reachable = observe(graph, home, target).value == "U"
                if reachable and rng.random() < probing.success_probability:
                    hops = (first_hop, transit, Hop(target.address(host), dst_node.asn, dst_node.prefix))
                    out.append(TracerouteRecord(t, name, target.address(host), Halt.SUCCESS, hops))
                else:
                    where = "in_prefix" if reachable else _breakpoint(scenario, name, target, t)
                    hops = (first_hop, transit)
                    if where == "in_as" and dst_node.asn in infra:
                        hops += (Hop(infra[dst_node.asn].base + 1, dst_node.asn, infra[dst_node.asn]),)
                    elif where == "in_prefix" and dst_node.prefix is not None:
                        gw = dst_node.prefix.base + 1
                        if gw >> 8 == target.prefix24:  # keep the gateway out of the target /24
                            gw = dst_node.prefix.base + dst_node.prefix.block_count * 256 - 2 if dst_node.prefix.length < 24 else gw
                        hops += (Hop(gw, dst_node.asn, dst_node.prefix),)
                    halt = Halt(kinds[int(rng.choice(len(kinds), p=weights))]) if not reachable else Halt.UNREACHABLE
                    if halt is Halt.LOOP:
                        hops += (hops[-1],)
                    out.append(TracerouteRecord(t, name, target.address(host), halt, hops))
                t += probing.interval
    out.sort(key=lambda r: (r.time, r.vp, r.dst))
    return out


def oracle_round_masks(
    scenario: Scenario,
    vps: Sequence[str],
    binning: TimeBinning,
    rounds: Iterable[int],
) -> dict[int, tuple[np.ndarray, np.ndarray, frozenset[str]]]:
    """Ground truth per round: up and observed VP bitmasks aligned with ``scenario.blocks``.

    VPs whose own block is an island or out are excluded, mirroring the
    quarantine the detectors apply.  Each round is judged at its start.
    """
    from .oracle import ISLAND_LABELS, TruthLabel, truth_labels

    bad = ISLAND_LABELS | {TruthLabel.OUT}
    memo: dict[int, tuple[np.ndarray, np.ndarray, frozenset[str]]] = {}
    out = {}
    for r in rounds:
        g = scenario.graph_at(binning.round_start(r))
        if id(g) not in memo:
            labels = truth_labels(g)
            up = np.zeros(len(g.nodes), np.uint64)
            obs = np.uint64(0)
            excluded = set()
            for i, v in enumerate(vps):
                home = scenario.vp_home(v)
                if labels[home] in bad:
                    excluded.add(v)
                    continue
                bit = np.uint64(1 << i)
                obs |= bit
                up[g.reach_vector(home)] |= bit
            memo[id(g)] = (up, np.full(len(g.nodes), obs, np.uint64), frozenset(excluded))
        out[r] = memo[id(g)]
    return out
