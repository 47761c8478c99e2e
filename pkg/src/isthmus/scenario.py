"""Time-varying reachability scenarios and their JSON fixture format.

Fixture layout::

    {
      "start": 0,
      "binning": {"window": 660, "epoch": 0},
      "nodes": [{"block": "10.0.0.0/24", "asn": 1, "prefix": "10.0.0.0/16", "group": "A"},
                {"first": "80.240.0.0/24", "count": 1716, "group": "victims"}],
      "edges": {"mesh": true, "missing": [["B", "C"]]},
      "deltas": [{"start": 0, "end": 660, "cut": [["@W", "victims"]], "down": [], "isolate": [["@E"]]}],
      "vps": [{"id": "W", "block": "10.0.0.0/24", "country": "US"}]
    }

Edge endpoints may be a block, a group name, or ``@vp`` for a vantage point's
home block; pairs expand to every combination of the two sides.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .core import BlockId, Prefix, TimeBinning, VantagePoint, format_block, parse_block
from .oracle import Node, ReachabilityGraph

BlockPair = tuple[BlockId, BlockId]


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Delta:
    """Changes in force during ``[start, end)``."""

    start: int
    end: int
    cut: tuple[BlockPair, ...] = ()
    link: tuple[BlockPair, ...] = ()
    down: tuple[BlockId, ...] = ()
    up: tuple[BlockId, ...] = ()
    isolate: tuple[tuple[BlockId, ...], ...] = ()
    tag: str = ""

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ScenarioError(f"delta must have start < end, got [{self.start}, {self.end})")

    def covers(self, t: int) -> bool:
        return self.start <= t < self.end


@dataclass
class Scenario:
    nodes: tuple[Node, ...]
    edges: tuple[BlockPair, ...] = ()
    mesh: bool = False
    deltas: tuple[Delta, ...] = ()
    vps: dict[str, VantagePoint] = field(default_factory=dict)
    start: int = 0
    binning: TimeBinning = field(default_factory=TimeBinning)
    groups: dict[str, tuple[BlockId, ...]] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.deltas = tuple(sorted(self.deltas, key=lambda d: (d.start, d.end)))
        known = {n.block for n in self.nodes}
        for vp in self.vps.values():
            if vp.home_block is None or vp.home_block not in known:
                raise ScenarioError(f"vantage point {vp.vp_id} is not placed on a scenario node")
        homes = [vp.home_block for vp in self.vps.values()]
        if len(set(homes)) != len(homes):
            raise ScenarioError("vantage points must sit on distinct blocks")
        self._cache: dict[tuple[int, ...], ReachabilityGraph] = {}
        self._base_index = {n.block: i for i, n in enumerate(self.nodes)}

    @property
    def blocks(self) -> list[BlockId]:
        return [n.block for n in self.nodes]

    def vp_home(self, vp_id: str) -> BlockId:
        home = self.vps[vp_id].home_block
        assert home is not None
        return home

    def active_deltas(self, t: int) -> tuple[int, ...]:
        return tuple(i for i, d in enumerate(self.deltas) if d.covers(t))

    def change_points(self) -> list[int]:
        return sorted({self.start} | {d.start for d in self.deltas} | {d.end for d in self.deltas})

    def graph_at(self, t: int) -> ReachabilityGraph:
        key = self.active_deltas(t)
        graph = self._cache.get(key)
        if graph is None:
            graph = self._materialize([self.deltas[i] for i in key], key)
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[key] = graph
        return graph

    def _materialize(self, deltas: list[Delta], key: tuple[int, ...]) -> ReachabilityGraph:
        active = {n.block: n.active for n in self.nodes}
        listed = {frozenset(p) for p in self.edges if p[0] != p[1]}
        isolation: dict[BlockId, frozenset[int]] = {}
        for slot, d in zip(key, deltas):
            for b in d.down:
                active[b] = False
            for b in d.up:
                active[b] = True
            cut = {frozenset(p) for p in d.cut if p[0] != p[1]}
            link = {frozenset(p) for p in d.link if p[0] != p[1]}
            if self.mesh:
                listed |= cut
                listed -= link
            else:
                listed -= cut
                listed |= link
            for k, group in enumerate(d.isolate):
                tag = slot * 1024 + k
                for b in group:
                    isolation[b] = isolation.get(b, frozenset()) | {tag}
        nodes = [n if active[n.block] == n.active else _replace_active(n, active[n.block]) for n in self.nodes]
        pairs = [tuple(p) for p in listed]
        return ReachabilityGraph(nodes, pairs, mesh=self.mesh, isolation=isolation)


def _replace_active(node: Node, active: bool) -> Node:
    return Node(node.block, active, node.asn, node.prefix, node.label)


def _resolve(token: str, groups: Mapping[str, Iterable[BlockId]], vps: Mapping[str, BlockId]) -> list[BlockId]:
    if token.startswith("@"):
        try:
            return [vps[token[1:]]]
        except KeyError:
            raise ScenarioError(f"unknown vantage point {token!r}") from None
    if token in groups:
        return list(groups[token])
    return [parse_block(token)]


def _resolve_pairs(raw: Iterable[Any], groups, vps) -> tuple[BlockPair, ...]:
    out: list[BlockPair] = []
    for pair in raw:
        if len(pair) != 2:
            raise ScenarioError(f"edge must have two endpoints: {pair!r}")
        left = _resolve(pair[0], groups, vps)
        right = _resolve(pair[1], groups, vps)
        out.extend((a, b) for a in left for b in right if a != b)
    return tuple(out)


def _resolve_blocks(raw: Iterable[str], groups, vps) -> tuple[BlockId, ...]:
    out: list[BlockId] = []
    for token in raw:
        out.extend(_resolve(token, groups, vps))
    return tuple(out)


def scenario_from_dict(doc: Mapping[str, Any]) -> Scenario:
    groups: dict[str, list[BlockId]] = {k: [parse_block(b) for b in v] for k, v in doc.get("groups", {}).items()}
    nodes: list[Node] = []
    for entry in doc.get("nodes", []):
        prefix = Prefix.parse(entry["prefix"]) if entry.get("prefix") else None
        if "first" in entry:
            first = parse_block(entry["first"]).prefix24
            blocks = [BlockId(first + i) for i in range(int(entry["count"]))]
        else:
            blocks = [parse_block(entry["block"])]
        for b in blocks:
            nodes.append(Node(b, bool(entry.get("active", True)), entry.get("asn"), prefix, entry.get("label") or entry.get("group")))
        if entry.get("group"):
            groups.setdefault(entry["group"], []).extend(blocks)
    known = {n.block for n in nodes}
    vps: dict[str, VantagePoint] = {}
    for entry in doc.get("vps", []):
        home = parse_block(entry["block"])
        if home not in known:
            raise ScenarioError(f"vantage point {entry['id']} placed on unknown block {entry['block']}")
        vps[entry["id"]] = VantagePoint(entry["id"], entry.get("country", "??"), home)
    homes = {k: v.home_block for k, v in vps.items()}

    raw_edges = doc.get("edges", [])
    if isinstance(raw_edges, Mapping):
        mesh = bool(raw_edges.get("mesh", False))
        pair_list = raw_edges.get("missing" if mesh else "present", [])
    else:
        mesh, pair_list = False, raw_edges
    edges = _resolve_pairs(pair_list, groups, homes)

    deltas = []
    for d in doc.get("deltas", []):
        deltas.append(
            Delta(
                int(d["start"]),
                int(d["end"]),
                cut=_resolve_pairs(d.get("cut", []), groups, homes),
                link=_resolve_pairs(d.get("link", []), groups, homes),
                down=_resolve_blocks(d.get("down", []), groups, homes),
                up=_resolve_blocks(d.get("up", []), groups, homes),
                isolate=tuple(_resolve_blocks(g, groups, homes) for g in d.get("isolate", [])),
                tag=d.get("tag", ""),
            )
        )
    for b in [b for d in deltas for b in d.down + d.up] + [b for p in edges for b in p]:
        if b not in known:
            raise ScenarioError(f"unknown block {format_block(b)} referenced")
    binning = TimeBinning(**doc["binning"]) if "binning" in doc else TimeBinning()
    return Scenario(
        tuple(nodes),
        edges,
        mesh,
        tuple(deltas),
        vps,
        int(doc.get("start", 0)),
        binning,
        {k: tuple(v) for k, v in groups.items()},
        dict(doc.get("meta", {})),
    )


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    def pairs(ps: Iterable[BlockPair]) -> list[list[str]]:
        return [[format_block(a), format_block(b)] for a, b in ps]

    doc: dict[str, Any] = {
        "start": scenario.start,
        "binning": {"window": scenario.binning.window, "epoch": scenario.binning.epoch},
        "nodes": [
            {
                "block": format_block(n.block),
                **({"active": False} if not n.active else {}),
                **({"asn": n.asn} if n.asn is not None else {}),
                **({"prefix": str(n.prefix)} if n.prefix else {}),
                **({"label": n.label} if n.label else {}),
            }
            for n in scenario.nodes
        ],
        "edges": {"mesh": True, "missing": pairs(scenario.edges)} if scenario.mesh else pairs(scenario.edges),
        "deltas": [
            {
                "start": d.start,
                "end": d.end,
                "cut": pairs(d.cut),
                "link": pairs(d.link),
                "down": [format_block(b) for b in d.down],
                "up": [format_block(b) for b in d.up],
                "isolate": [[format_block(b) for b in g] for g in d.isolate],
                **({"tag": d.tag} if d.tag else {}),
            }
            for d in scenario.deltas
        ],
        "vps": [
            {"id": vp.vp_id, "block": format_block(vp.home_block), "country": vp.country}
            for vp in scenario.vps.values()
            if vp.home_block is not None
        ],
    }
    if scenario.meta:
        doc["meta"] = scenario.meta
    return doc


def load_scenario(path: str | Path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=1, sort_keys=True) + "\n", encoding="utf-8")
