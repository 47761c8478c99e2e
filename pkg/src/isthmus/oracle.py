"""Ground truth: bidirectional-reachability graphs, their components and labels.

A graph is either *sparse* (``edges`` lists the links that exist) or a
*mesh* (``edges`` lists the links that are missing from an otherwise full
mesh).  Independently of that, nodes may carry isolation labels: two nodes
whose labels differ cannot reach each other at all.  The simulator uses
meshes with a handful of missing links, which keeps 10k-block graphs cheap.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Mapping

import numpy as np

from .core import BlockId, ObservationState, Prefix

Pair = frozenset  # unordered pair of BlockIds


class TruthLabel(str, Enum):
    CORE_FULL = "core"
    PENINSULA = "peninsula"
    ISLAND = "island"
    ADDRESS_ISLAND = "address_island"
    OUT = "out"


ISLAND_LABELS = frozenset({TruthLabel.ISLAND, TruthLabel.ADDRESS_ISLAND})


@dataclass(frozen=True)
class Node:
    block: BlockId
    active: bool = True
    asn: int | None = None
    prefix: Prefix | None = None
    label: str | None = None


class UnknownNode(KeyError):
    pass


class ReachabilityGraph:
    """Immutable snapshot of who can bidirectionally reach whom."""

    def __init__(
        self,
        nodes: Iterable[Node],
        edges: Iterable[tuple[BlockId, BlockId]] = (),
        *,
        mesh: bool = False,
        isolation: Mapping[BlockId, frozenset[int]] | None = None,
    ) -> None:
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self.mesh = mesh
        self.index: dict[BlockId, int] = {}
        for i, n in enumerate(self.nodes):
            if n.block in self.index:
                raise ValueError(f"duplicate node {n.block}")
            self.index[n.block] = i
        self._adj: dict[int, set[int]] = {}
        for u, v in edges:
            if u == v:
                continue
            iu, iv = self._idx(u), self._idx(v)
            self._adj.setdefault(iu, set()).add(iv)
            self._adj.setdefault(iv, set()).add(iu)
        self._iso: tuple[frozenset[int], ...] = tuple(
            (isolation or {}).get(n.block, frozenset()) for n in self.nodes
        )
        codes: dict[frozenset[int], int] = {}
        self._iso_code = np.array([codes.setdefault(iso, len(codes)) for iso in self._iso], dtype=np.int64)
        self._active = np.array([n.active for n in self.nodes], dtype=bool)

    def _idx(self, block: BlockId) -> int:
        try:
            return self.index[block]
        except KeyError:
            raise UnknownNode(str(block)) from None

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, block: BlockId) -> bool:
        return block in self.index

    def node(self, block: BlockId) -> Node:
        return self.nodes[self._idx(block)]

    def is_active(self, block: BlockId) -> bool:
        return bool(self._active[self._idx(block)])

    @property
    def active_blocks(self) -> list[BlockId]:
        return [n.block for n in self.nodes if n.active]

    def _linked(self, i: int, j: int) -> bool:
        if i == j or self._iso[i] != self._iso[j]:
            return False
        listed = j in self._adj.get(i, ())
        return not listed if self.mesh else listed

    def has_edge(self, u: BlockId, v: BlockId) -> bool:
        """True when u and v can each initiate communication with the other."""
        return self._linked(self._idx(u), self._idx(v))

    def edges(self) -> Iterator[Pair]:
        """Present edges; quadratic for meshes."""
        n = len(self.nodes)
        if self.mesh:
            for i in range(n):
                for j in range(i + 1, n):
                    if self._linked(i, j):
                        yield frozenset((self.nodes[i].block, self.nodes[j].block))
        else:
            for i, nbrs in self._adj.items():
                for j in nbrs:
                    if i < j and self._linked(i, j):
                        yield frozenset((self.nodes[i].block, self.nodes[j].block))

    def reach_vector(self, source: BlockId) -> np.ndarray:
        """Boolean vector over nodes: which targets ``source`` would see Up."""
        i = self._idx(source)
        same = self._iso_code == self._iso_code[i]
        listed = np.zeros(len(self.nodes), bool)
        nbrs = self._adj.get(i)
        if nbrs:
            listed[list(nbrs)] = True
        linked = same & ~listed if self.mesh else same & listed
        linked[i] = True
        return linked & self._active

    def _take_neighbors(self, i: int, pool: set[int]) -> list[int]:
        """Remove and return the members of ``pool`` linked to i."""
        nbrs = self._adj.get(i, set())
        iso = self._iso[i]
        if self.mesh:
            found = [j for j in pool if j not in nbrs and self._iso[j] == iso]
        else:
            found = [j for j in nbrs if j in pool and self._iso[j] == iso]
        pool.difference_update(found)
        return found


def connected_components(graph: ReachabilityGraph) -> list[frozenset[BlockId]]:
    """Components of the active subgraph, largest first.

    Edges are bidirectional, so strong connectivity is ordinary connectivity.
    Meshes use complement BFS, linear in nodes plus missing links.
    """
    unvisited = {i for i, n in enumerate(graph.nodes) if n.active}
    components: list[frozenset[BlockId]] = []
    for seed in range(len(graph.nodes)):
        if seed not in unvisited:
            continue
        unvisited.discard(seed)
        queue = deque([seed])
        members = [seed]
        while queue:
            found = graph._take_neighbors(queue.popleft(), unvisited)
            members.extend(found)
            queue.extend(found)
        components.append(frozenset(graph.nodes[i].block for i in members))
    components.sort(key=lambda c: (-len(c), min(c)))
    return components


def internet_core(graph: ReachabilityGraph, components: list[frozenset[BlockId]] | None = None) -> frozenset[BlockId] | None:
    """The component holding strictly more than half of all active nodes, if any."""
    active = sum(1 for n in graph.nodes if n.active)
    comps = connected_components(graph) if components is None else components
    winners = [c for c in comps if 2 * len(c) > active]
    if len(winners) > 1:  # impossible by counting; kept as a hard check
        raise AssertionError("more than one majority component")
    return winners[0] if winners else None


@dataclass(frozen=True)
class Labeling:
    labels: dict[BlockId, TruthLabel]
    fragmented: bool = False

    def __getitem__(self, block: BlockId) -> TruthLabel:
        return self.labels[block]

    def __len__(self) -> int:
        return len(self.labels)

    def with_label(self, label: TruthLabel) -> set[BlockId]:
        return {b for b, lab in self.labels.items() if lab is label}


_NO_CORE = object()


def truth_labels(graph: ReachabilityGraph, core: frozenset[BlockId] | None | object = _NO_CORE) -> Labeling:
    """Label every node core/peninsula/island/address-island/out.

    A core member is a peninsula when it lacks a direct edge to at least one
    other core member.  Without a core every active node is an island and the
    labeling is flagged as fragmented.
    """
    comps = connected_components(graph)
    if core is _NO_CORE:
        core = internet_core(graph, comps)
    labels: dict[BlockId, TruthLabel] = {}
    for n in graph.nodes:
        if not n.active:
            labels[n.block] = TruthLabel.OUT
    core_set: frozenset[BlockId] = core or frozenset()  # type: ignore[assignment]
    for comp in comps:
        if core_set and comp == core_set:
            continue
        label = TruthLabel.ISLAND if len(comp) > 1 else TruthLabel.ADDRESS_ISLAND
        for b in comp:
            labels[b] = label
    if core_set:
        core_idx = {graph.index[b] for b in core_set}
        for b in core_set:
            i = graph.index[b]
            labels[b] = TruthLabel.PENINSULA if _misses_core_member(graph, i, core_idx) else TruthLabel.CORE_FULL
    return Labeling(labels, fragmented=not core_set)


def _misses_core_member(graph: ReachabilityGraph, i: int, core_idx: set[int]) -> bool:
    nbrs = graph._adj.get(i, set())
    if graph.mesh:
        # core members share one isolation label, so only listed gaps matter
        return any(j in core_idx for j in nbrs)
    return len(nbrs & core_idx) < len(core_idx) - 1


def observe(graph: ReachabilityGraph, vp_block: BlockId, target: BlockId) -> ObservationState:
    """What a lossless probe from ``vp_block`` to ``target`` reports."""
    graph._idx(vp_block)
    if not graph.is_active(target):
        return ObservationState.DOWN
    if vp_block == target or graph.has_edge(vp_block, target):
        return ObservationState.UP
    return ObservationState.DOWN


def majority_control(allocations: Mapping[str, float], total: float) -> list[tuple[str, float]]:
    """Entities holding more than half of ``total``, with their shares (largest first)."""
    if total <= 0:
        raise ValueError("total must be positive")
    for name, count in allocations.items():
        if count < 0:
            raise ValueError(f"negative allocation for {name}")
        if count > total:
            raise ValueError(f"allocation for {name} exceeds total")
    shares = [(name, count / total) for name, count in allocations.items()]
    return sorted([s for s in shares if s[1] > 0.5], key=lambda s: -s[1])
