"""Graph model of a radial distribution network and its topology predicates.

Buses are numbered 1..N with exactly one substation (slack) bus. Lines are
undirected and identified by their canonical endpoint pair (min, max), so
(11, 10) and (10, 11) always refer to the same line. A Configuration names
the set of open (deactivated) lines; everything not open is closed and
carries power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidLine

Pair = tuple[int, int]


def canonical_pair(a: int, b: int) -> Pair:
    """Return the orientation-insensitive (min, max) form of an endpoint pair."""
    a, b = int(a), int(b)
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Bus:
    """A node of the network: a load point, or the substation when is_substation."""

    id: int
    load: complex = 0j
    is_substation: bool = False


@dataclass(frozen=True)
class Line:
    """An undirected distribution line with per-unit series impedance.

    capacity is a real-power flow limit in per-unit; infinity means unbounded.
    """

    endpoints: Pair
    resistance: float
    reactance: float
    switchable: bool = True
    capacity: float = math.inf

    def __post_init__(self) -> None:
        a, b = self.endpoints
        object.__setattr__(self, "endpoints", canonical_pair(a, b))
        if self.endpoints[0] == self.endpoints[1]:
            raise ValueError(f"line endpoints must be distinct, got {self.endpoints}")
        if self.resistance < 0 or self.reactance < 0:
            raise ValueError(f"line {self.endpoints} has negative impedance")

    @property
    def impedance(self) -> complex:
        return complex(self.resistance, self.reactance)

    @property
    def impedance_magnitude(self) -> float:
        return abs(self.impedance)


@dataclass(frozen=True)
class Network:
    """Immutable network: buses 1..N, undirected lines, and the MVA base.

    The fully-closed graph must be connected; radial operation is obtained by
    opening lines through a Configuration, never by editing the network.
    initial_open_lines records the default operating configuration used as
    the starting point for reconfiguration (typically the tie switches).
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    base_power: float = 1.0
    name: str = ""
    initial_open_lines: frozenset[Pair] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "buses", tuple(sorted(self.buses, key=lambda b: b.id)))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(
            self, "initial_open_lines", frozenset(canonical_pair(*p) for p in self.initial_open_lines)
        )
        ids = [b.id for b in self.buses]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("bus ids must form the contiguous range 1..N")
        substations = [b.id for b in self.buses if b.is_substation]
        if len(substations) != 1:
            raise ValueError(f"expected exactly one substation bus, found {len(substations)}")
        seen: set[Pair] = set()
        for line in self.lines:
            a, b = line.endpoints
            if not (1 <= a <= len(ids) and 1 <= b <= len(ids)):
                raise ValueError(f"line {line.endpoints} references a missing bus")
            if line.endpoints in seen:
                raise ValueError(f"duplicate line {line.endpoints}")
            seen.add(line.endpoints)
        bad = self.initial_open_lines - seen
        if bad:
            raise ValueError(f"initial_open_lines not in network: {sorted(bad)}")
        full = Graph(nodes=tuple(ids), edges=tuple(seen))
        if count_components(full) != 1:
            raise ValueError("network is disconnected even with every line closed")

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def substation(self) -> int:
        return next(b.id for b in self.buses if b.is_substation)

    @property
    def line_pairs(self) -> tuple[Pair, ...]:
        return tuple(line.endpoints for line in self.lines)

    @property
    def lines_by_pair(self) -> dict[Pair, Line]:
        return {line.endpoints: line for line in self.lines}

    @property
    def switchable_pairs(self) -> frozenset[Pair]:
        return frozenset(line.endpoints for line in self.lines if line.switchable)

    def base_loads(self) -> list[complex]:
        """Per-unit complex demand indexed by bus order (bus 1 first)."""
        return [b.load for b in self.buses]

    def initial_configuration(self) -> "Configuration":
        return Configuration(network=self, open_lines=self.initial_open_lines)


@dataclass(frozen=True)
class Configuration:
    """One topology of a network, named by its set of open lines.

    Open pairs that do not exist in the network, or that point at
    non-switchable lines, mark the configuration invalid; they are reported,
    never repaired.
    """

    network: Network
    open_lines: frozenset[Pair]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "open_lines", frozenset(canonical_pair(*p) for p in self.open_lines)
        )

    @property
    def unknown_open_pairs(self) -> frozenset[Pair]:
        return self.open_lines - set(self.network.line_pairs)

    @property
    def nonswitchable_open_pairs(self) -> frozenset[Pair]:
        by_pair = self.network.lines_by_pair
        return frozenset(
            p for p in self.open_lines if p in by_pair and not by_pair[p].switchable
        )

    @property
    def is_valid(self) -> bool:
        return not self.unknown_open_pairs and not self.nonswitchable_open_pairs

    @property
    def closed_pairs(self) -> tuple[Pair, ...]:
        return tuple(p for p in self.network.line_pairs if p not in self.open_lines)


@dataclass(frozen=True)
class Graph:
    """A bare undirected graph view: node ids plus canonical edge pairs."""

    nodes: tuple[int, ...]
    edges: tuple[Pair, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", tuple(canonical_pair(*e) for e in self.edges))


class UnionFind:
    """Disjoint sets over arbitrary hashable items, with path compression."""

    def __init__(self, items=()) -> None:
        self._parent: dict = {x: x for x in items}
        self._rank: dict = {x: 0 for x in self._parent}

    def add(self, x) -> None:
        if x not in self._parent:
            self._parent[x] = x
            self._rank[x] = 0

    def find(self, x):
        root = x
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[x] != root:
            self._parent[x], x = root, self._parent[x]
        return root

    def union(self, a, b) -> bool:
        """Merge the sets of a and b; False if they were already joined."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self._rank[ra] < self._rank[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        if self._rank[ra] == self._rank[rb]:
            self._rank[ra] += 1
        return True

    def component_count(self) -> int:
        return sum(1 for x in self._parent if self._parent[x] == x)

    def copy(self) -> "UnionFind":
        dup = UnionFind()
        dup._parent = dict(self._parent)
        dup._rank = dict(self._rank)
        return dup


def closed_graph(config: Configuration) -> Graph:
    """The subgraph of lines still carrying power: every line not opened.

    Raises InvalidLine when the configuration opens a pair the network does
    not have; a bad pair is an error to surface, not an edge to ignore.
    """
    unknown = config.unknown_open_pairs
    if unknown:
        raise InvalidLine(f"open lines not present in network: {sorted(unknown)}")
    return Graph(
        nodes=tuple(b.id for b in config.network.buses),
        edges=config.closed_pairs,
    )


def count_components(graph: Graph) -> int:
    """Number of connected components, >= 1 for any non-empty node set."""
    uf = UnionFind(graph.nodes)
    for a, b in graph.edges:
        uf.union(a, b)
    return uf.component_count()


def count_cycles(graph: Graph) -> int:
    """Dimension of the cycle space: |E| - |N| + components; 0 iff a forest."""
    return len(graph.edges) - len(graph.nodes) + count_components(graph)


def is_radial(config: Configuration) -> bool:
    """True iff the closed graph is a spanning tree of the network.

    Both the edge count (N - 1) and connectedness are checked; the count
    alone passes a disconnected graph that hides a cycle.
    """
    graph = closed_graph(config)
    n = len(graph.nodes)
    return len(graph.edges) == n - 1 and count_components(graph) == 1


def adjacency(graph: Graph) -> dict[int, list[int]]:
    """Neighbor lists for traversals; nodes with no edges map to []."""
    adj: dict[int, list[int]] = {n: [] for n in graph.nodes}
    for a, b in graph.edges:
        adj[a].append(b)
        adj[b].append(a)
    return adj
