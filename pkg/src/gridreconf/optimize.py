"""Loss-minimizing reconfiguration over radial configurations.

Two searches are provided. The exhaustive one enumerates every spanning
tree (guarded by a Kirchhoff matrix-tree count so it refuses oversized
networks) and is the ground-truth oracle for small systems. Branch
exchange is the scalable label generator: starting from a radial
configuration it repeatedly closes one open line and re-opens the best
line on the resulting cycle, accepting only strict loss improvements, so
the loss sequence is monotone and termination is guaranteed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotRadial, TooLarge
from .network import (
    Configuration,
    Network,
    Pair,
    UnionFind,
    adjacency,
    closed_graph,
)
from .powerflow import solve

DEFAULT_MAX_TREES = 1_000_000
# relative slack under which two losses count as tied, so float noise on
# symmetric networks cannot hide a lexicographic tie-break
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class OptimizationResult:
    """Best configuration found plus search bookkeeping.

    evaluations counts candidate configurations whose loss was computed,
    excluding the starting point.
    """

    open_lines: frozenset[Pair]
    loss: float
    method: str
    evaluations: int


def spanning_tree_count(network: Network) -> int:
    """Number of spanning trees of the fully-closed network (matrix-tree)."""
    n = network.n_buses
    laplacian = np.zeros((n, n))
    for a, b in network.line_pairs:
        laplacian[a - 1, a - 1] += 1.0
        laplacian[b - 1, b - 1] += 1.0
        laplacian[a - 1, b - 1] -= 1.0
        laplacian[b - 1, a - 1] -= 1.0
    if n == 1:
        return 1
    minor = laplacian[:-1, :-1]
    sign, logdet = np.linalg.slogdet(minor)
    if sign <= 0:
        return 0
    return int(round(np.exp(logdet)))


def _connectable(uf: UnionFind, edges: list[Pair], start: int) -> bool:
    probe = uf.copy()
    for i in range(start, len(edges)):
        probe.union(*edges[i])
        if probe.component_count() == 1:
            return True
    return probe.component_count() == 1


def _enumerate_open_sets(network: Network):
    """Yield every open-line set whose complement is a spanning tree.

    Non-switchable lines are forced closed; the include/exclude recursion
    over switchable lines prunes branches that can no longer connect the
    remaining components.
    """
    nodes = list(range(1, network.n_buses + 1))
    forced = [p for p in network.line_pairs if not network.lines_by_pair[p].switchable]
    candidates = sorted(network.switchable_pairs)

    uf = UnionFind(nodes)
    for pair in forced:
        if not uf.union(*pair):
            return
    if not _connectable(uf, candidates, 0):
        return

    chosen: list[Pair] = []

    def recurse(i: int, uf: UnionFind):
        if uf.component_count() == 1:
            yield frozenset(c for c in candidates if c not in set(chosen))
            return
        if i == len(candidates):
            return
        a, b = candidates[i]
        if uf.find(a) != uf.find(b):
            with_edge = uf.copy()
            with_edge.union(a, b)
            chosen.append(candidates[i])
            yield from recurse(i + 1, with_edge)
            chosen.pop()
        if _connectable(uf, candidates, i + 1):
            yield from recurse(i + 1, uf)

    yield from recurse(0, uf)


def optimize_exhaustive(
    network: Network,
    loads,
    max_trees: int = DEFAULT_MAX_TREES,
    **solve_kwargs,
) -> OptimizationResult:
    """Global optimum by enumerating every radial configuration.

    Raises TooLarge when the matrix-tree count exceeds max_trees. Ties in
    loss resolve to the lexicographically smallest sorted open-line set.
    """
    count = spanning_tree_count(network)
    if count > max_trees:
        raise TooLarge(
            f"{count} spanning trees exceed the cap of {max_trees}; "
            "use branch exchange instead"
        )

    best_open: tuple[Pair, ...] | None = None
    best_loss = 0.0
    evaluations = 0
    for open_set in _enumerate_open_sets(network):
        config = Configuration(network=network, open_lines=open_set)
        loss = solve(config, loads, **solve_kwargs).total_loss
        evaluations += 1
        key = tuple(sorted(open_set))
        tie_band = _TIE_RTOL * max(1.0, abs(best_loss))
        if (
            best_open is None
            or loss < best_loss - tie_band
            or (loss <= best_loss + tie_band and key < best_open)
        ):
            best_open = key
            best_loss = loss
    if best_open is None:
        raise NotRadial("network has no spanning tree")
    return OptimizationResult(
        open_lines=frozenset(best_open),
        loss=best_loss,
        method="exhaustive",
        evaluations=evaluations,
    )


def _cycle_path(config: Configuration, pair: Pair) -> list[Pair]:
    """Tree edges on the unique path between the endpoints of an open line."""
    adj = adjacency(closed_graph(config))
    a, b = pair
    parent: dict[int, int] = {a: 0}
    queue = [a]
    head = 0
    while head < len(queue):
        node = queue[head]
        head += 1
        if node == b:
            break
        for nxt in adj[node]:
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    path = []
    node = b
    while node != a:
        prev = parent[node]
        path.append((min(node, prev), max(node, prev)))
        node = prev
    return path


def optimize_branch_exchange(
    network: Network,
    loads,
    start: Configuration | None = None,
    **solve_kwargs,
) -> OptimizationResult:
    """Local search: best strictly-improving single branch exchange, repeated.

    Each pass closes one open switchable line, walks the single cycle this
    creates, and considers re-opening each switchable line on it. The best
    strict improvement over the current loss is applied; on equal-loss
    candidates the first in scan order (open lines ascending, then cycle
    edges ascending) wins. Stops at a local optimum. Raises NotRadial if
    the starting configuration is not radial.
    """
    if start is None:
        start = network.initial_configuration()
    if start.network is not network:
        start = Configuration(network=network, open_lines=start.open_lines)

    cache: dict[frozenset[Pair], float] = {}
    evaluations = 0

    def loss_of(open_set: frozenset[Pair]) -> float:
        nonlocal evaluations
        evaluations += 1
        if open_set not in cache:
            config = Configuration(network=network, open_lines=open_set)
            cache[open_set] = solve(config, loads, **solve_kwargs).total_loss
        return cache[open_set]

    current = frozenset(start.open_lines)
    current_config = Configuration(network=network, open_lines=current)
    current_loss = solve(current_config, loads, **solve_kwargs).total_loss
    switchable = network.switchable_pairs

    while True:
        tie_band = _TIE_RTOL * max(1.0, abs(current_loss))
        best_move: frozenset[Pair] | None = None
        best_loss = current_loss
        for open_pair in sorted(current):
            cycle = _cycle_path(current_config, open_pair)
            for candidate in sorted(cycle):
                if candidate not in switchable:
                    continue
                trial = (current - {open_pair}) | {candidate}
                loss = loss_of(trial)
                if loss < current_loss - tie_band and loss < best_loss:
                    best_loss = loss
                    best_move = trial
        if best_move is None:
            break
        current = best_move
        current_loss = best_loss
        current_config = Configuration(network=network, open_lines=current)

    return OptimizationResult(
        open_lines=current,
        loss=current_loss,
        method="branch_exchange",
        evaluations=evaluations,
    )
