"""Steady-state solution of a radial configuration by backward/forward sweep.

The sweep aggregates branch currents from the leaves toward the substation,
then propagates voltage drops from the substation outward, repeating until
the largest voltage change falls below tolerance. All math is per-unit with
a flat 1.0 start; the substation is the slack bus and holds 1.0 exactly.
Reported loss is converted to kW through the network's MVA base.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

from .errors import NotRadial
from .network import Configuration, Network, Pair, adjacency, closed_graph, is_radial

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 100


@dataclass(frozen=True)
class PowerFlowResult:
    """Solved operating state of one radial configuration.

    voltages are per-bus magnitudes indexed by bus id - 1; currents and
    line_flows are keyed by canonical closed-line pair. loss_pu, slack_power
    and total_load keep the per-unit bookkeeping needed for the balance
    check; total_loss is the same loss in kW.
    """

    voltages: tuple[float, ...]
    currents: dict[Pair, float]
    total_loss: float
    converged: bool
    iterations: int
    loss_pu: float
    slack_power: complex
    total_load: complex
    line_flows: dict[Pair, float]


@dataclass(frozen=True)
class ConstraintReport:
    """Operational-constraint audit of a solved configuration."""

    balance_residual: float
    overloaded_lines: tuple[Pair, ...]
    voltage_violations: tuple[tuple[int, float], ...]
    radial: bool


@lru_cache(maxsize=16384)
def _tree_structure(network: Network, open_lines: frozenset[Pair]):
    """Root the closed graph at the substation; cached per configuration.

    Returns (order, parent, parent_pair, impedance) where order is a BFS
    ordering with the substation first and parent/* are aligned with it.
    """
    config = Configuration(network=network, open_lines=open_lines)
    if not is_radial(config):
        raise NotRadial(
            f"configuration with open lines {sorted(open_lines)} is not radial"
        )
    graph = closed_graph(config)
    adj = adjacency(graph)
    by_pair = network.lines_by_pair
    root = network.substation

    order = [root]
    parent = {root: 0}
    seen = {root}
    head = 0
    while head < len(order):
        node = order[head]
        head += 1
        for nxt in adj[node]:
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = node
                order.append(nxt)

    parents = tuple(parent[n] for n in order)
    pairs = tuple(
        (min(n, parent[n]), max(n, parent[n])) if n != root else (0, 0) for n in order
    )
    impedances = tuple(
        by_pair[pairs[i]].impedance if i else 0j for i in range(len(order))
    )
    return tuple(order), parents, pairs, impedances


def _normalize_loads(network: Network, loads) -> list[complex]:
    n = network.n_buses
    if isinstance(loads, Mapping):
        return [complex(loads.get(i, 0j)) for i in range(1, n + 1)]
    seq: Sequence = loads
    if len(seq) != n:
        raise ValueError(f"expected {n} loads, got {len(seq)}")
    return [complex(v) for v in seq]


def solve(
    config: Configuration,
    loads,
    tol: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> PowerFlowResult:
    """Run the backward/forward sweep on a radial configuration.

    loads is a sequence of per-unit complex demands aligned with bus ids
    1..N, or a mapping from bus id; the substation's entry is ignored (it
    is the slack injection). Raises NotRadial when the configuration is
    not a spanning tree. When the iteration cap is hit the partial state
    is returned with converged=False rather than raised.
    """
    network = config.network
    order, parents, pairs, impedances = _tree_structure(network, config.open_lines)
    demand = _normalize_loads(network, loads)
    root = order[0]
    demand[root - 1] = 0j

    n = len(order)
    index_of = {bus: i for i, bus in enumerate(order)}
    load_by_pos = [demand[bus - 1] for bus in order]

    volts = [1.0 + 0j] * n
    converged = False
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        amps = [
            (load_by_pos[i] / volts[i]).conjugate() if load_by_pos[i] != 0j else 0j
            for i in range(n)
        ]
        # leaves-first accumulation: amps[i] becomes the branch current into i
        for i in range(n - 1, 0, -1):
            amps[index_of[parents[i]]] += amps[i]
        delta = 0.0
        for i in range(1, n):
            new_v = volts[index_of[parents[i]]] - impedances[i] * amps[i]
            change = abs(new_v - volts[i])
            if change > delta:
                delta = change
            volts[i] = new_v
        if delta < tol:
            converged = True
            break

    # final backward pass so currents, flows and loss are consistent with
    # the reported voltages
    amps = [
        (load_by_pos[i] / volts[i]).conjugate() if load_by_pos[i] != 0j else 0j
        for i in range(n)
    ]
    for i in range(n - 1, 0, -1):
        amps[index_of[parents[i]]] += amps[i]

    by_pair = network.lines_by_pair
    currents: dict[Pair, float] = {}
    line_flows: dict[Pair, float] = {}
    loss_pu = 0.0
    for i in range(1, n):
        pair = pairs[i]
        magnitude = abs(amps[i])
        currents[pair] = magnitude
        sending_v = volts[index_of[parents[i]]]
        line_flows[pair] = (sending_v * amps[i].conjugate()).real
        loss_pu += magnitude * magnitude * by_pair[pair].resistance

    slack_power = sum(
        (amps[i] for i in range(1, n) if parents[i] == root), start=0j
    ).conjugate() * volts[0]

    voltages = [0.0] * network.n_buses
    for i, bus in enumerate(order):
        voltages[bus - 1] = abs(volts[i])

    return PowerFlowResult(
        voltages=tuple(voltages),
        currents=currents,
        total_loss=loss_pu * network.base_power * 1000.0,
        converged=converged,
        iterations=iterations,
        loss_pu=loss_pu,
        slack_power=slack_power,
        total_load=sum(demand, start=0j),
        line_flows=line_flows,
    )


def system_loss(config: Configuration, loads, **solve_kwargs) -> float:
    """Total real loss of the configuration in kW."""
    return solve(config, loads, **solve_kwargs).total_loss


def check_constraints(
    config: Configuration,
    result: PowerFlowResult,
    v_min: float = 0.9,
    v_max: float = 1.1,
) -> ConstraintReport:
    """Audit a solved state against the operating constraints.

    balance_residual is |generation - demand - loss| in per-unit real power;
    overloaded lines exceed their real-power capacity; voltage violations
    fall outside [v_min, v_max].
    """
    balance = abs(result.slack_power.real - result.total_load.real - result.loss_pu)
    by_pair = config.network.lines_by_pair
    overloaded = tuple(
        pair
        for pair, flow in sorted(result.line_flows.items())
        if abs(flow) > by_pair[pair].capacity
    )
    violations = tuple(
        (bus_id, v)
        for bus_id, v in enumerate(result.voltages, start=1)
        if not (v_min <= v <= v_max)
    )
    return ConstraintReport(
        balance_residual=balance,
        overloaded_lines=overloaded,
        voltage_violations=violations,
        radial=is_radial(config),
    )
