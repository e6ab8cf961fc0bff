"""Penalty scoring of parsed responses against optimal labels.

Three structural penalties are computed from the predicted open-line set:
cycles left in the resulting closed graph, extra connected components,
and predicted lines absent from the label. Each raw count is scaled into
[0,1] (cycles by the number of available lines, the other two by the
number of predicted lines) and combined with caller-supplied weights on
top of an opaque base loss. Responses from which nothing could be parsed,
or which predict no lines at all, take the maximum penalty: every scaled
component pinned to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ZeroPredictedLines
from .network import (
    Graph,
    Network,
    Pair,
    canonical_pair,
    count_components,
    count_cycles,
)
from .responses import IMPROPER, ParsedResponse

DEFAULT_LAMBDAS = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class LossComponents:
    """Raw and scaled penalty terms plus their weighted total.

    total = reg + lambdas[0]*cycle_scaled + lambdas[1]*subgraph_scaled
    + lambdas[2]*subconfig_scaled. improper marks the max-penalty path,
    where raw counts are left at zero because no graph was built.
    """

    cycle: float
    subgraph: float
    subconfig: float
    cycle_scaled: float
    subgraph_scaled: float
    subconfig_scaled: float
    lambdas: tuple[float, float, float]
    reg: float
    total: float
    improper: bool = False


def _predicted_pairs(parsed: ParsedResponse) -> list[Pair]:
    return list(dict.fromkeys(parsed.open_lines))


def _closed_graph_after(parsed: ParsedResponse, network: Network) -> Graph:
    available = network.line_pairs
    opened = {p for p in _predicted_pairs(parsed) if p in set(available)}
    return Graph(
        nodes=tuple(range(1, network.n_buses + 1)),
        edges=tuple(p for p in available if p not in opened),
    )


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))


def cycle_loss(parsed: ParsedResponse, network: Network) -> tuple[float, float]:
    """Cycles remaining after opening the predicted lines.

    Invalid predicted lines cannot be opened and are ignored here; they
    are charged by subconfig_loss instead. Scaled by available line count.
    """
    closed = _closed_graph_after(parsed, network)
    raw = float(count_cycles(closed))
    available = len(network.line_pairs)
    if available == 0:
        return raw, _clamp(raw)
    return raw, _clamp(raw / available)


def subgraph_loss(parsed: ParsedResponse, network: Network) -> tuple[float, float]:
    """Connected components beyond the first, scaled by predicted lines."""
    predicted = _predicted_pairs(parsed)
    if not predicted:
        raise ZeroPredictedLines("response predicts no open lines")
    closed = _closed_graph_after(parsed, network)
    raw = float(count_components(closed) - 1)
    return raw, _clamp(raw / len(predicted))


def subconfig_loss(parsed: ParsedResponse, label) -> tuple[float, float]:
    """Predicted open lines absent from the label, scaled by predicted lines.

    Lines that do not exist in the network are necessarily absent from the
    label, so they are charged here without special treatment.
    """
    predicted = _predicted_pairs(parsed)
    if not predicted:
        raise ZeroPredictedLines("response predicts no open lines")
    label_set = {canonical_pair(*p) for p in label}
    raw = float(sum(1 for p in predicted if p not in label_set))
    return raw, _clamp(raw / len(predicted))


def total_loss(
    cycle: tuple[float, float],
    subgraph: tuple[float, float],
    subconfig: tuple[float, float],
    reg: float = 0.0,
    lambdas: tuple[float, float, float] = DEFAULT_LAMBDAS,
    improper: bool = False,
) -> LossComponents:
    """Combine the three (raw, scaled) pairs with weights over a base loss.

    The improper path pins every scaled component to 1, the attainable
    maximum, regardless of the supplied pairs.
    """
    if improper:
        cycle_s = subgraph_s = subconfig_s = 1.0
    else:
        cycle_s, subgraph_s, subconfig_s = cycle[1], subgraph[1], subconfig[1]
    total = (
        reg
        + lambdas[0] * cycle_s
        + lambdas[1] * subgraph_s
        + lambdas[2] * subconfig_s
    )
    return LossComponents(
        cycle=cycle[0],
        subgraph=subgraph[0],
        subconfig=subconfig[0],
        cycle_scaled=cycle_s,
        subgraph_scaled=subgraph_s,
        subconfig_scaled=subconfig_s,
        lambdas=tuple(lambdas),
        reg=reg,
        total=total,
        improper=improper,
    )


def score_sample(
    parsed: ParsedResponse,
    network: Network,
    label,
    reg: float = 0.0,
    lambdas: tuple[float, float, float] = DEFAULT_LAMBDAS,
) -> LossComponents:
    """Score one parsed response against its label's open-line set.

    label is any iterable of canonical pairs. Improper parses, and parses
    that predict zero open lines, get the maximum penalty.
    """
    zero = (0.0, 0.0)
    if parsed.status == IMPROPER:
        return total_loss(zero, zero, zero, reg, lambdas, improper=True)
    try:
        cycle = cycle_loss(parsed, network)
        subgraph = subgraph_loss(parsed, network)
        subconfig = subconfig_loss(parsed, label)
    except ZeroPredictedLines:
        return total_loss(zero, zero, zero, reg, lambdas, improper=True)
    return total_loss(cycle, subgraph, subconfig, reg, lambdas)
