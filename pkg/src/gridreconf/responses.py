"""Parsing of model responses into open lines, voltages and loss.

Raw text is first cleaned (invalid characters, whitespace runs, stray
commas), then three labeled sections are located by pattern. A response
with all three sections is proper, with some of them partial, with none
improper. Parsing is total: arbitrary input yields a classification,
never an exception.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .network import Network, Pair, canonical_pair

PROPER = "proper"
PARTIAL = "partial"
IMPROPER = "improper"

# section labels tolerate a qualifier word so "Updated open lines" and
# "Extracted open lines" both match; the colon is required
_QUALIFIER = r"(?:(?:updated|extracted|generated|new|optimal|final)\s+)?"
_CORES = {
    "open_lines": r"open\s+lines?",
    "node_voltages": r"node\s+voltages?",
    "system_loss": r"system\s+loss",
}
_ANY_LABEL = rf"{_QUALIFIER}(?:{'|'.join(_CORES.values())})\s*:"
_SECTION_PATTERNS = {
    name: re.compile(
        rf"{_QUALIFIER}{core}\s*:\s*(?P<body>.*?)\s*(?={_ANY_LABEL}|$)",
        re.IGNORECASE | re.DOTALL,
    )
    for name, core in _CORES.items()
}

_PAIR = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")
_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


@dataclass(frozen=True)
class ParsedResponse:
    """Extraction result for one response text."""

    open_lines: tuple[Pair, ...]
    node_voltages: tuple[float, ...]
    system_loss: float | None
    status: str
    raw_length: int
    diagnostics: tuple[str, ...] = ()
    sections_matched: tuple[str, ...] = ()


def _clean_steps(raw: str) -> tuple[str, tuple[str, ...]]:
    steps = (
        (
            "removed_invalid_characters",
            lambda t: "".join(c for c in t if c.isprintable() or c.isspace()),
        ),
        ("collapsed_whitespace", lambda t: re.sub(r"\s+", " ", t).strip()),
        ("removed_space_before_delimiter", lambda t: re.sub(r" (?=[,)])", "", t)),
        ("collapsed_repeated_commas", lambda t: re.sub(r",(?: ?,)+", ",", t)),
        ("removed_comma_before_paren", lambda t: re.sub(r",(?=\))", "", t)),
        ("removed_trailing_commas", lambda t: re.sub(r"[, ]+$", "", t)),
    )
    text = raw
    applied = []
    for name, step in steps:
        new_text = step(text)
        if new_text != text:
            applied.append(name)
        text = new_text
    return text, tuple(applied)


def clean(raw: str) -> str:
    """Normalize response text; idempotent, never touches digits or labels."""
    return _clean_steps(raw)[0]


def extract(raw: str) -> ParsedResponse:
    """Locate the three output sections and pull their values.

    Pairs are canonicalized to (min, max) and kept in order of appearance,
    duplicates included; validation decides what to do with them. When a
    section repeats, the first occurrence wins. Never raises on any input.
    """
    text = raw if isinstance(raw, str) else str(raw)
    cleaned, diagnostics = _clean_steps(text)

    bodies = {}
    for name, pattern in _SECTION_PATTERNS.items():
        match = pattern.search(cleaned)
        if match is not None:
            bodies[name] = match.group("body")

    open_lines: tuple[Pair, ...] = ()
    if "open_lines" in bodies:
        open_lines = tuple(
            canonical_pair(int(a), int(b))
            for a, b in _PAIR.findall(bodies["open_lines"])
        )

    node_voltages: tuple[float, ...] = ()
    if "node_voltages" in bodies:
        node_voltages = tuple(
            float(tok) for tok in _NUMBER.findall(bodies["node_voltages"])
        )

    system_loss = None
    if "system_loss" in bodies:
        first = _NUMBER.search(bodies["system_loss"])
        if first is not None:
            system_loss = float(first.group(0))

    if len(bodies) == len(_SECTION_PATTERNS):
        status = PROPER
    elif bodies:
        status = PARTIAL
    else:
        status = IMPROPER

    return ParsedResponse(
        open_lines=open_lines,
        node_voltages=node_voltages,
        system_loss=system_loss,
        status=status,
        raw_length=len(text),
        diagnostics=diagnostics,
        sections_matched=tuple(name for name in _SECTION_PATTERNS if name in bodies),
    )


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def validate(
    parsed: ParsedResponse, network: Network | None, n_buses: int | None = None
) -> list[Violation]:
    """Check extracted values against the network they claim to describe.

    Reports invalid_edge, duplicate_pair, wrong_voltage_count and
    negative_loss. Informational only: parse status never changes here.
    Improper responses have nothing to validate and are rejected. Without a
    network only the counts are checked, against `n_buses`.
    """
    if parsed.status == IMPROPER:
        raise ValueError("improper responses carry no extracted values to validate")
    expected_buses = network.n_buses if n_buses is None else n_buses
    available = None if network is None else set(network.line_pairs)

    violations = []
    seen = set()
    for pair in parsed.open_lines:
        if available is not None and pair not in available and pair not in seen:
            violations.append(
                Violation(kind="invalid_edge", detail=f"line {pair} is not in the network")
            )
        if pair in seen:
            violations.append(
                Violation(kind="duplicate_pair", detail=f"line {pair} appears twice")
            )
        seen.add(pair)
    if len(parsed.node_voltages) != expected_buses:
        violations.append(
            Violation(
                kind="wrong_voltage_count",
                detail=(
                    f"expected {expected_buses} voltages, "
                    f"got {len(parsed.node_voltages)}"
                ),
            )
        )
    if parsed.system_loss is not None and parsed.system_loss < 0:
        violations.append(
            Violation(kind="negative_loss", detail=f"loss {parsed.system_loss} < 0")
        )
    return violations
