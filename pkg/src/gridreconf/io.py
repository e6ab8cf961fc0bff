"""File formats: network JSON, dataset-sample CSV, and JSONL helpers.

The network document is JSON with three top-level keys: ``buses`` (id,
p_load, q_load, is_substation), ``lines`` (from, to, r, x, switchable,
capacity) and ``base_power`` in MVA. Optional keys ``name`` and
``initial_open_lines`` carry the network label and the default open set.

Dataset samples round-trip through a CSV layout whose columns mirror the
ten retained sample fields; list-valued cells are Python literals so that
``ast.literal_eval`` reads them back exactly.
"""

from __future__ import annotations

import ast
import csv
import json
import math
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from .network import Bus, Line, Network, canonical_pair

SAMPLE_COLUMNS = (
    "buses",
    "lines",
    "line_impedances",
    "existing_open_lines",
    "existing_node_voltages",
    "existing_system_loss",
    "system_load",
    "updated_open_lines",
    "updated_node_voltages",
    "updated_system_loss",
)


def network_to_dict(network: Network) -> dict:
    lines = []
    for line in network.lines:
        row = {
            "from": line.endpoints[0],
            "to": line.endpoints[1],
            "r": line.resistance,
            "x": line.reactance,
            "switchable": line.switchable,
        }
        if math.isfinite(line.capacity):
            row["capacity"] = line.capacity
        lines.append(row)
    doc = {
        "buses": [
            {
                "id": b.id,
                "p_load": b.load.real,
                "q_load": b.load.imag,
                "is_substation": b.is_substation,
            }
            for b in network.buses
        ],
        "lines": lines,
        "base_power": network.base_power,
    }
    if network.name:
        doc["name"] = network.name
    if network.initial_open_lines:
        doc["initial_open_lines"] = sorted(list(p) for p in network.initial_open_lines)
    return doc


def network_from_dict(doc: dict) -> Network:
    buses = tuple(
        Bus(
            id=int(b["id"]),
            load=complex(float(b.get("p_load", 0.0)), float(b.get("q_load", 0.0))),
            is_substation=bool(b.get("is_substation", False)),
        )
        for b in doc["buses"]
    )
    lines = tuple(
        Line(
            endpoints=canonical_pair(int(ln["from"]), int(ln["to"])),
            resistance=float(ln["r"]),
            reactance=float(ln["x"]),
            switchable=bool(ln.get("switchable", True)),
            capacity=float(ln["capacity"]) if "capacity" in ln and ln["capacity"] is not None else math.inf,
        )
        for ln in doc["lines"]
    )
    return Network(
        buses=buses,
        lines=lines,
        base_power=float(doc.get("base_power", 1.0)),
        name=str(doc.get("name", "")),
        initial_open_lines=frozenset(
            canonical_pair(int(a), int(b)) for a, b in doc.get("initial_open_lines", [])
        ),
    )


def load_network(path: str | Path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def save_network(network: Network, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(network), fh, indent=2, sort_keys=True)
        fh.write("\n")


def builtin_network(name: str) -> Network:
    """Load a network bundled with the package, e.g. ``ieee33``."""
    ref = resources.files("gridreconf.data").joinpath(f"{name}.json")
    with ref.open("r", encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def _literal(text: str):
    return ast.literal_eval(text)


def write_samples_csv(samples: Iterable, path: str | Path) -> None:
    """Write DatasetSample records to the ten-column CSV layout."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SAMPLE_COLUMNS)
        writer.writeheader()
        for s in samples:
            writer.writerow(
                {
                    "buses": s.buses,
                    "lines": repr([tuple(p) for p in s.lines]),
                    "line_impedances": repr(list(s.line_impedances)),
                    "existing_open_lines": repr([tuple(p) for p in s.existing_open_lines]),
                    "existing_node_voltages": repr(list(s.existing_node_voltages)),
                    "existing_system_loss": repr(s.existing_system_loss),
                    "system_load": repr(list(s.system_load)),
                    "updated_open_lines": repr([tuple(p) for p in s.updated_open_lines]),
                    "updated_node_voltages": repr(list(s.updated_node_voltages)),
                    "updated_system_loss": repr(s.updated_system_loss),
                }
            )


def read_samples_csv(path: str | Path) -> list:
    """Read DatasetSample records back from the CSV layout."""
    from .dataset import DatasetSample

    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            out.append(
                DatasetSample(
                    sample_id=i,
                    buses=int(row["buses"]),
                    lines=tuple(canonical_pair(*p) for p in _literal(row["lines"])),
                    line_impedances=tuple(_literal(row["line_impedances"])),
                    existing_open_lines=tuple(
                        canonical_pair(*p) for p in _literal(row["existing_open_lines"])
                    ),
                    existing_node_voltages=tuple(_literal(row["existing_node_voltages"])),
                    existing_system_loss=float(_literal(row["existing_system_loss"])),
                    system_load=tuple(complex(v) for v in _literal(row["system_load"])),
                    updated_open_lines=tuple(
                        canonical_pair(*p) for p in _literal(row["updated_open_lines"])
                    ),
                    updated_node_voltages=tuple(_literal(row["updated_node_voltages"])),
                    updated_system_loss=float(_literal(row["updated_system_loss"])),
                )
            )
    return out


def write_jsonl(rows: Iterable[dict], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
