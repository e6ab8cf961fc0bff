"""Instruction-tuning dataset pipeline for reconfiguration tasks.

Flow: draw load scenarios from a profile table, solve the existing
configuration, label each scenario with an optimized configuration, round
everything to prompt precision, render chat records, and write per-network
and combined JSONL splits with a manifest. Every stage is deterministic
given the seed, so two runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import random
import string
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterator, Sequence

from .errors import EmptyProfile, TemplateMissingSlot
from .network import Configuration, Network, Pair
from .optimize import optimize_branch_exchange, optimize_exhaustive
from .powerflow import solve

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class DatasetSample:
    """One reconfiguration example: network state in, optimal state out.

    The ten feature fields (buses through updated_system_loss) are the
    retained prompt columns; connectivity matrices are derivable from
    lines minus open lines and are never stored. sample_id and
    network_name are bookkeeping for splits and labels.
    """

    sample_id: int
    buses: int
    lines: tuple[Pair, ...]
    line_impedances: tuple[float, ...]
    existing_open_lines: tuple[Pair, ...]
    existing_node_voltages: tuple[float, ...]
    existing_system_loss: float
    system_load: tuple[complex, ...]
    updated_open_lines: tuple[Pair, ...]
    updated_node_voltages: tuple[float, ...]
    updated_system_loss: float
    network_name: str = ""


@dataclass(frozen=True)
class PromptRecord:
    """A rendered chat example: messages in, expected completion out."""

    messages: tuple[tuple[str, str], ...]
    completion: str
    sample_ref: int
    augmentation_level: int
    network_name: str = ""

    @property
    def record_id(self) -> str:
        return f"{self.network_name}-{self.sample_ref}"

    def to_json_dict(self) -> dict:
        return {
            "messages": [
                {"role": role, "content": content} for role, content in self.messages
            ],
            "completion": self.completion,
            "meta": {
                "id": self.record_id,
                "network": self.network_name,
                "sample_id": self.sample_ref,
                "augmentation_level": self.augmentation_level,
            },
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PromptRecord":
        meta = doc.get("meta", {})
        return cls(
            messages=tuple(
                (m["role"], m["content"]) for m in doc.get("messages", ())
            ),
            completion=doc.get("completion", ""),
            sample_ref=int(meta.get("sample_id", -1)),
            augmentation_level=int(meta.get("augmentation_level", 0)),
            network_name=str(meta.get("network", "")),
        )


@dataclass(frozen=True)
class PrecisionRules:
    """Decimal places kept per field family when rounding for prompts."""

    impedance_decimals: int = 5
    load_decimals: int = 5
    voltage_decimals: int = 4
    loss_decimals: int = 4


def round_half_away(value: float, decimals: int) -> float:
    """Round to `decimals` places with ties going away from zero."""
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def _round_complex(value: complex, decimals: int) -> complex:
    return complex(
        round_half_away(value.real, decimals), round_half_away(value.imag, decimals)
    )


def reduce_precision(
    sample: DatasetSample, rules: PrecisionRules = PrecisionRules()
) -> DatasetSample:
    """Apply the per-field rounding rules; idempotent."""
    return replace(
        sample,
        line_impedances=tuple(
            round_half_away(z, rules.impedance_decimals) for z in sample.line_impedances
        ),
        system_load=tuple(
            _round_complex(s, rules.load_decimals) for s in sample.system_load
        ),
        existing_node_voltages=tuple(
            round_half_away(v, rules.voltage_decimals)
            for v in sample.existing_node_voltages
        ),
        updated_node_voltages=tuple(
            round_half_away(v, rules.voltage_decimals)
            for v in sample.updated_node_voltages
        ),
        existing_system_loss=round_half_away(
            sample.existing_system_loss, rules.loss_decimals
        ),
        updated_system_loss=round_half_away(
            sample.updated_system_loss, rules.loss_decimals
        ),
    )


@dataclass(frozen=True)
class LoadProfiles:
    """Multiplier table for load scenarios, one row per timestamp.

    bus_ids of None means a single global multiplier column applied to
    every bus; otherwise each row holds one multiplier per listed bus and
    unlisted buses keep their base load.
    """

    timestamps: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]
    bus_ids: tuple[int, ...] | None = None

    def __len__(self) -> int:
        return len(self.rows)

    def multiplier(self, row: int, bus_id: int) -> float:
        if self.bus_ids is None:
            return self.rows[row][0]
        try:
            return self.rows[row][self.bus_ids.index(bus_id)]
        except ValueError:
            return 1.0

    @classmethod
    def constant(cls, value: float = 1.0) -> "LoadProfiles":
        return cls(timestamps=("0",), rows=((value,),))

    @classmethod
    def from_csv(cls, path) -> "LoadProfiles":
        """Read `timestamp,multiplier` or `timestamp,bus_<id>,...` tables."""
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise EmptyProfile(f"{path} has no header row")
            columns = [h.strip() for h in header[1:]]
            if columns and columns != ["multiplier"]:
                bus_ids = tuple(
                    int(c[4:]) if c.startswith("bus_") else int(c) for c in columns
                )
            else:
                bus_ids = None
            timestamps = []
            rows = []
            for row in reader:
                if not row:
                    continue
                timestamps.append(row[0])
                rows.append(tuple(float(v) for v in row[1:]))
        return cls(timestamps=tuple(timestamps), rows=tuple(rows), bus_ids=bus_ids)


def generate_scenarios(
    network: Network, load_profiles: LoadProfiles, count: int, seed: int = 0
) -> Iterator[tuple[complex, ...]]:
    """Yield `count` per-bus complex load vectors, deterministic per seed.

    Each scenario picks one profile row and scales every bus's base load
    by that row's multiplier for the bus.
    """
    if len(load_profiles) == 0:
        raise EmptyProfile("load profile table has no rows")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = random.Random(seed)
    base = network.base_loads()
    n = network.n_buses
    for _ in range(count):
        row = rng.randrange(len(load_profiles))
        yield tuple(
            base[i] * load_profiles.multiplier(row, i + 1) for i in range(n)
        )


SYSTEM_TEXT = (
    "You are a power distribution network operator. Given the current state "
    "of a radial distribution network, reply with the reconfiguration that "
    "minimizes total system loss."
)

TASK_TEXT = (
    "Find the optimal configuration, i.e. the optimal connectivity and "
    "optimal open lines of these buses and lines so as to ensure energy "
    "distribution to the whole system while minimizing the power loss."
)

CONSTRAINT_CLAUSES = (
    "Use only lines that are provided in the input data; do not introduce "
    "lines that do not exist in the network.",
    "The updated network must remain a single connected component; do not "
    "leave any bus in a disconnected subgraph.",
    "The updated network must contain no cycles, so the number of closed "
    "lines must equal the number of nodes minus one.",
    "Do not reconfigure the network if the updated system loss would be "
    "higher than the existing system loss; keep the existing configuration "
    "instead.",
)

OUTPUT_FORMAT_CLAUSE = (
    'Reply with exactly three labeled sections: "Updated open lines:" '
    'followed by comma-separated line pairs, "Updated node voltages:" '
    'followed by one voltage per node in node order, and "Updated system '
    'loss:" followed by a single number.'
)

REQUIRED_SLOTS = (
    "buses",
    "lines",
    "existing_open_lines",
    "existing_node_voltages",
    "existing_system_loss",
    "system_load",
)


def default_input_format(
    include_impedances: bool = False, include_connectivity: bool = False
) -> str:
    parts = ["Buses: {buses}", "Lines: {lines}"]
    if include_impedances:
        parts.append("Line Impedances: {line_impedances}")
    if include_connectivity:
        parts.append("Existing Connectivity: {connectivity}")
    parts += [
        "Existing Open Lines: {existing_open_lines}",
        "Existing Node Voltages: {existing_node_voltages}",
        "Existing System Loss: {existing_system_loss}",
        "System Load: {system_load}",
    ]
    return ", ".join(parts)


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt recipe: task framing, constraint clauses, input layout.

    augmentation_level 0 renders only the task text; each level up to 4
    appends one more constraint clause, and any level >= 1 also appends
    the output-format clause. input_format of None selects the default
    layout for the include_* flags.
    """

    augmentation_level: int = 4
    include_impedances: bool = False
    include_connectivity: bool = False
    system_text: str = SYSTEM_TEXT
    task_text: str = TASK_TEXT
    clauses: tuple[str, ...] = CONSTRAINT_CLAUSES
    output_format_clause: str = OUTPUT_FORMAT_CLAUSE
    input_format: str | None = None

    def resolved_input_format(self) -> str:
        if self.input_format is not None:
            return self.input_format
        return default_input_format(
            self.include_impedances, self.include_connectivity
        )

    def fingerprint(self) -> str:
        doc = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(doc.encode("utf-8")).hexdigest()


def unreduced_template() -> PromptTemplate:
    """Template restoring connectivity matrices and impedance lists."""
    return PromptTemplate(include_impedances=True, include_connectivity=True)


def _format_number(value) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _format_pairs_compact(pairs: Sequence[Pair]) -> str:
    return "[" + ", ".join(f"({a},{b})" for a, b in pairs) + "]"


def _format_pairs_spaced(pairs: Sequence[Pair]) -> str:
    if not pairs:
        return "()"
    return ", ".join(f"({a}, {b})" for a, b in pairs)


def _format_floats(values: Sequence[float]) -> str:
    return "[" + ", ".join(_format_number(v) for v in values) + "]"


def _format_complexes(values: Sequence[complex]) -> str:
    return "[" + ", ".join(repr(complex(v)) for v in values) + "]"


def _format_connectivity(sample: DatasetSample) -> str:
    closed = set(sample.lines) - set(sample.existing_open_lines)
    n = sample.buses
    matrix = [[0] * n for _ in range(n)]
    for a, b in closed:
        matrix[a - 1][b - 1] = 1
        matrix[b - 1][a - 1] = 1
    return "[" + ", ".join("[" + ", ".join(map(str, row)) + "]" for row in matrix) + "]"


def render_completion(sample: DatasetSample) -> str:
    """The expected assistant text: three labeled output sections."""
    return (
        f"Updated open lines: {_format_pairs_spaced(sample.updated_open_lines)}\n"
        f"Updated node voltages: "
        f"{', '.join(_format_number(v) for v in sample.updated_node_voltages)}\n"
        f"Updated system loss: {_format_number(sample.updated_system_loss)}"
    )


def render_prompt(
    sample: DatasetSample, template: PromptTemplate = PromptTemplate()
) -> PromptRecord:
    """Assemble the chat record for one sample.

    Raises TemplateMissingSlot when the input layout drops a required
    field placeholder.
    """
    fmt = template.resolved_input_format()
    present = {
        name for _, name, _, _ in string.Formatter().parse(fmt) if name is not None
    }
    required = list(REQUIRED_SLOTS)
    if template.include_impedances:
        required.append("line_impedances")
    for name in required:
        if name not in present:
            raise TemplateMissingSlot(f"input format is missing {{{name}}}")

    values = {
        "buses": sample.buses,
        "lines": _format_pairs_compact(sample.lines),
        "line_impedances": _format_floats(sample.line_impedances),
        "connectivity": _format_connectivity(sample),
        "existing_open_lines": _format_pairs_compact(sample.existing_open_lines),
        "existing_node_voltages": _format_floats(sample.existing_node_voltages),
        "existing_system_loss": _format_number(sample.existing_system_loss),
        "system_load": _format_complexes(sample.system_load),
    }
    input_block = fmt.format(**values)

    level = max(0, min(template.augmentation_level, len(template.clauses)))
    instruction_parts = [template.task_text, *template.clauses[:level]]
    if level >= 1:
        instruction_parts.append(template.output_format_clause)
    user_text = " ".join(instruction_parts) + "\n\n" + input_block

    return PromptRecord(
        messages=(("system", template.system_text), ("user", user_text)),
        completion=render_completion(sample),
        sample_ref=sample.sample_id,
        augmentation_level=level,
        network_name=sample.network_name,
    )


def make_sample(
    network: Network,
    loads: Sequence[complex],
    sample_id: int,
    optimizer: str = "branch_exchange",
    rules: PrecisionRules = PrecisionRules(),
    existing_open: frozenset[Pair] | None = None,
) -> DatasetSample:
    """Solve, optimize and round one scenario into a labeled sample.

    The existing configuration defaults to the network's initial open
    lines. If optimization cannot strictly improve on it, the label keeps
    the existing configuration.
    """
    if existing_open is None:
        existing_open = network.initial_open_lines
    existing_config = Configuration(network=network, open_lines=existing_open)
    existing = solve(existing_config, loads)

    if optimizer == "exhaustive":
        best = optimize_exhaustive(network, loads)
    elif optimizer == "branch_exchange":
        best = optimize_branch_exchange(network, loads, start=existing_config)
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}")

    if best.loss > existing.total_loss:
        updated_open = existing_open
        updated = existing
    else:
        updated_open = best.open_lines
        updated = solve(Configuration(network=network, open_lines=updated_open), loads)

    sample = DatasetSample(
        sample_id=sample_id,
        buses=network.n_buses,
        lines=network.line_pairs,
        line_impedances=tuple(l.impedance_magnitude for l in network.lines),
        existing_open_lines=tuple(sorted(existing_open)),
        existing_node_voltages=existing.voltages,
        existing_system_loss=existing.total_loss,
        system_load=tuple(loads),
        updated_open_lines=tuple(sorted(updated_open)),
        updated_node_voltages=updated.voltages,
        updated_system_loss=updated.total_loss,
        network_name=network.name,
    )
    return reduce_precision(sample, rules)


def _derive_seed(seed: int, *parts: str) -> int:
    digest = hashlib.sha256(f"{seed}:{':'.join(parts)}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def split_counts(n: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of n records across fractions."""
    exact = [f * n for f in fractions]
    counts = [int(e) for e in exact]
    remainders = sorted(
        range(len(fractions)), key=lambda i: (exact[i] - counts[i], -i), reverse=True
    )
    for i in range(n - sum(counts)):
        counts[remainders[i % len(fractions)]] += 1
    return counts


def _round_robin(lists: Sequence[list]) -> list:
    merged = []
    for i in range(max((len(l) for l in lists), default=0)):
        for lst in lists:
            if i < len(lst):
                merged.append(lst[i])
    return merged


def _label_row(sample: DatasetSample) -> dict:
    return {
        "id": f"{sample.network_name}-{sample.sample_id}",
        "network": sample.network_name,
        "existing_system_loss": sample.existing_system_loss,
        "updated_open_lines": [list(p) for p in sample.updated_open_lines],
        "updated_node_voltages": list(sample.updated_node_voltages),
        "updated_system_loss": sample.updated_system_loss,
    }


def _make_sample_args(args) -> DatasetSample:
    return make_sample(*args)


def _write_jsonl(rows, path: Path) -> tuple[int, str]:
    digest = hashlib.sha256()
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            line = json.dumps(row, sort_keys=True)
            fh.write(line + "\n")
            digest.update(line.encode("utf-8"))
            digest.update(b"\n")
            n += 1
    return n, digest.hexdigest()


def build_dataset(
    networks: Sequence[Network],
    profiles: LoadProfiles,
    count: int,
    seed: int,
    out_dir,
    splits: Sequence[float] = (1 / 3, 1 / 3, 1 / 3),
    template: PromptTemplate = PromptTemplate(),
    optimizer: str = "branch_exchange",
    rules: PrecisionRules = PrecisionRules(),
    workers: int = 1,
    interleave: str = "round_robin",
) -> dict:
    """Generate, label, render and write the full dataset tree.

    Layout under out_dir: <network>/{train,val,test}.jsonl with aligned
    labels_<split>.jsonl and a samples.csv per network, combined/ variants
    interleaving all networks, and manifest.json. Returns the manifest.
    """
    if abs(sum(splits) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1.0")
    if len(splits) != len(SPLIT_NAMES):
        raise ValueError(f"expected {len(SPLIT_NAMES)} split fractions")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, dict] = {}
    combined: dict[str, list[list]] = {name: [] for name in SPLIT_NAMES}
    combined_labels: dict[str, list[list]] = {name: [] for name in SPLIT_NAMES}
    network_summaries = []

    for idx, network in enumerate(networks):
        name = network.name or f"net{idx}"
        net_dir = out / name
        net_dir.mkdir(parents=True, exist_ok=True)
        scenarios = list(
            generate_scenarios(
                network, profiles, count, seed=_derive_seed(seed, name, "scenarios")
            )
        )
        args = [
            (network, loads, sid, optimizer, rules)
            for sid, loads in enumerate(scenarios)
        ]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                chunk = max(1, count // (workers * 8))
                samples = list(pool.map(_make_sample_args, args, chunksize=chunk))
        else:
            samples = [make_sample(*a) for a in args]

        from .io import write_samples_csv

        write_samples_csv(samples, net_dir / "samples.csv")

        order = list(range(count))
        random.Random(_derive_seed(seed, name, "split")).shuffle(order)
        counts = split_counts(count, splits)
        start = 0
        for split_name, size in zip(SPLIT_NAMES, counts):
            chosen = order[start : start + size]
            start += size
            records = [
                render_prompt(samples[i], template).to_json_dict() for i in chosen
            ]
            labels = [_label_row(samples[i]) for i in chosen]
            n, sha = _write_jsonl(records, net_dir / f"{split_name}.jsonl")
            files[f"{name}/{split_name}.jsonl"] = {"records": n, "sha256": sha}
            n, sha = _write_jsonl(labels, net_dir / f"labels_{split_name}.jsonl")
            files[f"{name}/labels_{split_name}.jsonl"] = {"records": n, "sha256": sha}
            combined[split_name].append(records)
            combined_labels[split_name].append(labels)

        network_summaries.append(
            {"name": name, "buses": network.n_buses, "lines": len(network.lines)}
        )

    combined_dir = out / "combined"
    combined_dir.mkdir(parents=True, exist_ok=True)
    for split_name in SPLIT_NAMES:
        if interleave == "round_robin":
            records = _round_robin(combined[split_name])
            labels = _round_robin(combined_labels[split_name])
        elif interleave == "random":
            records = [r for lst in combined[split_name] for r in lst]
            labels = [r for lst in combined_labels[split_name] for r in lst]
            order = list(range(len(records)))
            random.Random(_derive_seed(seed, "combined", split_name)).shuffle(order)
            records = [records[i] for i in order]
            labels = [labels[i] for i in order]
        else:
            raise ValueError(f"unknown interleave {interleave!r}")
        n, sha = _write_jsonl(records, combined_dir / f"{split_name}.jsonl")
        files[f"combined/{split_name}.jsonl"] = {"records": n, "sha256": sha}
        n, sha = _write_jsonl(labels, combined_dir / f"labels_{split_name}.jsonl")
        files[f"combined/labels_{split_name}.jsonl"] = {"records": n, "sha256": sha}

    manifest = {
        "seed": seed,
        "count": count,
        "splits": list(splits),
        "optimizer": optimizer,
        "interleave": interleave,
        "precision": dataclasses.asdict(rules),
        "template_hash": template.fingerprint(),
        "networks": network_summaries,
        "files": files,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest
