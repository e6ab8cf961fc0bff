"""Batch evaluation of response corpora and live inference endpoints.

A corpus of raw response texts is parsed, validated and scored against
labels, then aggregated into a report carrying the four headline metrics
(cycles, subgraphs, suboptimal configurations, improper outputs) plus
voltage error and a true-vs-inferred loss series for plotting. Endpoint
mode renders the same report after collecting responses from a
chat-completion server, with per-request wall-clock timing.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import requests

from .errors import EndpointError
from .network import Network, canonical_pair
from .responses import IMPROPER, PARTIAL, PROPER, extract, validate
from .scoring import DEFAULT_LAMBDAS, score_sample


@dataclass(frozen=True)
class EvalReport:
    """Aggregated metrics for one evaluation run."""

    n_samples: int
    improper_count: int
    partial_count: int
    mean_cycles: float
    mean_subgraphs: float
    mean_subconfig: float
    suboptimal_count: int
    voltage_mae: float | None
    loss_curve: tuple[tuple[float, float], ...]
    mean_inference_seconds: float | None
    timing: tuple[float, float, float] | None
    missing_labels: int
    endpoint_failure: bool
    config_hash: str

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "improper_count": self.improper_count,
            "partial_count": self.partial_count,
            "mean_cycles": self.mean_cycles,
            "mean_subgraphs": self.mean_subgraphs,
            "mean_subconfig": self.mean_subconfig,
            "suboptimal_count": self.suboptimal_count,
            "voltage_mae": self.voltage_mae,
            "loss_curve": [list(point) for point in self.loss_curve],
            "mean_inference_seconds": self.mean_inference_seconds,
            "timing": list(self.timing) if self.timing is not None else None,
            "missing_labels": self.missing_labels,
            "endpoint_failure": self.endpoint_failure,
            "config_hash": self.config_hash,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        return cls(
            n_samples=doc["n_samples"],
            improper_count=doc["improper_count"],
            partial_count=doc["partial_count"],
            mean_cycles=doc["mean_cycles"],
            mean_subgraphs=doc["mean_subgraphs"],
            mean_subconfig=doc["mean_subconfig"],
            suboptimal_count=doc["suboptimal_count"],
            voltage_mae=doc["voltage_mae"],
            loss_curve=tuple(tuple(point) for point in doc["loss_curve"]),
            mean_inference_seconds=doc["mean_inference_seconds"],
            timing=tuple(doc["timing"]) if doc["timing"] is not None else None,
            missing_labels=doc["missing_labels"],
            endpoint_failure=doc["endpoint_failure"],
            config_hash=doc["config_hash"],
        )


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to request completions from an inference server."""

    url: str
    model: str = ""
    max_new_tokens: int = 900
    temperature: float = 0.5
    timeout: float = 120.0
    mode: str = "chat"
    retries: int = 3
    backoff: float = 0.5
    token_env: str = "GRIDRECONF_ENDPOINT_TOKEN"


def _normalize_labels(labels) -> dict:
    if isinstance(labels, Mapping):
        return dict(labels)
    return {row["id"]: row for row in labels}


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _config_hash(network: Network, lambdas, reg: float, n_labels: int) -> str:
    doc = json.dumps(
        {
            "network": network.name,
            "lines": sorted(network.line_pairs),
            "lambdas": list(lambdas),
            "reg": reg,
            "n_labels": n_labels,
        },
        sort_keys=True,
    )
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()


def evaluate_corpus(
    responses: Iterable[Mapping],
    labels,
    network: Network,
    lambdas: tuple[float, float, float] = DEFAULT_LAMBDAS,
    reg: float = 0.0,
) -> tuple[EvalReport, list[dict]]:
    """Parse, validate and score a corpus of {id, response_text} rows.

    Labels is a mapping id -> label row, or an iterable of rows with an
    "id" field; rows without a label are skipped and counted. Returns the
    aggregate report and the per-sample rows for drill-down.
    """
    label_map = _normalize_labels(labels)
    rows: list[dict] = []
    missing = 0
    for resp in responses:
        rid = resp["id"]
        label = label_map.get(rid)
        if label is None:
            missing += 1
            continue
        parsed = extract(resp["response_text"])
        label_pairs = [canonical_pair(*p) for p in label["updated_open_lines"]]
        comps = score_sample(parsed, network, label_pairs, reg=reg, lambdas=lambdas)
        violations = (
            [] if parsed.status == IMPROPER else validate(parsed, network)
        )
        mae = None
        if (
            parsed.status == PROPER
            and len(parsed.node_voltages) == network.n_buses
            and len(label["updated_node_voltages"]) == network.n_buses
        ):
            mae = _mean(
                [
                    abs(v - t)
                    for v, t in zip(
                        parsed.node_voltages, label["updated_node_voltages"]
                    )
                ]
            )
        rows.append(
            {
                "id": rid,
                "status": parsed.status,
                "cycle": comps.cycle,
                "subgraph": comps.subgraph,
                "subconfig": comps.subconfig,
                "cycle_scaled": comps.cycle_scaled,
                "subgraph_scaled": comps.subgraph_scaled,
                "subconfig_scaled": comps.subconfig_scaled,
                "total": comps.total,
                "improper": comps.improper,
                "violations": [
                    {"kind": v.kind, "detail": v.detail} for v in violations
                ],
                "voltage_mae": mae,
                "true_loss": label["updated_system_loss"],
                "inferred_loss": parsed.system_loss,
            }
        )

    maes = [r["voltage_mae"] for r in rows if r["voltage_mae"] is not None]
    curve = tuple(
        (r["true_loss"], r["inferred_loss"])
        for r in sorted(rows, key=lambda r: str(r["id"]))
        if r["inferred_loss"] is not None
    )
    rep = EvalReport(
        n_samples=len(rows),
        improper_count=sum(1 for r in rows if r["improper"]),
        partial_count=sum(1 for r in rows if r["status"] == PARTIAL),
        mean_cycles=_mean([r["cycle"] for r in rows]),
        mean_subgraphs=_mean([r["subgraph"] for r in rows]),
        mean_subconfig=_mean([r["subconfig"] for r in rows]),
        suboptimal_count=sum(1 for r in rows if r["subconfig"] > 0),
        voltage_mae=_mean(maes) if maes else None,
        loss_curve=curve,
        mean_inference_seconds=None,
        timing=None,
        missing_labels=missing,
        endpoint_failure=False,
        config_hash=_config_hash(network, lambdas, reg, len(label_map)),
    )
    return rep, rows


def _request_once(endpoint: EndpointConfig, messages) -> tuple[str, float]:
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(endpoint.token_env, "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    if endpoint.mode == "completion":
        prompt = "\n\n".join(m["content"] for m in messages)
        payload = {
            "model": endpoint.model,
            "prompt": prompt,
            "max_tokens": endpoint.max_new_tokens,
            "temperature": endpoint.temperature,
        }
    else:
        payload = {
            "model": endpoint.model,
            "messages": list(messages),
            "max_tokens": endpoint.max_new_tokens,
            "temperature": endpoint.temperature,
        }
    try:
        start = time.perf_counter()
        resp = requests.post(
            endpoint.url, json=payload, headers=headers, timeout=endpoint.timeout
        )
        elapsed = time.perf_counter() - start
        resp.raise_for_status()
        data = resp.json()
        choice = data["choices"][0]
        if "message" in choice:
            text = choice["message"]["content"]
        else:
            text = choice["text"]
        if not isinstance(text, str):
            raise TypeError("completion text is not a string")
        return text, elapsed
    except Exception as exc:
        raise EndpointError(str(exc)) from exc


def _request(endpoint: EndpointConfig, messages) -> tuple[str, float | None]:
    for attempt in range(endpoint.retries):
        try:
            return _request_once(endpoint, messages)
        except EndpointError:
            if attempt + 1 < endpoint.retries:
                time.sleep(endpoint.backoff * (2**attempt))
    return "", None


def evaluate_endpoint(
    records: Sequence,
    endpoint: EndpointConfig,
    labels,
    network: Network,
    runs: int = 3,
    lambdas: tuple[float, float, float] = DEFAULT_LAMBDAS,
    reg: float = 0.0,
) -> tuple[EvalReport, list[dict]]:
    """Query an endpoint for every record, pooled across runs, then score.

    records are rendered chat records (objects with to_json_dict or plain
    JSONL dicts). Requests that fail after retries produce empty response
    texts, which score as improper; timing covers successful requests
    only. endpoint_failure is set when nothing at all succeeded.
    """
    docs = [
        rec.to_json_dict() if hasattr(rec, "to_json_dict") else rec for rec in records
    ]
    responses = []
    times: list[float] = []
    attempted = 0
    for _ in range(max(1, runs)):
        for doc in docs:
            attempted += 1
            text, elapsed = _request(endpoint, doc["messages"])
            responses.append({"id": doc["meta"]["id"], "response_text": text})
            if elapsed is not None:
                times.append(elapsed)
    rep, rows = evaluate_corpus(
        responses, labels, network, lambdas=lambdas, reg=reg
    )
    return (
        replace(
            rep,
            mean_inference_seconds=_mean(times) if times else None,
            timing=(min(times), _mean(times), max(times)) if times else None,
            endpoint_failure=attempted > 0 and not times,
        ),
        rows,
    )


_TABLE_ROWS = (
    ("Samples", "n_samples", "{}"),
    ("Cycles (mean)", "mean_cycles", "{:.4f}"),
    ("Subgraphs (mean)", "mean_subgraphs", "{:.4f}"),
    ("Suboptimal Config.", "suboptimal_count", "{}"),
    ("Improper outputs", "improper_count", "{}"),
    ("Partial outputs", "partial_count", "{}"),
    ("Voltage MAE", "voltage_mae", "{:.6f}"),
    ("Mean inference (s)", "mean_inference_seconds", "{:.3f}"),
    ("Missing labels", "missing_labels", "{}"),
)

_CSV_COLUMNS = (
    ("n_samples", "n_samples"),
    ("cycles_mean", "mean_cycles"),
    ("subgraphs_mean", "mean_subgraphs"),
    ("subconfig_mean", "mean_subconfig"),
    ("suboptimal_config", "suboptimal_count"),
    ("improper_outputs", "improper_count"),
    ("partial_outputs", "partial_count"),
    ("voltage_mae", "voltage_mae"),
    ("mean_inference_seconds", "mean_inference_seconds"),
    ("missing_labels", "missing_labels"),
)


def report(rep: EvalReport, format: str = "table") -> str:
    """Render a report as an aligned text table, a one-row CSV, or JSON."""
    if format == "json":
        return json.dumps(rep.to_dict(), sort_keys=True, indent=2)
    if format == "csv":
        header = ",".join(name for name, _ in _CSV_COLUMNS)
        values = []
        for _, attr in _CSV_COLUMNS:
            value = getattr(rep, attr)
            values.append("" if value is None else repr(value) if isinstance(value, float) else str(value))
        return header + "\n" + ",".join(values) + "\n"
    if format == "table":
        lines = []
        for title, attr, fmt in _TABLE_ROWS:
            value = getattr(rep, attr)
            rendered = "-" if value is None else fmt.format(value)
            lines.append(f"{title:<22}{rendered}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def write_report_files(rep: EvalReport, rows: Sequence[dict], out_dir) -> None:
    """Write report.{txt,csv,json}, per_sample.jsonl and plot series."""
    out = Path(out_dir)
    (out / "plots").mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report(rep, "table"), encoding="utf-8")
    (out / "report.csv").write_text(report(rep, "csv"), encoding="utf-8")
    (out / "report.json").write_text(report(rep, "json") + "\n", encoding="utf-8")
    with open(out / "per_sample.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    with open(out / "plots" / "loss_overlay.csv", "w", encoding="utf-8") as fh:
        fh.write("index,true_loss,inferred_loss\n")
        for i, (true_loss, inferred) in enumerate(rep.loss_curve):
            fh.write(f"{i},{true_loss!r},{inferred!r}\n")
    with open(out / "plots" / "voltage_mae.csv", "w", encoding="utf-8") as fh:
        fh.write("id,voltage_mae\n")
        for row in rows:
            if row["voltage_mae"] is not None:
                fh.write(f"{row['id']},{row['voltage_mae']!r}\n")
