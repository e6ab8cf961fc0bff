"""Command-line entry points: dataset, parse, score, serve, eval.

The eval subcommand also accepts a TOML or JSON config file whose keys
mirror the flag names; explicit flags win over config values, and the
endpoint credential comes only from the environment.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .dataset import LoadProfiles, PrecisionRules, PromptTemplate, build_dataset
from .evaluation import (
    EndpointConfig,
    evaluate_corpus,
    evaluate_endpoint,
    report,
    write_report_files,
)
from .io import builtin_network, load_network, read_jsonl, write_jsonl
from .network import Network
from .responses import IMPROPER, extract, validate
from .scoring import DEFAULT_LAMBDAS
from .server import make_server, score_row


def _network_arg(value: str) -> Network:
    path = Path(value)
    if path.exists():
        return load_network(path)
    return builtin_network(value)


def _parse_splits(text: str) -> tuple[float, ...]:
    return tuple(float(Fraction(tok.strip())) for tok in text.split(","))


def _parse_lambdas(text: str) -> tuple[float, float, float]:
    parts = tuple(float(tok.strip()) for tok in text.split(","))
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated weights")
    return parts


def _load_config_file(path: str) -> dict:
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    try:
        import tomllib as toml
    except ModuleNotFoundError:
        import tomli as toml
    with open(path, "rb") as fh:
        return toml.load(fh)


def _cmd_dataset(args) -> int:
    networks = [_network_arg(v) for v in args.network]
    profiles = LoadProfiles.from_csv(args.profiles)
    template = PromptTemplate(
        augmentation_level=args.augmentation_level,
        include_impedances=args.include_impedances,
    )
    rules = PrecisionRules(
        voltage_decimals=args.voltage_decimals,
        loss_decimals=args.loss_decimals,
        impedance_decimals=args.value_decimals,
        load_decimals=args.value_decimals,
    )
    manifest = build_dataset(
        networks,
        profiles,
        count=args.count,
        seed=args.seed,
        out_dir=args.out,
        splits=_parse_splits(args.splits),
        template=template,
        optimizer=args.optimizer,
        rules=rules,
        workers=args.workers,
        interleave=args.interleave,
    )
    total = sum(
        meta["records"]
        for name, meta in manifest["files"].items()
        if name.startswith("combined/") and "labels" not in name
    )
    print(f"wrote {total} combined records to {args.out}")
    return 0


def _cmd_parse(args) -> int:
    network = _network_arg(args.network)
    out_rows = []
    for row in read_jsonl(args.responses):
        parsed = extract(row.get("response_text", ""))
        violations = [] if parsed.status == IMPROPER else validate(parsed, network)
        out_row = dict(row)
        out_row.update(
            {
                "open_lines": [list(p) for p in parsed.open_lines],
                "node_voltages": list(parsed.node_voltages),
                "system_loss": parsed.system_loss,
                "status": parsed.status,
                "diagnostics": list(parsed.diagnostics),
                "violations": [
                    {"kind": v.kind, "detail": v.detail} for v in violations
                ],
            }
        )
        out_rows.append(out_row)
    n = write_jsonl(out_rows, args.out)
    print(f"parsed {n} responses to {args.out}")
    return 0


def _cmd_score(args) -> int:
    network = _network_arg(args.network)
    labels = {row["id"]: row for row in read_jsonl(args.labels)}
    out_rows = []
    missing = 0
    for row in read_jsonl(args.parsed):
        try:
            out_rows.append(
                score_row(row, network, labels, lambdas=args.lambdas, reg=args.reg)
            )
        except KeyError:
            missing += 1
            out_rows.append({"id": row.get("id"), "error": "missing_label"})
    n = write_jsonl(out_rows, args.out)
    print(f"scored {n - missing} rows to {args.out} ({missing} without labels)")
    return 0


def _cmd_serve(args) -> int:
    network = _network_arg(args.network)
    labels = None
    if args.labels:
        labels = {row["id"]: row for row in read_jsonl(args.labels)}
    server = make_server(
        network,
        labels=labels,
        lambdas=args.lambdas,
        reg=args.reg,
        host=args.host,
        port=args.port,
    )
    host, port = server.server_address[:2]
    print(f"scoring endpoint on http://{host}:{port}/score")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.server_close()
    return 0


def _cmd_eval(args) -> int:
    for name in ("network", "labels", "out"):
        if getattr(args, name) in (None, ""):
            raise SystemExit(f"eval requires --{name} (flag or config file)")
    if args.mode == "endpoint" and not args.url:
        raise SystemExit("eval endpoint requires --url")
    if not args.split and not args.responses:
        raise SystemExit("eval requires --split or --responses")

    network = _network_arg(args.network)
    labels = {row["id"]: row for row in read_jsonl(args.labels)}

    if args.mode == "corpus":
        if args.responses:
            responses = list(read_jsonl(args.responses))
        else:
            responses = [
                {"id": rec["meta"]["id"], "response_text": rec["completion"]}
                for rec in read_jsonl(args.split)
            ]
        rep, rows = evaluate_corpus(
            responses, labels, network, lambdas=args.lambdas, reg=args.reg
        )
    else:
        records = list(read_jsonl(args.split))
        endpoint = EndpointConfig(
            url=args.url,
            model=args.model,
            max_new_tokens=args.max_new_tokens,
            temperature=args.temperature,
            timeout=args.timeout,
            mode=args.request_mode,
        )
        rep, rows = evaluate_endpoint(
            records,
            endpoint,
            labels,
            network,
            runs=args.runs,
            lambdas=args.lambdas,
            reg=args.reg,
        )
    write_report_files(rep, rows, args.out)
    print(report(rep, "table"), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridreconf",
        description="Distribution network reconfiguration datasets and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="generate labeled prompt datasets")
    p.add_argument("--network", action="append", required=True,
                   help="network JSON path or builtin name; repeatable")
    p.add_argument("--profiles", required=True, help="load-profile CSV")
    p.add_argument("--count", type=int, default=17520)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--splits", default="1/3,1/3,1/3")
    p.add_argument("--out", required=True)
    p.add_argument("--optimizer", choices=("branch_exchange", "exhaustive"),
                   default="branch_exchange")
    p.add_argument("--augmentation-level", type=int, default=4)
    p.add_argument("--include-impedances", action="store_true")
    p.add_argument("--voltage-decimals", type=int, default=4)
    p.add_argument("--loss-decimals", type=int, default=4)
    p.add_argument("--value-decimals", type=int, default=5,
                   help="decimals for impedances and loads")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--interleave", choices=("round_robin", "random"),
                   default="round_robin")
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("parse", help="parse raw response texts")
    p.add_argument("--responses", required=True, help="JSONL of {id, response_text}")
    p.add_argument("--network", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("score", help="score parsed responses against labels")
    p.add_argument("--parsed", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--network", required=True)
    p.add_argument("--lambdas", type=_parse_lambdas, default=DEFAULT_LAMBDAS)
    p.add_argument("--reg", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("serve", help="run the HTTP scoring endpoint")
    p.add_argument("--network", required=True)
    p.add_argument("--labels")
    p.add_argument("--lambdas", type=_parse_lambdas, default=DEFAULT_LAMBDAS)
    p.add_argument("--reg", type=float, default=0.0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("eval", help="evaluate a corpus or a live endpoint")
    p.add_argument("mode", choices=("corpus", "endpoint"))
    p.add_argument("--config", help="TOML/JSON file of flag defaults")
    p.add_argument("--split", help="rendered dataset split JSONL")
    p.add_argument("--responses", help="JSONL of {id, response_text} (corpus mode)")
    p.add_argument("--network")
    p.add_argument("--labels")
    p.add_argument("--lambdas", type=_parse_lambdas, default=DEFAULT_LAMBDAS)
    p.add_argument("--reg", type=float, default=0.0)
    p.add_argument("--url")
    p.add_argument("--model", default="")
    p.add_argument("--max-new-tokens", type=int, default=900)
    p.add_argument("--temperature", type=float, default=0.5)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--request-mode", choices=("chat", "completion"), default="chat")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    return parser


def _config_values(argv) -> dict | None:
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return _load_config_file(argv[i + 1])
        if token.startswith("--config="):
            return _load_config_file(token[len("--config="):])
    return None


def _config_tokens(values: dict) -> list[str]:
    tokens: list[str] = []
    for key, value in values.items():
        flag = "--" + str(key).replace("_", "-")
        if isinstance(value, bool):
            if value:
                tokens.append(flag)
        elif isinstance(value, (list, tuple)):
            tokens.extend([flag, ",".join(str(v) for v in value)])
        else:
            tokens.extend([flag, str(value)])
    return tokens


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # config values become flags ahead of the explicit ones, so the
    # explicit ones win under argparse's last-occurrence rule
    values = _config_values(argv)
    if values:
        argv = argv[:1] + _config_tokens(values) + argv[1:]
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
