"""Local HTTP endpoint exposing response scoring to external callers.

POST /score accepts one JSON row and returns its penalty components, so a
training loop running elsewhere can score generations per step without
linking this package. Rows carry either raw response_text (parsed here)
or already-extracted fields; the label comes inline or, when the server
was started with a label file, is looked up by row id. GET /healthz
answers liveness probes.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .network import Network, canonical_pair
from .responses import IMPROPER, ParsedResponse, extract, validate
from .scoring import DEFAULT_LAMBDAS, score_sample


def _parsed_from_row(row: dict) -> ParsedResponse:
    if "response_text" in row and "open_lines" not in row:
        return extract(row["response_text"])
    open_lines = tuple(
        canonical_pair(*p) for p in row.get("open_lines", ())
    )
    voltages = tuple(float(v) for v in row.get("node_voltages", ()))
    loss = row.get("system_loss")
    status = row.get("status")
    if status is None:
        status = "proper"
    return ParsedResponse(
        open_lines=open_lines,
        node_voltages=voltages,
        system_loss=None if loss is None else float(loss),
        status=status,
        raw_length=len(row.get("response_text", "")),
    )


def score_row(
    row: dict,
    network: Network,
    labels: dict | None = None,
    lambdas=DEFAULT_LAMBDAS,
    reg: float = 0.0,
) -> dict:
    """Score one request row; shared by the server and the score CLI."""
    label = row.get("label")
    if label is None and labels is not None:
        label = labels.get(row.get("id"))
    if label is None:
        raise KeyError(f"no label for row id {row.get('id')!r}")
    label_pairs = [canonical_pair(*p) for p in label["updated_open_lines"]]
    parsed = _parsed_from_row(row)
    comps = score_sample(
        parsed, network, label_pairs, reg=float(row.get("reg", reg)), lambdas=lambdas
    )
    violations = [] if parsed.status == IMPROPER else validate(parsed, network)
    out = {"id": row.get("id"), "status": parsed.status}
    out.update(asdict(comps))
    out["lambdas"] = list(comps.lambdas)
    out["violations"] = [{"kind": v.kind, "detail": v.detail} for v in violations]
    return out


def make_server(
    network: Network,
    labels: dict | None = None,
    lambdas=DEFAULT_LAMBDAS,
    reg: float = 0.0,
    host: str = "127.0.0.1",
    port: int = 8750,
) -> ThreadingHTTPServer:
    """Build (but do not start) the scoring server; call serve_forever()."""

    class Handler(BaseHTTPRequestHandler):
        def _reply(self, code: int, doc: dict) -> None:
            body = json.dumps(doc).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self) -> None:
            if self.path == "/healthz":
                self._reply(200, {"status": "ok"})
            else:
                self._reply(404, {"error": f"unknown path {self.path}"})

        def do_POST(self) -> None:
            if self.path != "/score":
                self._reply(404, {"error": f"unknown path {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                row = json.loads(self.rfile.read(length).decode("utf-8"))
                if not isinstance(row, dict):
                    raise TypeError("request body must be a JSON object")
                self._reply(200, score_row(row, network, labels, lambdas, reg))
            except KeyError as exc:
                self._reply(404, {"error": str(exc)})
            except Exception as exc:
                self._reply(400, {"error": str(exc)})

        def log_message(self, *args) -> None:
            pass

    return ThreadingHTTPServer((host, port), Handler)
