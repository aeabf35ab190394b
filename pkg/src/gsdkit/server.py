"""Stateless HTTP tool service.

POST /v1/estimate and /v1/area accept tool request documents; GET
/v1/health reports the loaded calibration. The calibration is read once at
startup and never mutated, so concurrent requests are independent and
identical requests get identical responses. Malformed bodies get 4xx with
the structured error schema; unexpected failures get a 5xx with an opaque
id whose details go only to the server log (stderr).
"""

from __future__ import annotations

import json
import sys
import traceback
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .estimator import EstimatorConfig
from .ingest import canonical_dumps
from .toolapi import ToolError, handle_area, handle_estimate

__all__ = ["make_server", "ToolServer"]

MAX_BODY_BYTES = 64 * 1024 * 1024


class ToolServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, calibration: dict,
                 base_config: EstimatorConfig | None, version: str,
                 log_requests: bool = True):
        self.calibration = calibration
        self.base_config = base_config
        self.version = version
        self.log_requests = log_requests
        super().__init__(address, _Handler)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: ToolServer

    def log_message(self, format, *args):  # noqa: A002 (http.server signature)
        if self.server.log_requests:
            super().log_message(format, *args)

    def _send(self, status: int, payload: dict) -> None:
        body = canonical_dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, status: int, code: str, field: str, message: str) -> None:
        self._send(status, {"error": {"code": code, "field": field,
                                      "message": message}})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length <= 0:
            raise ToolError("schema_violation", "", "empty request body")
        if length > MAX_BODY_BYTES:
            raise ToolError("schema_violation", "", "request body too large")
        raw = self.rfile.read(length)
        try:
            return json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ToolError("schema_violation", "", f"invalid JSON: {exc}") from exc

    def do_GET(self) -> None:  # noqa: N802 (http.server naming)
        if self.path != "/v1/health":
            self._send_error(404, "not_found", "", f"unknown route {self.path}")
            return
        cal = self.server.calibration
        self._send(200, {
            "status": "ok",
            "l_ref": cal["l_ref"],
            "n_instances": cal.get("n_instances"),
            "version": self.server.version,
        })

    def do_POST(self) -> None:  # noqa: N802
        if self.path == "/v1/estimate":
            handler = handle_estimate
        elif self.path == "/v1/area":
            handler = handle_area
        else:
            self._send_error(404, "not_found", "", f"unknown route {self.path}")
            return
        try:
            request = self._read_body()
            response = handler(request, self.server.calibration["l_ref"],
                               self.server.base_config)
        except ToolError as exc:
            self._send(400, exc.to_dict())
            return
        except Exception:  # noqa: BLE001 - opaque 5xx, details to the log only
            error_id = uuid.uuid4().hex
            print(f"internal error {error_id}", file=sys.stderr)
            traceback.print_exc(file=sys.stderr)
            self._send_error(500, "internal", "", f"internal error {error_id}")
            return
        self._send(200, response)


def make_server(host: str, port: int, calibration: dict,
                base_config: EstimatorConfig | None = None,
                version: str = "0", log_requests: bool = True) -> ToolServer:
    """Bind the service; call ``serve_forever()`` on the result to run it."""
    if "l_ref" not in calibration:
        raise ValueError("calibration must carry l_ref")
    return ToolServer((host, port), calibration, base_config, version,
                      log_requests=log_requests)
