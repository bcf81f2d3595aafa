"""HTTP layer: routing, validation, and the wire contract.

Routes (JSON over HTTP/1.1, UTF-8):

    GET  /health -> 200 {"status": "ok", "model": str, "dim": int}
    POST /embed  {"texts": [str, ...]}
                 -> 200 {"dim": int, "vectors": [[float, ...], ...]}
    POST /score  {"query": str, "passages": [str, ...]}
                 -> 200 {"scores": [float, ...]}

Vector/score order always matches input order. Malformed bodies answer
400; a server whose model is not ready answers 503 on every route.
Requests with more texts/passages than the batch limit are rejected 400
rather than split — chunking is the client's job.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from model_server.embedder import DeterministicModel


class _BadRequest(Exception):
    """Raised by validators; becomes an HTTP 400 with the message."""


class _Unavailable(Exception):
    """Model not ready; becomes an HTTP 503 on any route."""


def _require_string_list(payload: dict, key: str, limit: int) -> list[str]:
    values = payload.get(key)
    if not isinstance(values, list):
        raise _BadRequest(f'"{key}" must be a list of strings')
    if len(values) > limit:
        raise _BadRequest(f'"{key}" has {len(values)} items, batch limit is {limit}')
    for value in values:
        if not isinstance(value, str):
            raise _BadRequest(f'"{key}" must contain only strings')
    return values


class ModelHTTPServer(ThreadingHTTPServer):
    """Threaded server carrying the model handle and batch limit."""

    daemon_threads = True

    def __init__(self, address, model: DeterministicModel | None, batch_limit: int = 128, verbose: bool = False):
        if batch_limit < 1:
            raise ValueError(f"batch_limit must be >= 1, got {batch_limit}")
        self.model = model
        self.batch_limit = batch_limit
        self.verbose = verbose
        super().__init__(address, _Handler)


class _Handler(BaseHTTPRequestHandler):
    server: ModelHTTPServer
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        if self.server.verbose:
            super().log_message(fmt, *args)

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict:
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            raise _BadRequest("invalid Content-Length") from None
        raw = self.rfile.read(length) if length > 0 else b""
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise _BadRequest(f"body is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise _BadRequest("body must be a JSON object")
        return payload

    def _model(self) -> DeterministicModel:
        model = self.server.model
        if model is None:
            raise _Unavailable()
        return model

    def do_GET(self) -> None:
        try:
            if self.path != "/health":
                self._reply(404, {"error": f"no such route: GET {self.path}"})
                return
            model = self._model()
            self._reply(200, {"status": "ok", "model": model.name, "dim": model.dim})
        except _Unavailable:
            self._reply(503, {"error": "model unavailable"})

    def do_POST(self) -> None:
        try:
            if self.path == "/embed":
                model = self._model()
                payload = self._read_json()
                texts = _require_string_list(payload, "texts", self.server.batch_limit)
                vectors = model.embed_batch(texts)
                self._reply(200, {"dim": model.dim, "vectors": vectors})
            elif self.path == "/score":
                model = self._model()
                payload = self._read_json()
                query = payload.get("query")
                if not isinstance(query, str):
                    raise _BadRequest('"query" must be a string')
                passages = _require_string_list(payload, "passages", self.server.batch_limit)
                self._reply(200, {"scores": model.score_batch(query, passages)})
            else:
                self._reply(404, {"error": f"no such route: POST {self.path}"})
        except _BadRequest as exc:
            self._reply(400, {"error": str(exc)})
        except _Unavailable:
            self._reply(503, {"error": "model unavailable"})

    def do_PUT(self) -> None:
        self._reply(405, {"error": "method not allowed"})

    do_DELETE = do_PUT


def make_server(
    host: str,
    port: int,
    model: DeterministicModel | None,
    batch_limit: int = 128,
    verbose: bool = False,
) -> ModelHTTPServer:
    """Bind and return the server (port 0 binds an ephemeral port)."""
    return ModelHTTPServer((host, port), model, batch_limit, verbose)
