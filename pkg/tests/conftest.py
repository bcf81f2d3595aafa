import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class StubModelServer:
    """In-process HTTP server speaking the scorer wire protocol.

    Vectors and scores are deterministic functions of the request text so
    ordering bugs are visible. Failure modes are switchable per test via
    the `mode` attribute.
    """

    def __init__(self, dim=4):
        self.dim = dim
        self.mode = "ok"  # ok | unavailable | malformed | short | http500
        self.embed_requests: list[list[str]] = []
        self.score_requests: list[dict] = []

        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, code, payload, raw=None):
                body = raw if raw is not None else json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if stub.mode == "unavailable":
                    self._send(503, {"error": "loading"})
                    return
                if self.path == "/health":
                    self._send(
                        200, {"status": "ok", "model": "stub", "dim": stub.dim}
                    )
                else:
                    self._send(404, {"error": "no such endpoint"})

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                request = json.loads(self.rfile.read(length))
                if stub.mode == "unavailable":
                    self._send(503, {"error": "loading"})
                    return
                if stub.mode == "http500":
                    self._send(500, {"error": "boom"})
                    return
                if stub.mode == "malformed":
                    self._send(200, None, raw=b"not json {")
                    return
                if self.path == "/embed":
                    texts = request["texts"]
                    stub.embed_requests.append(list(texts))
                    vectors = [stub.vector_for(t) for t in texts]
                    if stub.mode == "short":
                        vectors = vectors[:-1]
                    self._send(200, {"dim": stub.dim, "vectors": vectors})
                elif self.path == "/score":
                    stub.score_requests.append(request)
                    scores = [
                        stub.score_for(request["query"], p)
                        for p in request["passages"]
                    ]
                    if stub.mode == "short":
                        scores = scores[:-1]
                    self._send(200, {"scores": scores})
                else:
                    self._send(404, {"error": "no such endpoint"})

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )
        self._thread.start()
        self.url = f"http://127.0.0.1:{self._server.server_port}"

    def vector_for(self, text: str) -> list[float]:
        # first component encodes the text so order scrambles are caught
        head = float(len(text) + sum(text.encode()) % 97)
        return [head] + [0.0] * (self.dim - 1)

    def score_for(self, query: str, passage: str) -> float:
        return float(len(query) * 1000 + len(passage) + sum(passage.encode()) % 89)

    def reset(self):
        self.mode = "ok"
        self.embed_requests.clear()
        self.score_requests.clear()

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture(scope="session")
def stub_server():
    server = StubModelServer()
    yield server
    server.close()


@pytest.fixture
def model_server(stub_server):
    stub_server.reset()
    return stub_server


@pytest.fixture
def tiny_corpus():
    return [
        ("p1", "wind turbines convert kinetic energy"),
        ("p2", "solar panels convert sunlight"),
        ("p3", "hydro plants convert falling water energy"),
        ("p4", "coal plants burn fossil fuel"),
        ("p5", "wind farms cluster many turbines"),
    ]
