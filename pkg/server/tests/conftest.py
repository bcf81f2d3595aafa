import threading

import pytest

from model_server.app import make_server
from model_server.embedder import DeterministicModel
from model_server.profiles import deterministic_profile


class LiveServer:
    """Serve a model on an ephemeral port for the duration of a test."""

    def __init__(self, model, batch_limit=128):
        self.server = make_server("127.0.0.1", 0, model, batch_limit)
        host, port = self.server.server_address[:2]
        self.url = f"http://{host}:{port}"
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=5)


@pytest.fixture
def serve():
    servers = []

    def _serve(dim=8, seed=42, profile=None, batch_limit=128, model="default"):
        if model == "default":
            model = DeterministicModel(deterministic_profile(dim, caps_from=profile), seed=seed)
        live = LiveServer(model, batch_limit)
        servers.append(live)
        return live

    yield _serve
    for live in servers:
        live.close()
