"""HTTP model server: /health, /embed, /score with a deterministic mode."""

from model_server.app import ModelHTTPServer, make_server
from model_server.embedder import DeterministicModel, token_hash
from model_server.profiles import PROFILES, ModelProfile

__all__ = [
    "DeterministicModel",
    "ModelHTTPServer",
    "ModelProfile",
    "PROFILES",
    "make_server",
    "token_hash",
]
