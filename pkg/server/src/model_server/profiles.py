"""Model profiles: embedding width and server-side truncation caps."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelProfile:
    """Declared geometry of a served model.

    Truncation caps are whitespace-token counts applied server-side before
    any text reaches the model: /score truncates the query to
    query_max_tokens and each passage to passage_max_tokens; /embed treats
    every text as a passage (the wire protocol carries no query/passage
    flag, so the passage cap — the model's hard input bound — applies, and
    clients wanting a stricter query cap truncate before sending).
    """

    name: str
    embed_dim: int
    query_max_tokens: int
    passage_max_tokens: int

    def __post_init__(self) -> None:
        for field_name in ("embed_dim", "query_max_tokens", "passage_max_tokens"):
            value = getattr(self, field_name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{field_name} must be a positive integer, got {value!r}")


PROFILES: dict[str, ModelProfile] = {
    "repbert-like": ModelProfile("repbert-like", 768, 20, 256),
    "ance-like": ModelProfile("ance-like", 768, 64, 512),
}


def deterministic_profile(dim: int, caps_from: str | None = None) -> ModelProfile:
    """Profile for the deterministic mode: caller-chosen dim, generous caps.

    caps_from borrows the truncation caps of a named profile (the dim stays
    the caller's, so golden vectors at small dims keep real-model caps).
    """
    if caps_from is not None:
        base = PROFILES[caps_from]
        return ModelProfile("deterministic", dim, base.query_max_tokens, base.passage_max_tokens)
    return ModelProfile("deterministic", dim, 512, 512)
