"""`model-server` command: bind the wire protocol to a model.

Exactly one of --model / --deterministic selects what serves:

* --deterministic: the seeded token-hash embedder (offline, reproducible).
  --dim and --seed shape it; --profile optionally borrows a named
  profile's truncation caps.
* --model NAME: a real transformer for the named profile. Loading needs
  the optional ML stack; if the model cannot be loaded the process prints
  the reason and exits nonzero instead of serving a broken backend.

Startup prints one line for the model and one for the listening address
(`--port 0` binds an ephemeral port and prints the real one).
"""

from __future__ import annotations

import argparse
import sys

from model_server.app import make_server
from model_server.embedder import DeterministicModel
from model_server.profiles import PROFILES, deterministic_profile


class ModelLoadError(Exception):
    """The requested model cannot be served."""


def load_real_model(name: str):
    """Load the transformer behind a named profile.

    The deterministic embedder is the only backend bundled with this
    package; real models require the optional ML stack.
    """
    if name not in PROFILES:
        raise ModelLoadError(
            f"unknown model {name!r}; known profiles: {', '.join(sorted(PROFILES))}"
        )
    try:
        import torch  # noqa: F401
        import transformers  # noqa: F401
    except ImportError as exc:
        raise ModelLoadError(
            f"model {name!r} needs the optional ML stack (torch, transformers): {exc}"
        ) from None
    raise ModelLoadError(
        f"no weights are bundled for {name!r}; point a custom loader at your "
        "checkpoint or run with --deterministic"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="model-server",
        description="HTTP embedding/scoring server (/health, /embed, /score)",
    )
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--model", metavar="NAME", help="serve a real model by profile name")
    mode.add_argument(
        "--deterministic",
        action="store_true",
        help="serve the seeded deterministic embedder",
    )
    parser.add_argument(
        "--profile",
        choices=sorted(PROFILES),
        help="truncation caps to apply in deterministic mode (default: 512/512)",
    )
    parser.add_argument("--dim", type=int, default=64, help="deterministic embedding dim (default 64)")
    parser.add_argument("--seed", type=int, default=42, help="deterministic hash seed (default 42)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765, help="0 binds an ephemeral port")
    parser.add_argument(
        "--batch-limit",
        type=int,
        default=128,
        help="max texts/passages per request; larger requests get HTTP 400 (default 128)",
    )
    parser.add_argument("--verbose", action="store_true", help="log each request")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.deterministic:
            if args.dim < 1:
                raise ModelLoadError(f"--dim must be >= 1, got {args.dim}")
            profile = deterministic_profile(args.dim, caps_from=args.profile)
            model = DeterministicModel(profile, seed=args.seed)
        else:
            model = load_real_model(args.model)
        server = make_server(args.host, args.port, model, args.batch_limit, args.verbose)
    except (ModelLoadError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"model {model.name} dim={model.dim} ready")
    host, port = server.server_address[:2]
    print(f"listening on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
