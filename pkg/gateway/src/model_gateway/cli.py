"""Serve the gateway: `model-gateway [--config file.json] [flags]`."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import uvicorn

from .app import GatewayConfig, create_app
from .backends import GatewayError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="model-gateway", description=__doc__)
    parser.add_argument("--config", help="gateway config JSON file")
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    parser.add_argument("--embed-model")
    parser.add_argument("--rerank-model")
    parser.add_argument("--generate-model")
    parser.add_argument("--max-batch-size", type=int)
    parser.add_argument("--auth-token")
    return parser


def config_from_args(args) -> GatewayConfig:
    values: dict = {}
    if args.config:
        values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(values) - set(GatewayConfig.__dataclass_fields__)
        if unknown:
            raise GatewayError(f"unknown gateway config keys: {sorted(unknown)}")
    for key in (
        "host",
        "port",
        "embed_model",
        "rerank_model",
        "generate_model",
        "max_batch_size",
        "auth_token",
    ):
        value = getattr(args, key)
        if value is not None:
            values[key] = value
    return GatewayConfig(**values)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        app = create_app(config)
    except (GatewayError, OSError, json.JSONDecodeError) as exc:
        print(f"gateway startup failed: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
