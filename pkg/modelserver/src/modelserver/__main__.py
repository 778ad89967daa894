"""Run the sidecar: python -m modelserver [--config server.json] [--host H] [--port P]."""

import argparse

import uvicorn

from .app import create_app
from .config import ServerConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="modelserver")
    parser.add_argument("--config", help="JSON config file; env vars MODELSERVER_* override")
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    args = parser.parse_args(argv)

    config = ServerConfig.load(args.config)
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
