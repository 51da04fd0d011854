"""Service launcher: ``uq-service [--host H] [--port P] [--workdir DIR]``."""

from __future__ import annotations

import argparse


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="uq-service", description="uqengine HTTP service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--workdir", default=None, help="directory for run workspaces")
    args = parser.parse_args(argv)

    import uvicorn

    from uqengine.service.app import create_app

    uvicorn.run(create_app(args.workdir), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
