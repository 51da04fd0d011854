"""Command-line front end.

    uq <config> --mode <mode> [--serial] [--seed N] [--outputdir PATH]

Modes: dry, infer, continue, test, synthesize, report, best, forecast.
Environment variables prefixed ``UQ_`` override configuration values
(UQ_SEED, UQ_OUTPUTDIR, UQ_SERIAL, UQ_REMOTE); command-line flags
override both. With ``--remote URL`` the configuration is submitted to
a running service instead of executing locally.

Exit codes: 0 success, 2 configuration error, 3 runtime failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from uqengine.config import ConfigError, config_parse
from uqengine.engine import CheckFailure, Engine, EngineError

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_VALIDATION = 4

MODES = ("dry", "infer", "continue", "test", "synthesize", "report", "best", "forecast")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uq",
        description="Bayesian uncertainty quantification engine",
    )
    parser.add_argument("config", help="path to the configuration file")
    parser.add_argument("--mode", choices=MODES, default="infer")
    parser.add_argument(
        "--serial", action="store_true", help="ignore all worker attachments"
    )
    parser.add_argument("--seed", type=int, default=None, help="override the seed")
    parser.add_argument("--outputdir", default=None, help="override the output directory")
    parser.add_argument(
        "--remote", default=None, metavar="URL",
        help="submit to a running service instead of executing locally",
    )
    return parser


def _env_overrides(args: argparse.Namespace) -> argparse.Namespace:
    if args.seed is None and os.environ.get("UQ_SEED"):
        args.seed = int(os.environ["UQ_SEED"])
    if args.outputdir is None and os.environ.get("UQ_OUTPUTDIR"):
        args.outputdir = os.environ["UQ_OUTPUTDIR"]
    if not args.serial and os.environ.get("UQ_SERIAL", "").lower() in ("1", "true", "yes"):
        args.serial = True
    if args.remote is None and os.environ.get("UQ_REMOTE"):
        args.remote = os.environ["UQ_REMOTE"]
    return args


def main(argv: list[str] | None = None) -> int:
    args = _env_overrides(build_parser().parse_args(argv))
    if args.remote:
        return _run_remote(args)
    try:
        config = config_parse(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.outputdir is not None:
            config.outputdir = args.outputdir
        engine = Engine(config, serial=args.serial)
        result = engine.run(args.mode)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EngineError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.mode in ("infer", "continue"):
        print(f"completed {result['batches']} batches into {result['outputdir']}")
    return EXIT_OK


def _run_remote(args: argparse.Namespace) -> int:
    """Thin client: post the configuration to the service and poll."""
    import time

    import httpx

    try:
        text = open(args.config).read()
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    base = args.remote.rstrip("/")
    payload = {
        "config": text,
        "mode": args.mode,
        "serial": args.serial,
        "seed": args.seed,
        "outputdir": args.outputdir,
    }
    try:
        with httpx.Client(base_url=base, timeout=30.0) as client:
            created = client.post("/runs", json=payload)
            if created.status_code == 422 or created.status_code == 400:
                print(f"configuration error: {created.text}", file=sys.stderr)
                return EXIT_CONFIG
            created.raise_for_status()
            run_id = created.json()["id"]
            print(f"submitted run {run_id}")
            while True:
                status = client.get(f"/runs/{run_id}").json()
                if status["state"] in ("done", "failed"):
                    break
                time.sleep(0.5)
    except httpx.HTTPError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if status["state"] == "failed":
        print(f"runtime failure: {status.get('error')}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"run {run_id} finished: {status.get('summary')}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
