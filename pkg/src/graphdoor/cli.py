"""Command line entry point: run / validate / defaults."""

from __future__ import annotations

import argparse
import json
import sys

from .core import GraphdoorError
from .experiment import (
    ConfigError,
    PipelineError,
    default_config,
    load_config,
    run,
    validate_config,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PIPELINE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphdoor",
        description="Multi-target subgraph-injection backdoor attack pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the full pipeline from a config file")
    p_run.add_argument("config", help="path to JSON experiment config")
    p_run.add_argument("--seed", type=int, default=None, help="override master seed")
    p_run.add_argument("--out", default=None, help="override output directory")
    p_run.add_argument("--threads", type=int, default=1,
                       help="worker threads (1 guarantees bit-exact replay)")

    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config")

    sub.add_parser("defaults", help="print the fully expanded default config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        json.dump(default_config(), sys.stdout, indent=2)
        print()
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        diags = validate_config(cfg)
        for diag in diags:
            print(diag)
        return EXIT_OK if not diags else EXIT_CONFIG
    # run
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.threads is not None:
        cfg["threads"] = args.threads
    try:
        result = run(cfg, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PipelineError, GraphdoorError) as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    report = result["report"]
    for target in sorted(report.asr):
        print(f"ASR[{target}] = {report.asr[target]:.4f}")
    print(f"CA  = {report.ca:.4f}")
    print(f"CAD = {report.cad:.4f}")
    print(f"artifacts written to {result['out_dir']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
