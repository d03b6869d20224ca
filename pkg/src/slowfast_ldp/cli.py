"""Command-line front end.

One subcommand per experiment kind; the config file supplies all
parameters and the flags override seed, output directory, and format.
The ``SLOWFAST_LDP_CONFIG`` environment variable supplies the config
path when ``--config`` is absent; it overrides nothing else.

Exit codes: 0 success, 2 config error, 3 numerical blow-up, 4
Monte-Carlo underflow (LDP probe with zero hits at every epsilon).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from typing import List, Optional

from slowfast_ldp.config import KINDS, ConfigError, load_config_file
from slowfast_ldp.experiments import run

CONFIG_ENV = "SLOWFAST_LDP_CONFIG"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_UNDERFLOW = 4


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument(
        "--config",
        metavar="PATH",
        default=None,
        help=f"experiment config file (falls back to ${CONFIG_ENV})",
    )
    shared.add_argument(
        "--seed", type=int, metavar="U64", default=None, help="override the config seed"
    )
    shared.add_argument(
        "--out", metavar="DIR", default=None, help="override the output directory"
    )
    shared.add_argument(
        "--threads",
        type=int,
        metavar="K",
        default=1,
        help="worker threads; never changes output bytes",
    )
    shared.add_argument(
        "--format",
        choices=("csv", "binary"),
        default=None,
        help="override the payload format (tables stay csv)",
    )
    parser = argparse.ArgumentParser(
        prog="slowfast-ldp",
        description="Config-driven slow-fast experiment runner.",
    )
    sub = parser.add_subparsers(dest="kind", required=True, metavar="KIND")
    for kind in KINDS:
        sub.add_parser(kind, parents=[shared], help=f"run a {kind} experiment")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    config_path = args.config or os.environ.get(CONFIG_ENV)
    if not config_path:
        print(
            f"config error: no config file; pass --config or set ${CONFIG_ENV}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    try:
        config, text = load_config_file(config_path)
        if config.kind != args.kind:
            raise ConfigError(
                "experiment.kind",
                f"config says {config.kind!r} but the subcommand is {args.kind!r}",
            )
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.format is not None:
            overrides["fmt"] = args.format
        if overrides:
            config = dataclasses.replace(config, **overrides)
            text = None  # overrides invalidate the verbatim copy
        if args.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        result = run(config, config_text=text, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if result.status == EXIT_BLOWUP:
        print(f"numerical blow-up; partial results in {result.out_dir}", file=sys.stderr)
    elif result.status == EXIT_UNDERFLOW:
        print(
            f"Monte-Carlo underflow: zero hits at every epsilon; see {result.out_dir}",
            file=sys.stderr,
        )
    return result.status


if __name__ == "__main__":
    sys.exit(main())
