"""Command-line entry point.

Usage::

    das run <suite> [--config F] [--seed S] [--particles N] [--alpha A]
                    [--gamma G] [--out DIR] [--workers W] [--dry-run]
    das list-suites
    das train-score [...]
    das online [...]

Exit codes: 0 ok, 2 config error, 3 runtime error.  The environment variable
DAS_OUT_DIR overrides --out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime
from pathlib import Path

from .config import load_config, merge_config, render_config
from .errors import ConfigError
from .suites import SUITES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_run_flags(parser):
    parser.add_argument("--config", help="config file (key = value text, or .json)")
    parser.add_argument("--seed", type=int, help="override seed")
    parser.add_argument("--particles", type=int, help="override smc.particles")
    parser.add_argument("--alpha", type=float, help="override smc.alpha")
    parser.add_argument("--gamma", type=float, help="override smc.gamma")
    parser.add_argument("--out", default="out", help="artifact root directory (default: ./out)")
    parser.add_argument("--workers", type=int, help="parallel workers for suite-internal repetitions")
    parser.add_argument("--dry-run", action="store_true", help="echo the resolved config and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="das",
        description="Toy-scale tempered SMC sampling from reward-tilted diffusion models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a named experiment suite")
    run.add_argument("suite", help="suite name (see `das list-suites`)")
    _add_run_flags(run)

    sub.add_parser("list-suites", help="list available suites")

    train = sub.add_parser("train-score", help="shortcut for `das run train-score`")
    _add_run_flags(train)

    online = sub.add_parser("online", help="shortcut for `das run online`")
    _add_run_flags(online)

    return parser


def _flag_overrides(args) -> dict:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.particles is not None:
        overrides["smc.particles"] = args.particles
    if args.alpha is not None:
        overrides["smc.alpha"] = args.alpha
    if args.gamma is not None:
        overrides["smc.gamma"] = args.gamma
    if args.workers is not None:
        overrides["workers"] = args.workers
    return overrides


def _execute_suite(suite_name: str, args) -> int:
    if suite_name not in SUITES:
        print(
            f"error: unknown suite '{suite_name}'; available: {', '.join(sorted(SUITES))}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    spec = SUITES[suite_name]
    try:
        file_cfg = load_config(args.config) if args.config else {}
        file_cfg.pop("suite", None)
        cfg = merge_config(spec.defaults, file_cfg, _flag_overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    echo = render_config(cfg)
    print(f"# suite: {suite_name}")
    print(echo, end="")
    if args.dry_run:
        return EXIT_OK

    out_root = Path(os.environ.get("DAS_OUT_DIR", args.out))
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    outdir = out_root / f"{suite_name}-{stamp}"
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "resolved.cfg").write_text(f"suite = {json.dumps(suite_name)}\n" + echo)

    def log(msg: str):
        print(f"[{suite_name}] {msg}")

    t0 = time.time()
    try:
        metrics = spec.runner(cfg, outdir, log)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - suite failures map to exit 3
        print(f"runtime error in suite '{suite_name}': {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    metrics = {"suite": suite_name, "runtime_seconds": round(time.time() - t0, 2), **metrics}
    with open(outdir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=2)
    log(f"done in {metrics['runtime_seconds']}s; artifacts in {outdir}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-suites":
        for name in sorted(SUITES):
            spec = SUITES[name]
            print(f"{name:18s} ~{spec.expected_minutes:>4.1f} min  {spec.description}")
        return EXIT_OK
    if args.command == "run":
        return _execute_suite(args.suite, args)
    if args.command in ("train-score", "online"):
        return _execute_suite(args.command.replace("_", "-"), args)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
