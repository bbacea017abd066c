"""Command line entry point: ``feelsplit run | split-bench | validate-config``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .config import ConfigError, parse_config
from .simulation import SCHEMES, run

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("feelsplit")


def _schemes(arg: str | None, config_path: Path, default: str) -> list[str]:
    if arg:
        names = [s.strip() for s in arg.split(",") if s.strip()]
        if arg.strip() == "all":
            names = list(SCHEMES)
    elif config_path.suffix == ".json":
        # a run_meta.json remembers which schemes produced it
        doc = json.loads(config_path.read_text())
        names = doc.get("schemes") or [default]
    else:
        names = [default]
    unknown = [s for s in names if s not in SCHEMES]
    if unknown:
        raise ConfigError(f"unknown scheme(s) {', '.join(unknown)}; choose from {', '.join(SCHEMES)}", "--schemes")
    return names


def _cmd_run(args) -> int:
    from .results import dump_partitions, emit_results, partition_record

    cfg = parse_config(args.config, args.set)
    schemes = _schemes(args.schemes, Path(args.config), cfg.scheme)
    reports, records = [], []
    for scheme in schemes:
        sub = dataclasses.replace(cfg, scheme=scheme)
        hook = None
        if args.dump_partitions:
            def hook(trial, ds, scheme=scheme):
                records.append(partition_record(scheme, trial, ds))
        log.info("running %s: %d trials x %d rounds", scheme, sub.trials, sub.rounds)
        reports.append(run(sub, hook))
    for path in emit_results(reports, cfg, args.out):
        print(path)
    if args.dump_partitions:
        print(dump_partitions(records, Path(args.out) / "partitions.jsonl"))
    return EXIT_OK


def _cmd_split_bench(args) -> int:
    from .results import split_bench

    cfg = parse_config(args.config, args.set)
    for path in split_bench(cfg, args.out):
        print(path)
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = parse_config(args.config, args.set)
    print(f"{args.config}: ok (scheme={cfg.scheme}, devices={cfg.device_count}, "
          f"rounds={cfg.rounds}, trials={cfg.trials})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feelsplit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, type=Path, help="INI config or a previous run_meta.json")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")
        if out:
            p.add_argument("--out", required=True, type=Path, help="output directory")

    p = sub.add_parser("run", help="simulate and write metrics")
    common(p)
    p.add_argument("--schemes", help="comma-separated schemes to run, or 'all' (default: the config's scheme)")
    p.add_argument("--dump-partitions", action="store_true", help="write partitions.jsonl with every device split")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("split-bench", help="compare greedy, random and exact splitting")
    common(p)
    p.set_defaults(func=_cmd_split_bench)

    p = sub.add_parser("validate-config", help="parse and validate a config")
    common(p, out=False)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 2
        print(f"error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_RUNTIME
