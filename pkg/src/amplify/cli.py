"""``amplify <command> --config <path> [--out <dir>] [--threads k] [--seed u64]``.

Exit codes: 0 all invariants hold, 1 certification failure, 2 bad
configuration or usage, 3 computation error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from .config import ConfigError, load_config
from .report import ReportError, render_report, write_report

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2, 3

COMMANDS = ("verify-knu", "stationary-phase", "orbital", "counts", "stabilizers",
            "geometric-sides", "resonate", "budget", "all")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"amplify: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="amplify", description="Run the amplification verification suites.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI-style experiment configuration")
    p.add_argument("--out", help="report directory (overrides run.out)")
    p.add_argument("--threads", type=int, help="worker threads (overrides run.threads)")
    p.add_argument("--seed", type=int, help="u64 seed (overrides run.seed)")
    return p


def _setup_logging():
    level = os.environ.get("AMPLIFY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def run(config_path: str, command: str, out: str | None = None, threads: int | None = None,
        seed: int | None = None) -> int:
    from . import experiments

    try:
        cfg = load_config(config_path)
        overrides = {k: v for k, v in (("out", out), ("threads", threads), ("seed", seed)) if v is not None}
        if overrides:
            cfg = replace(cfg, run=replace(cfg.run, **overrides))
            if cfg.run.threads < 1 or not 0 <= cfg.run.seed < 2**64:
                raise ConfigError("--threads must be >= 1 and --seed a u64")
    except ConfigError as exc:
        print(f"amplify: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if command not in COMMANDS:
        print(f"amplify: unknown command {command!r}", file=sys.stderr)
        return EXIT_CONFIG

    names = list(experiments.SUITES) if command == "all" else [command]
    failures = []
    try:
        results = [experiments.SUITES[name](cfg) for name in names]
        # render everything first so a serialization error leaves no files behind
        rendered = []
        for res in results:
            meta = {"suite": res.name, "config": cfg.echo(), "seed": cfg.run.seed,
                    "failures": res.failures, **res.meta}
            rendered.append((res.name, render_report(res.name, res.rows, res.columns, meta)))
            for name, (columns, rows) in res.extra.items():
                if rows:
                    rendered.append((name, render_report(name, rows, columns, {**meta, "table": name})))
            failures += [f"{res.name}: {f}" for f in res.failures]
        for name, (csv_text, json_text) in rendered:
            write_report(name, csv_text, json_text, cfg.run.out)
    except ReportError as exc:
        print(f"amplify: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except Exception as exc:  # any numerical breakdown is a computation error
        logging.getLogger("amplify").debug("computation failed", exc_info=True)
        print(f"amplify: computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    for f in failures:
        print(f"FAIL {f}", file=sys.stderr)
    return EXIT_FAIL if failures else EXIT_OK


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(args.config, args.command, args.out, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
