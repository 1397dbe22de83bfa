# ocs_arc/__main__.py
"""
Command-line entry point:
    python -m ocs_arc run <config.yaml> [--out DIR] [--replicates N] [--seed S]
                                        [--trajectories] [--workers N]
    python -m ocs_arc validate <config.yaml>
    python -m ocs_arc oracle-check [--streams N] [--max-len L] [--seed S]

Exit codes: 0 ok, 1 unexpected failure, 2 config error, 3 invalid input
(data files, stream contents).

Env toggles (also read from ./.env):
  OCS_LOG_LEVEL=DEBUG   OCS_LOG_JSON=1   OCS_OUT_DIR=...   OCS_WORKERS=4   OCS_BASE_SEED=7
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from .config import default_config, load_config
from .experiment import apply_overrides, run_experiment
from .selection_runtime.procedures import oracle_check
from .selection_runtime.utils import ConfigError, InvalidInputError
from .settings import parse_config, validate_config

log = logging.getLogger("ocs_arc")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INPUT = 3


class JsonLineFormatter(logging.Formatter):
    """One JSON object per record: ts, level, logger, msg."""

    def format(self, record: logging.LogRecord) -> str:
        doc = {
            "ts": self.formatTime(record, "%Y-%m-%dT%H:%M:%S"),
            "level": record.levelname,
            "logger": record.name,
            "msg": record.getMessage(),
        }
        if record.exc_info:
            doc["exc"] = self.formatException(record.exc_info)
        return json.dumps(doc, ensure_ascii=False)


def configure_logging(level: str = "INFO", json_lines: bool = False) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if json_lines:
        handler.setFormatter(JsonLineFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s [%(levelname)s] %(name)s: %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level.upper())


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    p = argparse.ArgumentParser(
        prog="ocs-arc",
        description="Online conformal selection experiments (OCS-ARC, OB, repeated CS, mOCS-ARC)",
    )
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the experiment grid of a config file")
    run.add_argument("config", help="Path to experiment YAML")
    run.add_argument("--out", default=None, help="Output directory (overrides output.dir)")
    run.add_argument("--replicates", type=int, default=None, help="Monte Carlo replicates per cell")
    run.add_argument("--seed", type=int, default=None, help="Base seed; replicate i uses seed+i")
    run.add_argument("--trajectories", action="store_true", default=None,
                     help="Also write one trajectory CSV per replicate")
    run.add_argument("--workers", type=int, default=None, help="Replicate worker processes")

    val = sub.add_parser("validate", help="Check a config file and print diagnostics")
    val.add_argument("config", help="Path to experiment YAML")

    oc = sub.add_parser("oracle-check", help="Compare streaming online BH against recomputation")
    oc.add_argument("--streams", type=int, default=1000)
    oc.add_argument("--max-len", type=int, default=300)
    oc.add_argument("--seed", type=int, default=0)
    return p.parse_args(argv)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = parse_config(load_config(args.config))
    cfg = apply_overrides(
        cfg,
        out_dir=args.out,
        replicates=args.replicates,
        seed=args.seed,
        trajectories=args.trajectories,
        workers=args.workers,
    )
    configure_logging(cfg.logging.level, cfg.logging.json_lines)
    outputs = run_experiment(cfg)
    print(outputs.summary_path)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    diagnostics = validate_config(load_config(args.config))
    for d in diagnostics:
        print(d)
    if diagnostics:
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    report = oracle_check(streams=args.streams, max_len=args.max_len, seed=args.seed)
    for line in report.mismatches:
        print(line)
    print(f"{report.streams} streams, {report.steps} steps, {len(report.mismatches)} mismatches")
    return EXIT_OK if report.ok else EXIT_FAILURE


_COMMANDS = {
    "run": _cmd_run,
    "validate": _cmd_validate,
    "oracle-check": _cmd_oracle_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    configure_logging()
    try:
        defaults = default_config()["logging"]
        configure_logging(defaults["level"], defaults["json"])
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        log.error("%s", e)
        return EXIT_CONFIG
    except InvalidInputError as e:
        log.error("invalid input: %s", e)
        return EXIT_INPUT
    except Exception:
        log.exception("unexpected failure")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
