"""Command-line entry point: ``hybrid-rl {run,validate,replay,list-envs,list-agents}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

from ..agents import AGENTS
from ..environments import ENVIRONMENTS
from .config import ConfigError, ExperimentConfig, load_config
from .runner import run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybrid-rl", description="Hybrid offline/online RL experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file or shipped config name")
    run.add_argument("config")
    _add_run_flags(run)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")

    rep = sub.add_parser("replay", help="re-run from a manifest and compare CSV hashes")
    rep.add_argument("manifest")
    rep.add_argument("--out", help="directory for the re-run (default: a temporary directory)")
    rep.add_argument("--parallel", type=int, default=1)

    sub.add_parser("list-envs", help="registered environment names")
    sub.add_parser("list-agents", help="registered agent names")
    return p


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output root (default: $HYBRID_RL_OUT, then the config, then ./runs)")
    p.add_argument("--trials", type=int, help="override the number of trials")
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--parallel", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--format", choices=("csv", "svg", "both"), default="both")


def _cmd_run(args) -> int:
    cfg = load_config(args.config).with_overrides(trials=args.trials, base_seed=args.seed)
    manifest = run_experiment(cfg, args.out, parallel=max(1, args.parallel), fmt=args.format)
    print(manifest.output_dir)
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok: {cfg.name} ({cfg.env}/{cfg.agent}, {cfg.trials} trials)")
    return EXIT_OK


def _cmd_replay(args) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text())
        cfg = ExperimentConfig.from_dict(manifest["config"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None
    recorded_seeds = [t["seed"] for t in manifest["trials"]]
    if recorded_seeds != cfg.seeds():
        print(f"seed mismatch: manifest {recorded_seeds} vs derived {cfg.seeds()}", file=sys.stderr)
        return EXIT_RUNTIME
    with tempfile.TemporaryDirectory() as tmp:
        again = run_experiment(cfg, args.out or tmp, parallel=max(1, args.parallel), fmt="csv")
    expected = manifest["csv_sha256"]
    diff = sorted(k for k in set(expected) | set(again.csv_sha256) if expected.get(k) != again.csv_sha256.get(k))
    if diff:
        print(f"replay mismatch in {len(diff)} files, e.g. {diff[:3]}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"replay ok: {len(expected)} CSV hashes match")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-envs":
            print("\n".join(sorted(ENVIRONMENTS)))
            return EXIT_OK
        if args.command == "list-agents":
            print("\n".join(sorted(AGENTS)))
            return EXIT_OK
        return {"run": _cmd_run, "validate": _cmd_validate, "replay": _cmd_replay}[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything raised while running is a runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
