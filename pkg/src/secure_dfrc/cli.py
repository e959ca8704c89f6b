"""Command-line entry point: ``secure-dfrc <kind> [flags]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, SystemConfig
from .experiments import (DEFAULT_SWEEP, KIND_OVERRIDES, KINDS, SWEEP_KEY, ExperimentError,
                          ExperimentSpec, run_experiment)
from .optimizer import METHODS

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 2, 3


def _sweep_value(kind: str, text: str):
    if kind == "csi-error" and text.strip().lower() == "none":
        return "none"
    if kind == "scaling":
        return int(text)
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secure-dfrc",
                                     description="Monte-Carlo experiments for IRS-assisted secure DFRC.")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", type=Path, help="JSON file with SystemConfig fields")
        p.add_argument("--seed", type=int, default=0, help="base seed; realization r uses seed + r")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--methods", default="qtmm", help="comma-separated subset of qtmm,qtsdr")
        p.add_argument("--realizations", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
        if SWEEP_KEY[kind] is not None:
            default = ",".join(str(v) for v in DEFAULT_SWEEP[kind])
            p.add_argument("--sweep", default=None, help=f"comma-separated {SWEEP_KEY[kind]} values "
                                                         f"(default {default})")
    return parser


def load_config(kind: str, path: Path | None) -> SystemConfig:
    """Package defaults, then the experiment's own settings, then the user's file."""
    data = dict(KIND_OVERRIDES.get(kind, {}))
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
        data.update(user)
    return SystemConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.kind, args.config)
        methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
        if not methods or set(methods) - set(METHODS):
            raise ConfigError(f"--methods must be a subset of {','.join(METHODS)}")
        sweep = None
        if getattr(args, "sweep", None):
            sweep = [_sweep_value(args.kind, s) for s in args.sweep.split(",") if s.strip()]
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        spec = ExperimentSpec(kind=args.kind, base_config=config, sweep=sweep,
                              realizations=args.realizations, methods=methods,
                              out_dir=args.out, base_seed=args.seed, jobs=args.jobs)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run_experiment(spec)
    except (ExperimentError, OSError) as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"wrote {args.kind} results to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
