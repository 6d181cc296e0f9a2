"""Command line entry point.

Exit status: 0 when every verdict passes, 2 on a scientific-verdict
failure (failed obstruction, violated return claim, residual over
tolerance), 1 on operational errors (bad config, unreadable files,
numerical machinery that cannot produce a verdict at all).
"""

import argparse
import sys
import traceback
from pathlib import Path

from .config import (EXPERIMENTS, ConfigError, config_to_json, parse_config,
                     scenario_hash, with_overrides)
from .runner import run_scenario
from .tables import write_summary_json


def _load_config(path: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        print(f"error: cannot read {path}: {e}", file=sys.stderr)
        return None
    try:
        return parse_config(text)
    except ConfigError as e:
        print(f"error: invalid configuration {path}:", file=sys.stderr)
        for where, reason in e.errors:
            print(f"  {where}: {reason}", file=sys.stderr)
        return None


def _cmd_run(args) -> int:
    cfg = _load_config(args.config_path)
    if cfg is None:
        return 1
    cfg = with_overrides(cfg, seed=args.seed, output_dir=args.out)
    try:
        result = run_scenario(cfg, jobs=args.jobs)
    except Exception as e:
        outdir = Path(cfg.output_dir)
        try:
            outdir.mkdir(parents=True, exist_ok=True)
            write_summary_json(outdir / "error.json", {
                "schema": "cocyclelab.error.v1",
                "scenario_hash": scenario_hash(cfg),
                "experiment": cfg.experiment,
                "error_type": type(e).__name__,
                "message": str(e),
                "traceback": traceback.format_exc(),
            })
        except OSError:
            pass
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    for line in result.summary_lines():
        print(line)
    print(f"wrote {Path(result.output_dir) / 'summary.json'} "
          f"[{result.scenario_hash}] in {result.wall_clock:.1f}s")
    return 0 if result.passed in (True, None) else 2


def _cmd_validate(args) -> int:
    cfg = _load_config(args.config_path)
    if cfg is None:
        return 1
    print(f"ok: {cfg.experiment} scenario [{scenario_hash(cfg)}]")
    print(config_to_json(cfg))
    return 0


def _cmd_list(args) -> int:
    width = max(len(n) for n in EXPERIMENTS)
    for name, desc in EXPERIMENTS.items():
        print(f"{name:<{width}}  {desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cocyclelab",
        description="Scenario harness for cocycle experiments over "
                    "hyperbolic base systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario configuration")
    p_run.add_argument("config_path")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config's seed")
    p_run.add_argument("--out", default=None,
                       help="override the config's output directory")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="worker threads for independent sub-tasks")
    p_run.set_defaults(fn=_cmd_run)

    p_val = sub.add_parser("validate",
                           help="validate a configuration and echo its "
                                "canonical form")
    p_val.add_argument("config_path")
    p_val.set_defaults(fn=_cmd_validate)

    p_list = sub.add_parser("list-experiments",
                            help="list experiment kinds with descriptions")
    p_list.set_defaults(fn=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
