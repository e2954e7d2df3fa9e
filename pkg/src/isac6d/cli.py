"""Command-line entry point ``sense``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import PRESETS, load_config
from .harness import run_single_shot_experiment, run_tracking_experiment
from .oracle import run_oracle_suite

log = logging.getLogger("isac6d")


def _common(p: argparse.ArgumentParser, with_config: bool = True):
    if with_config:
        p.add_argument("config", nargs="?", help="YAML experiment file (layered on --preset if given)")
    p.add_argument("--preset", choices=PRESETS, help="named preset to start from")
    p.add_argument("--seed", type=int, help="override the sweep seed")
    p.add_argument("--trials", type=int, help="override the Monte-Carlo trial count")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sense", description="6D sensing and tracking simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="single-shot RMSE sweep over SNR")
    _common(run)
    run.add_argument("--snr", type=float, nargs="+", help="override the SNR list (dB)")
    run.add_argument("--workers", type=int, default=1, help="worker processes")
    run.add_argument("--dump-trials", action="store_true", help="write per-trial JSON lines")

    track = sub.add_parser("track", help="Kalman tracking run")
    _common(track)

    oracle = sub.add_parser("oracle", help="noiseless self-check suite")
    oracle.add_argument("--out", type=Path, default=None, help="optional report file")
    return parser


def _load(args):
    if args.config is None and args.preset is None:
        raise SystemExit("give a config file or --preset")
    cfg = load_config(args.config, preset=args.preset)
    sweep = cfg.sweep
    if args.seed is not None:
        sweep = replace(sweep, seed=args.seed)
    if args.trials is not None:
        sweep = replace(sweep, trials=args.trials)
    return replace(cfg, sweep=sweep)


def cmd_run(args) -> int:
    cfg = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    dump = args.out / f"{cfg.name}_trials.jsonl" if args.dump_trials else None
    report = run_single_shot_experiment(cfg, workers=args.workers, dump_path=dump, snr_db=args.snr)
    path = args.out / f"{cfg.name}_rmse.csv"
    report.to_csv(path)
    print(report.summary())
    print(f"wrote {path}")
    return 0


def cmd_track(args) -> int:
    cfg = _load(args)
    result = run_tracking_experiment(cfg)
    path = args.out / f"{cfg.name}_track.jsonl"
    result.to_jsonl(path)
    print(result.summary())
    for ev in result.events:
        print(f"event: {ev}")
    print(f"wrote {path}")
    return 0


def cmd_oracle(args) -> int:
    results = run_oracle_suite()
    lines = [r.line() for r in results]
    for line in lines:
        print(line)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text("\n".join(lines) + "\n")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": cmd_run, "track": cmd_track, "oracle": cmd_oracle}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
