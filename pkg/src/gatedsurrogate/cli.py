"""Command line entry point: ``gatedsurrogate {generate,offline,online,report}``."""
import argparse
import dataclasses
import logging
import os
from pathlib import Path
import sys

from . import harness
from .config import parse_config
from .errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_CHECK = 4

OUT_ENV = "GATEDSURROGATE_OUT"


def build_parser():
    parser = argparse.ArgumentParser(prog="gatedsurrogate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("generate", "run BO on the oracle and write the labelled corpus"),
        ("offline", "max-variance vs random learning curves on a corpus"),
        ("online", "uncertainty-gated loop vs pure-oracle baseline"),
        ("report", "grid-searched GP holdout quality on a corpus"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--out", help=f"output directory (overrides config and ${OUT_ENV})")
        p.add_argument("--seeds", help="comma-separated seeds, overrides the config")
        p.add_argument("--check", action="store_true", help="exit 4 if thresholds are missed")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("offline", "report"):
            p.add_argument("--dataset", help="corpus CSV (default: <out>/corpus.csv)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, args.command)
        if args.seeds:
            seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip())
            if not seeds:
                raise ConfigError("--seeds must list at least one seed")
            cfg = dataclasses.replace(cfg, seeds=seeds)
    except (ConfigError, ValueError) as exc:
        violations = getattr(exc, "violations", [str(exc)])
        for v in violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    for w in cfg.warnings:
        print(f"config warning: {w}", file=sys.stderr)

    out = Path(args.out or os.environ.get(OUT_ENV) or cfg.output_dir)
    try:
        if args.command == "generate":
            path, summary = harness.cmd_generate(cfg, out)
            print(f"wrote {path} ({summary['rows']} rows, best_y={summary['best_y']!r})")
        elif args.command == "offline":
            dataset = args.dataset or out / "corpus.csv"
            summary = harness.cmd_offline(cfg, dataset, out, check=args.check, jobs=args.jobs)
            for strategy, s in summary["strategies"].items():
                print(f"{strategy}: median rmse@{cfg.al.budget_fraction:.0%}="
                      f"{s['median_rmse_at_budget']!r} median fraction to tolerance="
                      f"{s['median_fraction_to_tolerance']!r}")
        elif args.command == "online":
            _, summary = harness.cmd_online(cfg, out, check=args.check, jobs=args.jobs)
            for variant, r in summary["call_reduction"].items():
                print(f"{variant}: pass rate {r['pass_rate']:.2f}")
        else:
            dataset = args.dataset or out / "corpus.csv"
            report = harness.cmd_report(cfg, dataset, out, check=args.check)
            print(f"median holdout R2={report['median_r_squared']!r} "
                  f"MAPE={report['median_mape']!r}")
    except harness.CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
