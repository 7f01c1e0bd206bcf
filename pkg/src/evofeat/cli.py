"""Command line entry points: evolve, summarize, stats."""

from __future__ import annotations

import argparse
import sys

from .campaign import (
    emit_summary,
    load_experiment_config,
    run_campaign,
    stats_command,
)
from .exceptions import ConfigInvalidError, EvofeatError


def _parse_external(values):
    out = {}
    for item in values or []:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise ConfigInvalidError(
                f"--external-embedding expects NAME=path.csv, got {item!r}")
        out[name] = path
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evofeat",
        description="Grammar-based evolutionary feature engineering")
    sub = parser.add_subparsers(dest="command", required=True)

    evolve = sub.add_parser("evolve", help="run a full experiment campaign")
    evolve.add_argument("--config", required=True, help="TOML experiment file")
    evolve.add_argument("--grammar", help="override the grammar file path")
    evolve.add_argument("--seed", type=int, help="override the base seed")
    evolve.add_argument("--output", help="override the output directory")
    evolve.add_argument("--runs", type=int, help="override the number of runs")
    evolve.add_argument("--external-embedding", action="append", metavar="NAME=CSV",
                        help="add precomputed features as an extra method")
    evolve.add_argument("--plots", action="store_true",
                        help="also render SVG plots in the summary")

    summarize = sub.add_parser("summarize", help="emit aggregate tables for a campaign")
    summarize.add_argument("--campaign", required=True, help="campaign directory")
    summarize.add_argument("--output", help="directory for the tables")
    summarize.add_argument("--plots", action="store_true")

    stats = sub.add_parser("stats", help="statistical comparison of methods")
    stats.add_argument("--comparison", required=True, help="comparison.csv path")
    stats.add_argument("--tester", help="testing model to analyse "
                                        "(default: the campaign's proxy)")
    stats.add_argument("--alpha", type=float, default=0.05)
    stats.add_argument("--output", help="directory for report files")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "evolve":
            config = load_experiment_config(args.config)
            if args.grammar is not None:
                config.grammar_path = args.grammar
            if args.seed is not None:
                config.base_seed = args.seed
            if args.output is not None:
                config.output_dir = args.output
            if args.runs is not None:
                config.runs = args.runs
            config.external_embeddings.update(
                _parse_external(args.external_embedding))
            result = run_campaign(config, progress=True)
            emit_summary(config.output_dir, plots=args.plots)
            failed = [i for i, e in enumerate(result.run_errors) if e]
            if failed:
                print(f"{len(failed)} of {config.runs} runs failed: {failed}",
                      file=sys.stderr)
                return 2
            return 0
        if args.command == "summarize":
            written = emit_summary(args.campaign, out_dir=args.output,
                                   plots=args.plots)
            for path in written:
                print(path)
            return 0
        if args.command == "stats":
            report = stats_command(args.comparison, tester=args.tester,
                                   alpha=args.alpha, out_dir=args.output)
            print(report.render_text(), end="")
            return 0
    except ConfigInvalidError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (EvofeatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
