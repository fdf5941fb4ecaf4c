"""Command line front end.

    mpfix dealer gen --scenario attention-bench --out material/
    mpfix run-all --scenario softmax-bench --report softmax.jsonl
    mpfix run --scenario mlp-simple --party 1 --config run.json
    mpfix summarize softmax.jsonl --figures figs/

Log level comes from the MPFIX_LOG environment variable (DEBUG, INFO,
...). run-all and run write one JSON object per line to the report
path and, unless told otherwise, render the scenario's figures next to
it.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import report as report_mod
from . import runner
from .config import SCENARIO_NAMES, default_config, load_config

log = logging.getLogger("mpfix")


def _setup_logging() -> None:
    level = os.environ.get("MPFIX_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", choices=SCENARIO_NAMES)
    p.add_argument("--config", help="JSON config file; CLI flags override it")
    p.add_argument("--n", type=int, help="number of parties")
    p.add_argument("--seed", type=int)
    p.add_argument("--frac", type=int, help="fixed-point fractional bits")
    p.add_argument("--transport", choices=("inproc", "tcp"))
    p.add_argument("--base-port", type=int)
    p.add_argument("--precomp", help="directory of dealer output")
    p.add_argument("--param", action="append", default=[], metavar="K=V",
                   help="scenario parameter override (value parsed as JSON)")


def _build_config(args):
    if args.config:
        cfg = load_config(args.config)
        if args.scenario and args.scenario != cfg.scenario:
            raise SystemExit(f"--scenario {args.scenario} contradicts config "
                             f"file scenario {cfg.scenario}")
    elif args.scenario:
        cfg = default_config(args.scenario)
    else:
        raise SystemExit("need --scenario or --config")
    if args.n is not None:
        cfg.n_parties = args.n
    if args.seed is not None:
        cfg.seed = args.seed
    if args.frac is not None:
        cfg.frac = args.frac
    if args.transport:
        cfg.transport = args.transport
    if args.base_port is not None:
        cfg.base_port = args.base_port
    if args.precomp:
        cfg.precomp_dir = args.precomp
    for kv in args.param:
        key, _, raw = kv.partition("=")
        if not _:
            raise SystemExit(f"--param needs K=V, got {kv!r}")
        try:
            cfg.params[key] = json.loads(raw)
        except json.JSONDecodeError:
            cfg.params[key] = raw
    return cfg


def _emit(cfg, lines, args) -> None:
    path = args.report or f"{cfg.scenario}-report.jsonl"
    report_mod.write_report(path, lines)
    print(f"report: {path}")
    if not args.no_figures:
        figs = report_mod.render_figures(lines, os.path.dirname(path) or ".")
        for f in figs:
            print(f"figure: {f}")
    print(report_mod.summarize(lines))


def main(argv=None) -> int:
    _setup_logging()
    top = argparse.ArgumentParser(prog="mpfix", description=__doc__,
                                  formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = top.add_subparsers(dest="command", required=True)

    dealer = sub.add_parser("dealer", help="preprocessing operations")
    dsub = dealer.add_subparsers(dest="dealer_command", required=True)
    gen = dsub.add_parser("gen", help="generate correlated material files")
    _add_config_args(gen)
    gen.add_argument("--out", required=True, help="output directory")

    run = sub.add_parser("run", help="run one party over tcp")
    _add_config_args(run)
    run.add_argument("--party", type=int, required=True)
    run.add_argument("--report", help="report path (JSON lines)")
    run.add_argument("--no-figures", action="store_true")

    run_all = sub.add_parser("run-all", help="run every party in this process")
    _add_config_args(run_all)
    run_all.add_argument("--report", help="report path (JSON lines)")
    run_all.add_argument("--no-figures", action="store_true")

    summ = sub.add_parser("summarize", help="summarize an existing report")
    summ.add_argument("report_path")
    summ.add_argument("--figures", help="also render figures into this directory")

    args = top.parse_args(argv)

    if args.command == "dealer":
        cfg = _build_config(args)
        demands = runner.prepare_material(cfg, args.out)
        print(f"material for {cfg.scenario} (n={cfg.n_parties}) -> {args.out}")
        for key, count in sorted(demands.items(), key=lambda kv: kv[0].name()):
            print(f"  {key.name()}: {count}")
        return 0

    if args.command == "run":
        cfg = _build_config(args)
        lines = runner.run_party(cfg, args.party)
        if args.report is None:
            args.report = f"{cfg.scenario}-party{args.party}.jsonl"
        _emit(cfg, lines, args)
        return 0

    if args.command == "run-all":
        cfg = _build_config(args)
        lines = runner.run_all(cfg)
        _emit(cfg, lines, args)
        return 0

    if args.command == "summarize":
        lines = report_mod.read_report(args.report_path)
        print(report_mod.summarize(lines))
        if args.figures:
            for f in report_mod.render_figures(lines, args.figures):
                print(f"figure: {f}")
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
