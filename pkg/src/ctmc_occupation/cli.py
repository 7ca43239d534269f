"""Command-line entry point: one subcommand per experiment, plus ``all``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import CtmcLabError
from .harness import EXPERIMENTS, emit_report, load_config

log = logging.getLogger(__name__)

PARALLEL = {"martingale", "ergodic", "fclt", "integral"}
ORDER = ("identities", "martingale", "ergodic", "fclt", "integral", "bv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctmc-occupation", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ORDER + ("all",):
        p = sub.add_parser(name, help=f"run the {name} experiment" if name != "all" else "run every experiment")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", required=True, help="directory for CSV and summary files")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--workers", type=int, default=1, help="worker processes for replications")
    return parser


def run(command: str, config, out, workers: int = 1) -> bool:
    names = ORDER if command == "all" else (command,)
    ok = True
    for name in names:
        kwargs = {"workers": workers} if name in PARALLEL else {}
        report = EXPERIMENTS[name](config, **kwargs)
        emit_report(report, out)
        print(report.summary())
        ok &= report.passed
    return ok


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        ok = run(args.command, config, args.out, args.workers)
    except CtmcLabError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
