"""Command line: ``blowuplab run <config>`` and ``blowuplab list``."""
from __future__ import annotations

import argparse
import sys

from .experiments import KINDS, OUT_ENV, ConfigError, config_template, list_experiments, load_config, run_experiment


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowuplab", description="Desk-scale blow-up experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by an INI config")
    run.add_argument("config")
    run.add_argument("--out", help=f"output root (default: ${OUT_ENV} or ./runs)")
    run.add_argument("--seed", type=int, help="override [experiment] seed")
    run.add_argument("--threads", type=int, default=1, help="worker processes for independent sub-runs")
    ls = sub.add_parser("list", help="list experiment kinds")
    ls.add_argument("kind", nargs="?", choices=sorted(KINDS))
    ls.add_argument("--schema", action="store_true", help="show every option with its default")
    ls.add_argument("--template", action="store_true", help="print a config file for KIND with all defaults")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        if args.template:
            if not args.kind:
                print("--template needs a kind", file=sys.stderr)
                return 2
            sys.stdout.write(config_template(args.kind))
        else:
            sys.stdout.write(list_experiments(args.kind, args.schema))
        return 0
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    directory, manifest = run_experiment(cfg, args.out, args.threads)
    for name, check in manifest["checks"].items():
        print(f"{'PASS' if check['passed'] else 'FAIL'}  {name}")
    if manifest["error"]:
        print(f"error: {manifest['error']}", file=sys.stderr)
    print(f"artifacts: {directory}")
    return 0 if manifest["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
