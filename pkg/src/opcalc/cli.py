"""``opcalc`` command line: run | gen | study."""

import argparse
import json
import os
import sys

from . import harness
from .errors import ConfigInvalid, MatrixFileMissing

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _out_dir(args):
    return os.environ.get("OPCALC_OUT") or args.out


def cmd_run(args):
    summary = harness.run_config(args.config, _out_dir(args), args.workers, args.strict_wrap)
    for name, entry in sorted(summary["checks"].items()):
        print(f"{name:32s} pass={entry['pass']} fail={entry['fail']} "
              f"wrap={entry['wrap']} skipped={entry['skipped']} "
              f"max_residual={entry['max_residual']}")
    return summary["exit_code"]


def cmd_gen(args):
    scenarios, matrices = harness.generate_ensemble(args.seed, args.count, args.dim, args.profile)
    path = harness.write_ensemble(_out_dir(args), scenarios, matrices)
    print(path)
    return EXIT_OK


def cmd_study(args):
    values = [float(v) for v in args.values.split(",") if v.strip()]
    reports = []
    for sc in harness.load_config(args.config):
        rep = harness.convergence_study(sc, args.sweep, values)
        sys.stdout.write(rep.table())
        reports.append(rep.to_dict())
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, f"study_{args.sweep}.json"), "w", encoding="utf-8") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="opcalc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the checks of a scenario config")
    run.add_argument("config")
    run.add_argument("--out", default="opcalc-out")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--strict-wrap", action="store_true",
                     help="treat branch-wrap rows as failures")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen", help="write a seeded ensemble of scenarios")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--dim", type=int, required=True)
    gen.add_argument("--profile", choices=harness.PROFILES, default="right-half-plane")
    gen.add_argument("--out", default="opcalc-out")
    gen.set_defaults(func=cmd_gen)

    study = sub.add_parser("study", help="convergence sweep over nodes or fd_step")
    study.add_argument("config")
    study.add_argument("--sweep", choices=("nodes", "fd_step"), required=True)
    study.add_argument("--values", required=True, help="comma-separated sweep values")
    study.add_argument("--out", default="opcalc-out")
    study.set_defaults(func=cmd_study)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigInvalid, MatrixFileMissing) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
