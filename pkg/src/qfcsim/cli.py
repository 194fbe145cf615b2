"""Command-line front end: ``qfcsim run|calibrate|preset``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import QfcError
from .scenario import PRESETS, TARGETS, Scenario, calibrate, dump_config, load_preset, load_scenario, run_scenario


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override scenario.seed")
    common.add_argument("--out-dir", type=Path, help="output root (default: scenario.out_dir)")
    common.add_argument("--ci-scale", type=float, nargs="?", const=0.1, default=None, metavar="FACTOR",
                        help="scale event counts and durations down (default factor 0.1)")

    p = argparse.ArgumentParser(prog="qfcsim", description="Quantum frequency conversion simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a scenario file")
    run.add_argument("config", type=Path)

    pre = sub.add_parser("preset", parents=[common], help="run a built-in preset")
    pre.add_argument("name", choices=PRESETS)

    cal = sub.add_parser("calibrate", parents=[common], help="bisect one knob to hit an observable")
    cal.add_argument("config", type=Path)
    cal.add_argument("--target", required=True, choices=TARGETS)
    cal.add_argument("--knob", required=True, help="parameter path, e.g. emitter.contaminant_ratio")
    cal.add_argument("--goal", required=True, type=float)
    cal.add_argument("--tol", required=True, type=float)
    cal.add_argument("--bounds", nargs=2, type=float, metavar=("LO", "HI"))
    cal.add_argument("--power", type=float, help="pump power (mW) for SBR_at_P / eta_ext_at_P")
    cal.add_argument("--output", type=Path, help="calibrated config path (default: <out-dir>/<name>.calibrated.toml)")
    return p


def _prepare(sc: Scenario, args) -> Scenario:
    if args.seed is not None:
        sc = sc.with_value("scenario.seed", args.seed)
    if args.ci_scale is not None:
        sc = sc.scaled(args.ci_scale)
    return sc


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "preset":
            sc = _prepare(load_preset(args.name), args)
        else:
            sc = _prepare(load_scenario(args.config), args)

        if args.command == "calibrate":
            res = calibrate(sc, args.target, args.knob, args.goal, args.tol, args.bounds, args.power)
            out_root = args.out_dir if args.out_dir is not None else Path(sc.meta.out_dir)
            path = args.output or out_root / f"{sc.meta.name}.calibrated.toml"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(dump_config(res.scenario.raw))
            sys.stdout.write(res.report())
            print(f"calibrated config written to {path}")
            return 0

        result = run_scenario(sc, args.out_dir)
        sys.stdout.write(result.files["summary.txt"])
        print(f"outputs written to {result.out_dir}")
        return 0
    except (QfcError, OSError) as exc:
        print(f"qfcsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
