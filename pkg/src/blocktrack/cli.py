"""Command line entry point.

Exit codes: 0 when every check passes, 1 when a bound is violated, 2 on
configuration or input errors, 3 when the simulation itself fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from blocktrack import handeye
from blocktrack.config import load_scenario, parse_calibration, preset
from blocktrack.errors import BlockTrackError, ConfigError, ScenarioError
from blocktrack.harness import compare_runs, read_metrics, run_checks, run_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
PRESETS = ("fig7-upper", "fig7-lower")


def _report(checks: dict) -> int:
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


def _run(cfg, args) -> int:
    overrides = {"seed": args.seed, "duration": args.duration, "out_dir": args.out_dir}
    if args.no_ekf:
        overrides["use_ekf"] = False
    cfg = cfg.with_overrides(**overrides)
    result = run_scenario(cfg)
    print(json.dumps(result.metrics.to_dict(), indent=2, sort_keys=True))
    if cfg.out_dir is not None:
        print(f"traces written to {cfg.out_dir}")
    return _report(run_checks(cfg, result.metrics))


def cmd_run(args) -> int:
    return _run(load_scenario(args.config), args)


def cmd_preset(args) -> int:
    cfg = preset(args.name)
    if args.out_dir is None:
        args.out_dir = str(Path("runs") / args.name)
    return _run(cfg, args)


def cmd_calib_study(args) -> int:
    cal = parse_calibration(Path(args.config).read_text())
    seed = cal["seed"] if args.seed is None else args.seed
    out = Path(args.out_dir or "runs/calib-study")
    out.mkdir(parents=True, exist_ok=True)
    studies = handeye.convergence_trials(
        cal["x_true"], cal["max_n"], cal["rot_noise"], cal["trans_noise"], seed, cal["trials"]
    )
    for k, study in enumerate(studies):
        name = "calib_study.csv" if len(studies) == 1 else f"calib_study_{k:03d}.csv"
        handeye.write_study(out / name, study)
    final = [(s[-1].rot_err, s[-1].trans_err) for s in studies]
    rot_frac, trans_frac = handeye.improvement_fractions(studies)
    summary = {
        "trials": len(studies),
        "max_n": cal["max_n"],
        "improved_fraction_rot": rot_frac,
        "improved_fraction_trans": trans_frac,
        "final_errors": final,
    }
    (out / "calib_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(
        f"{len(studies)} trial(s) written to {out}; error at n={cal['max_n']} <= error at n=3 in "
        f"{rot_frac:.0%} (rotation) and {trans_frac:.0%} (translation) of trials"
    )
    if cal["rot_noise"] == 0 and cal["trans_noise"] == 0:
        worst = max(max(r.rot_err, r.trans_err) for s in studies for r in s)
        return _report({f"noiseless recovery error {worst:.2e} < 1e-9": worst < 1e-9})
    return _report(
        {
            "rotation error shrinks with n in >= 90% of trials": rot_frac >= 0.9,
            "translation error shrinks with n in >= 90% of trials": trans_frac >= 0.9,
        }
    )


def cmd_compare(args) -> int:
    report = compare_runs(read_metrics(args.metrics_a), read_metrics(args.metrics_b))
    print(report.format())
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--duration", type=float, help="override the simulated duration in seconds")
    common.add_argument("--out-dir", help="directory for CSV traces and metrics.json")
    common.add_argument("--no-ekf", action="store_true", help="feed raw camera samples to the controller")

    parser = argparse.ArgumentParser(prog="blocktrack", description="Suspended-block tracking simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run a scenario from a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", parents=[common], help="run a named preset")
    p.add_argument("name", choices=PRESETS)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("calib-study", parents=[common], help="hand-eye calibration convergence study")
    p.add_argument("config")
    p.set_defaults(func=cmd_calib_study)

    p = sub.add_parser("compare", help="compare two metrics.json files (ratios b/a)")
    p.add_argument("metrics_a")
    p.add_argument("metrics_b")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except BlockTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
