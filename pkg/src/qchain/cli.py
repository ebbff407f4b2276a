"""Command-line front end: simulate, preset, sweep, validate.

Exit codes: 0 success, 1 a claim or validation check failed, 2 a run did
not converge, 3 configuration error.  The tool is fully deterministic;
repeated invocations produce byte-identical output files.
"""

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .errors import ConfigError, NotConverged, SingularSchedule, StepSizeUnderflow
from .integrator import efficiency, integrate
from .model import pole_time
from .oracle import run_validation
from .sweep import (
    FIG3_COUPLINGS,
    evaluate_fig2_claims,
    evaluate_fig3_claims,
    evaluate_fig4_claims,
    preset_fig2,
    preset_fig3,
    preset_fig4,
    run_sweep,
    write_summary_csv,
    write_trajectories,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_NOT_CONVERGED = 2
EXIT_CONFIG = 3


def _preflight_poles(schedules, t_max: float) -> None:
    for i, sched in enumerate(schedules, start=1):
        pole = pole_time(sched)
        if pole is not None and pole <= t_max:
            raise SingularSchedule(
                pole, f"site {i} schedule hits a rate pole at t={pole:g} "
                      f"(theta at pi/4 mod pi/2); within the t_max={t_max:g} horizon")


def cmd_simulate(args) -> int:
    spec = load_config(args.config, overrides={
        "t_max": args.t_max, "residual_eps": args.residual_eps, "out_dir": args.out})
    _preflight_poles(spec.schedules, spec.integrator.t_max)
    traj = integrate(spec.model, spec.schedules, spec.integrator)
    if spec.write_trajectory:
        from .sweep import write_trajectory_csv
        spec.out_dir.mkdir(parents=True, exist_ok=True)
        out_path = spec.out_dir / f"{spec.source.stem}_trajectory.csv"
        write_trajectory_csv(traj, out_path)
        print(f"trajectory written to {out_path}")
    eta, unc = efficiency(traj, spec.integrator)   # raises NotConverged at t_max
    print(f"eta = {eta:.6f} +/- {unc:.2e}  "
          f"(t_end = {traj.times[-1]:.6g}, {traj.n_steps} steps)")
    return EXIT_OK


def _run_preset_experiment(config, workers: int, out_dir: Path,
                           summary_name: str, with_trajectories: bool):
    result = run_sweep(config, workers=workers, keep_trajectories=with_trajectories)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_summary_csv(result, out_dir / summary_name)
    if with_trajectories:
        write_trajectories(result, out_dir)
    return result


def cmd_preset(args) -> int:
    out_dir = Path(args.out)
    workers = args.workers
    claims = []
    if args.name == "fig2":
        result = _run_preset_experiment(preset_fig2(), workers, out_dir,
                                        "summary.csv", with_trajectories=True)
        claims = evaluate_fig2_claims(result)
    elif args.name == "fig3":
        for k, lam in enumerate(FIG3_COUPLINGS):
            name = "summary.csv" if k == 0 else f"summary_lambda{lam:g}.csv"
            result = _run_preset_experiment(preset_fig3(lam), workers, out_dir,
                                            name, with_trajectories=False)
            if lam in (0.1, 0.2):
                claims.extend(evaluate_fig3_claims(result))
    elif args.name == "fig4":
        result = _run_preset_experiment(preset_fig4(), workers, out_dir,
                                        "summary.csv", with_trajectories=False)
        claims = evaluate_fig4_claims(result)
    else:
        print(f"unknown preset {args.name!r}; choose from fig2, fig3, fig4",
              file=sys.stderr)
        return EXIT_CONFIG
    claims_path = out_dir / "claims.txt"
    claims_path.write_text("".join(c.line() + "\n" for c in claims))
    for c in claims:
        print(c.line())
    print(f"claims written to {claims_path}")
    return EXIT_OK if all(c.passed for c in claims) else EXIT_CHECK_FAILED


def cmd_sweep(args) -> int:
    spec = load_config(args.config, overrides={
        "t_max": args.t_max, "residual_eps": args.residual_eps, "out_dir": args.out},
        expect_sweep=True)
    keep = args.trajectories
    result = run_sweep(spec.experiment, workers=args.workers, keep_trajectories=keep)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    summary = spec.out_dir / "summary.csv"
    write_summary_csv(result, summary)
    if keep:
        write_trajectories(result, spec.out_dir)
    n_failed = sum(1 for row in result.rows if row.status != "ok")
    print(f"{len(result.rows)} cells -> {summary}"
          + (f" ({n_failed} failed; see status column)" if n_failed else ""))
    return EXIT_NOT_CONVERGED if n_failed else EXIT_OK


def cmd_validate(args) -> int:
    results = run_validation(args.level, workers=args.workers)
    width = max(len(r.name) for r in results)
    print(f"{'check'.ljust(width)}  {'deviation':>11}  {'threshold':>9}  result")
    for r in results:
        print(f"{r.name.ljust(width)}  {r.value:11.3e}  {r.threshold:9.0e}  "
              f"{'PASS' if r.passed else 'FAIL'}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qchain",
        description="Simulate energy transport through dissipative qubit chains "
                    "with tunable non-Markovian dephasing.")
    parser.add_argument("--version", action="version", version=f"qchain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one chain from a config file")
    p_sim.add_argument("--config", required=True, help="YAML configuration file")
    p_sim.add_argument("--out", default=None, help="output directory override")
    p_sim.add_argument("--t-max", type=float, default=None, dest="t_max")
    p_sim.add_argument("--residual-eps", type=float, default=None, dest="residual_eps")
    p_sim.set_defaults(func=cmd_simulate)

    p_pre = sub.add_parser("preset", help="run a benchmark experiment preset")
    p_pre.add_argument("name", help="fig2, fig3 or fig4")
    p_pre.add_argument("--out", default=".", help="output directory")
    p_pre.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p_pre.set_defaults(func=cmd_preset)

    p_swp = sub.add_parser("sweep", help="run a custom sweep from a config file")
    p_swp.add_argument("--config", required=True, help="YAML configuration file")
    p_swp.add_argument("--out", default=None, help="output directory override")
    p_swp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p_swp.add_argument("--trajectories", action="store_true",
                       help="write one trajectory CSV per cell")
    p_swp.add_argument("--t-max", type=float, default=None, dest="t_max")
    p_swp.add_argument("--residual-eps", type=float, default=None, dest="residual_eps")
    p_swp.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="run the correctness validation suite")
    p_val.add_argument("level", nargs="?", default="fast", choices=("fast", "full"))
    p_val.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1))
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularSchedule as exc:
        print(f"singular schedule: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except StepSizeUnderflow as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
