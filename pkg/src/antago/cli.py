"""Command-line front end.

Subcommands::

    antago run SCENARIO [--out out.csv] [--method rk23|rk4] [--rel-tol ...]
    antago verify {matching|observer-decay|lyapunov|gradients|gains} [--seed N]
    antago sweep PARAM --values 1,5,10 SCENARIO [--out out.csv]
    antago presets

SCENARIO is either a scenario file path or the name of a bundled preset
(override the preset directory with the ``ANTAGO_PRESET_DIR`` environment
variable). Exit status is nonzero when a run terminates early or a
verification bound is violated.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .controller import validate_gains
from .engine import ScenarioConfig, diagnostics, simulate
from .errors import ScenarioError
from .scenario_io import (
    _atomic_write,
    list_presets,
    load_preset,
    load_scenario,
    save_trajectory_csv,
)
from .verify import SUITES

_SWEEP_GAIN_KEYS = ("k_p", "k_m", "k_i", "alpha")
_SWEEP_PLANT_KEYS = ("R", "m")
_SWEEP_KEYS = _SWEEP_GAIN_KEYS + _SWEEP_PLANT_KEYS + ("epsilon",)


def _resolve_scenario(ref: str) -> ScenarioConfig:
    path = Path(ref)
    if path.is_file():
        return load_scenario(path)
    if path.suffix:
        raise ScenarioError(f"scenario file not found: {ref}")
    return load_preset(ref)


def _apply_solver_flags(scenario: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if args.rel_tol is not None:
        changes["rel_tol"] = args.rel_tol
    if args.abs_tol is not None:
        changes["abs_tol"] = args.abs_tol
    if args.method is not None:
        changes["method"] = args.method
    if not changes:
        return scenario
    return replace(scenario, solver=replace(scenario.solver, **changes))


def _print_summary(summary) -> None:
    print(f"status: {summary.status}")
    print(f"samples: {summary.samples}")
    print(f"final x - x*: {summary.x_error:.6e} m")
    print(f"final sigma: {summary.sigma_final:.6e}")
    print(f"force-balance residual: {summary.force_balance_residual:.6e} N")
    print(f"settle time (|x - x*| > {summary.settle_tol:g}): {summary.settle_time:.4f} s")
    print(f"max Psi increment: {summary.max_psi_increment:.6e} (Psi max {summary.psi_max:.6e})")
    print(f"fitted zeta decay rate: {summary.zeta_rate:.6f} "
          f"(rel. err vs gain {summary.zeta_rate_rel_err:.3e})")
    print(f"crossed symmetric configuration: {summary.crossed_symmetric}")


def _cmd_run(args) -> int:
    scenario = _apply_solver_flags(_resolve_scenario(args.scenario), args)
    record = simulate(scenario)
    out = Path(args.out) if args.out else Path(f"{scenario.name or 'trajectory'}.csv")
    save_trajectory_csv(record, out)
    summary = diagnostics(record, scenario.gains, scenario.params)
    print(f"wrote {len(record)} samples to {out}")
    _print_summary(summary)
    if record.status != "ok":
        print(f"error: {record.detail}", file=sys.stderr)
        return 1
    return 0


def _cmd_verify(args) -> int:
    suite = SUITES[args.suite]
    report = suite(seed=args.seed) if args.suite in ("matching", "gradients") else suite()
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def _parse_values(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ScenarioError("range values must be 'start:stop:count'")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ScenarioError("range count must be at least 1")
        if n == 1:
            return [lo]
        return [lo + (hi - lo) * i / (n - 1) for i in range(n)]
    return [float(v) for v in text.split(",")]


def _sweep_variant(scenario: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    if param in _SWEEP_GAIN_KEYS:
        return replace(scenario, gains=replace(scenario.gains, **{param: value}))
    if param in _SWEEP_PLANT_KEYS:
        return replace(scenario, params=replace(scenario.params, **{param: value}))
    return scenario   # epsilon only enters the gain analysis, not the dynamics


def _cmd_sweep(args) -> int:
    base = _apply_solver_flags(_resolve_scenario(args.scenario), args)
    values = _parse_values(args.values)
    header = ("value,valid,positive_definite,rate_bound_ok,condition_product,"
              "status,x_error,settle_time,max_psi_increment,psi_max,zeta_rate")
    rows = [header]
    worst_exit = 0
    cached = None   # epsilon variants share one simulation
    for value in values:
        scenario = _sweep_variant(base, args.parameter, value)
        epsilon = value if args.parameter == "epsilon" else 0.0
        report = validate_gains(scenario.params, scenario.gains, epsilon=epsilon)
        valid = report.positive_definite and report.rate_bound_ok
        if args.parameter == "epsilon" and cached is not None:
            record, summary = cached
        else:
            record = simulate(scenario)
            summary = diagnostics(record, scenario.gains, scenario.params)
            if args.parameter == "epsilon":
                cached = (record, summary)
        if record.status != "ok":
            worst_exit = 1
        rows.append(",".join([
            repr(value), str(valid).lower(), str(report.positive_definite).lower(),
            str(report.rate_bound_ok).lower(), repr(report.condition_product),
            record.status, repr(summary.x_error), repr(summary.settle_time),
            repr(summary.max_psi_increment), repr(summary.psi_max),
            repr(summary.zeta_rate),
        ]))
        print(f"{args.parameter} = {value:g}: valid={valid} "
              f"product={report.condition_product:.4f} status={record.status}")
    if args.out:
        _atomic_write(Path(args.out), "\n".join(rows) + "\n")
        print(f"wrote {len(values)} rows to {args.out}")
    return worst_exit


def _cmd_presets(args) -> int:
    names = list_presets()
    if not names:
        print("no presets found")
        return 1
    for name in names:
        print(name)
    return 0


def _add_solver_flags(sub) -> None:
    sub.add_argument("--rel-tol", type=float, default=None,
                     help="adaptive solver relative tolerance")
    sub.add_argument("--abs-tol", type=float, default=None,
                     help="adaptive solver absolute tolerance")
    sub.add_argument("--method", choices=("rk23", "rk4"), default=None,
                     help="integration method")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antago",
        description="Simulation and verification of an antagonistic "
                    "soft-hydraulic actuator pair under energy-shaping control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and write a trajectory CSV")
    p_run.add_argument("scenario", help="scenario file path or preset name")
    p_run.add_argument("--out", help="output CSV path (default: <scenario>.csv)")
    _add_solver_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run a numerical verification suite")
    p_verify.add_argument("suite", choices=sorted(SUITES))
    p_verify.add_argument("--seed", type=int, default=0,
                          help="seed for the randomized suites")
    p_verify.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser("sweep", help="sweep one parameter and tabulate diagnostics")
    p_sweep.add_argument("parameter", choices=sorted(_SWEEP_KEYS))
    p_sweep.add_argument("scenario", help="scenario file path or preset name")
    p_sweep.add_argument("--values", required=True,
                         help="comma list '1,5,10' or range 'start:stop:count'")
    p_sweep.add_argument("--out", help="output CSV path")
    _add_solver_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_presets = sub.add_parser("presets", help="list bundled scenario presets")
    p_presets.set_defaults(func=_cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
