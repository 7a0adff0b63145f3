"""Command-line orchestration: single runs, kernel audits, dichotomy pairs,
convergence studies, and deterministic parameter sweeps.

Exit codes are a stable contract:

    0  completed / all checks passed
    1  usage or configuration error
    2  blow-up detected
    3  positivity lost
    4  numerical instability
    5  convergence study not in its asymptotic regime (or orders off)
    6  dichotomy outcome disagrees with the threshold prediction
"""

from __future__ import annotations

import argparse
import multiprocessing
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from alignlab.config import ConfigError, ExperimentPlan, parse_config
from alignlab.dynamics import (
    EXIT_BLOWUP,
    EXIT_COMPLETED,
    EXIT_INSTABILITY,
    EXIT_POSITIVITY,
    ICSpec,
    RunConfig,
    init_state,
    integrate_fixed,
    run,
)
from alignlab.kernels import (
    KernelSpec,
    check_assumptions,
    doubling_constant_M,
    log_grid,
    power_inequality_check,
)
from alignlab.nonlocal_operator import load_or_compute_symbol
from alignlab.output import (
    fmt_float,
    write_json,
    write_kernel_assessment,
    write_run_outputs,
)

STATUS_CODES = {
    EXIT_COMPLETED: 0,
    EXIT_BLOWUP: 2,
    EXIT_POSITIVITY: 3,
    EXIT_INSTABILITY: 4,
}


def _resolve_out(plan: ExperimentPlan, default_leaf: str) -> Path:
    if plan.out_dir:
        return Path(plan.out_dir)
    root = os.environ.get("ALIGNLAB_OUT", "alignlab_out")
    return Path(root) / default_leaf


def _say(plan: ExperimentPlan, message: str) -> None:
    if not plan.quiet:
        print(message)


def cmd_simulate(plan: ExperimentPlan) -> int:
    """Integrate one configuration and write its artifacts."""
    config = plan.run_config
    leaf = f"simulate-{config.ic.label()}-{config.kernel.family}-n{config.n}"
    out = _resolve_out(plan, leaf)
    result = run(config)
    summary = write_run_outputs(result, config, out)
    _say(plan, f"simulate: {result.status} at t={result.state.t:.6g} "
               f"({result.state.steps} steps) -> {out}")
    return STATUS_CODES[result.status]


def cmd_kernel_check(plan: ExperimentPlan) -> int:
    """Audit the configured kernel against the assumption battery."""
    config = plan.run_config
    spec = config.kernel
    grid = log_grid(plan.audit_grid_min, spec.r0, plan.audit_grid_points)
    assessment = check_assumptions(spec, grid)
    failures = set(assessment.failed_flags())
    lemmas = {}
    try:
        lemmas["doubling_M_constant"] = doubling_constant_M(spec, grid)
    except Exception as exc:  # overflow near the smallest radius
        failures.add("doubling")
        lemmas["doubling_error"] = str(exc)
    c1, c2, ok = power_inequality_check(spec, 2.0, grid)
    lemmas["power_inequality"] = {"k": 2.0, "C1": c1, "C2": c2, "pass": ok}
    if not ok:
        failures.add("power_inequality")

    out = _resolve_out(plan, f"kernel-check-{spec.family}")
    out.mkdir(parents=True, exist_ok=True)
    write_kernel_assessment(assessment, out / "assessment.csv", out / "assessment.json")
    expected = set(plan.expected_failures)
    verdict = {
        "failures": sorted(failures),
        "expected_failures": sorted(expected),
        "unexpected": sorted(failures - expected),
        "missing_expected": sorted(expected - failures),
        "lemmas": lemmas,
    }
    write_json(verdict, out / "audit.json")
    ok_overall = not verdict["unexpected"] and not verdict["missing_expected"]
    _say(plan, f"kernel-check: {spec.family} failures={sorted(failures)} "
               f"expected={sorted(expected)} -> {'ok' if ok_overall else 'MISMATCH'}")
    return 0 if ok_overall else 1


def cmd_dichotomy(plan: ExperimentPlan) -> int:
    """Run matched initial data under an integrable and a singular kernel."""
    from alignlab.diagnostics import critical_threshold

    base = plan.run_config
    spec_int = KernelSpec(family=plan.dichotomy_integrable)
    spec_sing = KernelSpec(family=plan.dichotomy_singular)
    out = _resolve_out(plan, f"dichotomy-{base.ic.label()}-n{base.n}")

    min_sigma, predicted_global = critical_threshold(base.ic, spec_int, base.n,
                                                     base.symbol_tol)
    results = {}
    for tag, spec in (("integrable", spec_int), ("singular", spec_sing)):
        config = replace(base, kernel=spec, out_dir=None)
        result = run(config)
        write_run_outputs(result, config, out / tag)
        results[tag] = result
        _say(plan, f"dichotomy[{tag}={spec.family}]: {result.status} "
                   f"at t={result.state.t:.6g}")

    expected_int = EXIT_COMPLETED if predicted_global else EXIT_BLOWUP
    agree = (results["integrable"].status == expected_int
             and results["singular"].status == EXIT_COMPLETED)
    verdict = {
        "min_sigma0": min_sigma,
        "prediction_integrable": "global" if predicted_global else "blowup",
        "status_integrable": results["integrable"].status,
        "detection_time_integrable": results["integrable"].detection_time,
        "status_singular": results["singular"].status,
        "max_abs_rhox_singular": max(results["singular"].record.max_abs_rhox),
        "min_rho_singular": min(results["singular"].record.min_rho),
        "agree": agree,
    }
    write_json(verdict, out / "dichotomy.json")
    _say(plan, f"dichotomy: prediction={verdict['prediction_integrable']} agree={agree}")
    return 0 if agree else 6


def _temporal_orders(config: RunConfig, t_compare: float, dt_base: float | None):
    symbol = load_or_compute_symbol(config.kernel, config.n, config.symbol_tol,
                                    cache_dir=config.symbol_cache)
    state0 = init_state(config.ic, config.kernel, config.n, symbol=symbol,
                        dealias=config.dealias)
    if dt_base is None:
        umax = float(np.max(np.abs(state0.u.values)))
        dx = 2.0 * np.pi / config.n
        dt_base = min(t_compare / 32.0, 0.5 * config.cfl * dx / (umax + 0.1))
    steps = max(1, int(round(t_compare / dt_base)))
    dt_base = t_compare / steps
    finals = []
    for mult in (1, 2, 4):
        final = integrate_fixed(state0, dt_base / mult, steps * mult, symbol,
                                config.dealias)
        finals.append(final.rho.values)
    e1 = float(np.max(np.abs(finals[0] - finals[1])))
    e2 = float(np.max(np.abs(finals[1] - finals[2])))
    return e1, e2


def _spatial_errors(config: RunConfig, t_compare: float):
    """Discrepancies across n, 2n, 4n at a shared fixed dt.

    A shared dt keeps the temporal error common to all three runs, so the
    differences expose the spatial (spectral truncation) error alone.
    """
    from alignlab.fields import dealias_cutoff, tail_fraction

    rho0, u0 = config.ic.sample(4 * config.n)
    dx_fine = 2.0 * np.pi / (4 * config.n)
    dt = 0.25 * config.cfl * dx_fine / (float(np.max(np.abs(u0))) + 0.1)
    steps = max(1, int(np.ceil(t_compare / dt)))
    dt = t_compare / steps
    fields = {}
    tails = {}
    for n in (config.n, 2 * config.n, 4 * config.n):
        symbol = load_or_compute_symbol(config.kernel, n, config.symbol_tol,
                                        cache_dir=config.symbol_cache)
        try:
            state = init_state(config.ic, config.kernel, n, symbol=symbol,
                               dealias=config.dealias)
            state = integrate_fixed(state, dt, steps, symbol, config.dealias)
        except Exception:
            return None, None, EXIT_INSTABILITY
        fields[n] = state.rho.values
        tails[n] = tail_fraction(state.rho.values, dealias_cutoff(n, config.dealias))
    n = config.n
    d1 = float(np.max(np.abs(fields[n] - fields[2 * n][::2])))
    d2 = float(np.max(np.abs(fields[2 * n] - fields[4 * n][::2])))
    return (d1, d2), tails, EXIT_COMPLETED


def cmd_convergence(plan: ExperimentPlan) -> int:
    """Temporal Richardson orders plus fixed-dt spatial discrepancies."""
    config = plan.run_config
    t_compare = plan.convergence_t

    try:
        e1, e2 = _temporal_orders(config, t_compare, plan.convergence_dt)
    except Exception:
        # the solver dying during the study is the clearest sign the setup
        # is outside the asymptotic regime
        out = _resolve_out(plan, f"convergence-{config.ic.label()}-{config.kernel.family}")
        out.mkdir(parents=True, exist_ok=True)
        write_json({"asymptotic": False, "error": "solver failed during study"},
                   out / "convergence.json")
        _say(plan, "convergence: not in asymptotic regime (solver failed)")
        return 5
    roundoff = 1e-13
    if e1 < roundoff and e2 < roundoff:
        temporal_order = None
        temporal_ok = True
    elif e2 == 0.0:
        temporal_order = None
        temporal_ok = False
    else:
        temporal_order = float(np.log2(e1 / e2))
        temporal_ok = 2.7 <= temporal_order <= 3.3

    spatial, tails, status = _spatial_errors(config, t_compare)
    rough = False
    spatial_ratio = None
    if status != EXIT_COMPLETED:
        spatial_ok = False
        rough = True
    else:
        d1, d2 = spatial
        rough = max(tails.values()) > 0.05
        if d1 < roundoff and d2 < roundoff:
            spatial_ok = True
        elif d2 == 0.0:
            spatial_ok = d1 < roundoff
        else:
            spatial_ratio = d1 / d2
            spatial_ok = spatial_ratio > 10.0

    report = {
        "temporal": {"e_dt": e1, "e_dt_half": e2, "order": temporal_order,
                     "ok": temporal_ok},
        "spatial": {"pairs": spatial, "ratio": spatial_ratio,
                    "tails": tails, "ok": spatial_ok},
        "asymptotic": not rough,
    }
    out = _resolve_out(plan, f"convergence-{config.ic.label()}-{config.kernel.family}")
    out.mkdir(parents=True, exist_ok=True)
    write_json(report, out / "convergence.json")
    if rough:
        _say(plan, "convergence: not in asymptotic regime")
        return 5
    ok = temporal_ok and spatial_ok
    _say(plan, f"convergence: temporal order {temporal_order} spatial ratio "
               f"{spatial_ratio} -> {'ok' if ok else 'FAIL'}")
    return 0 if ok else 5


def _apply_sweep_value(config: RunConfig, param: str, value: float) -> RunConfig:
    if param == "ic.steepness":
        if config.ic.preset != "supercritical":
            raise ConfigError("sweeping ic.steepness requires the supercritical preset")
        return replace(config, ic=ICSpec.supercritical(value))
    if param == "run.n":
        return replace(config, n=int(value))
    if param == "run.cfl":
        return replace(config, cfl=value)
    if param == "kernel.alpha":
        return replace(config, kernel=replace(config.kernel, alpha=value))
    raise ConfigError(f"unsupported sweep parameter {param!r}")


def _sweep_point(args) -> tuple[int, str, dict]:
    index, config, out_dir = args
    result = run(config)
    summary = write_run_outputs(result, config, out_dir)
    return index, result.status, summary


def cmd_sweep(plan: ExperimentPlan) -> int:
    """Deterministic parameter sweep over a worker pool."""
    if plan.sweep_param is None:
        raise ConfigError("sweep command needs a [sweep] section with param and values")
    base = plan.run_config
    out = _resolve_out(plan, f"sweep-{plan.sweep_param.replace('.', '-')}")
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for i, value in enumerate(plan.sweep_values):
        config = _apply_sweep_value(base, plan.sweep_param, value)
        point_dir = out / f"point_{i:03d}_{plan.sweep_param}={value:g}"
        jobs.append((i, config, point_dir))

    workers = max(1, min(plan.workers, len(jobs)))
    if workers == 1:
        outcomes = [_sweep_point(job) for job in jobs]
    else:
        with multiprocessing.Pool(workers) as pool:
            outcomes = pool.map(_sweep_point, jobs)
    outcomes.sort(key=lambda item: item[0])

    header = ("index,value,exit_status,min_rho,max_rho,max_abs_rhox,"
              "momentum_drift,detection_time")
    lines = [header]
    for (i, status, summary), value in zip(outcomes, plan.sweep_values):
        env = summary["envelopes"]
        det = summary["detection_time"]
        lines.append(",".join([
            str(i), fmt_float(value), status, fmt_float(env["min_rho"]), fmt_float(env["max_rho"]),
            fmt_float(env["max_abs_rhox"]), fmt_float(summary["momentum_drift"]),
            fmt_float(det) if det is not None else "",
        ]))
    tmp = out / "sweep.csv.tmp"
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(out / "sweep.csv")
    _say(plan, f"sweep: {len(jobs)} points -> {out}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "kernel-check": cmd_kernel_check,
    "dichotomy": cmd_dichotomy,
    "convergence": cmd_convergence,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alignlab",
        description="numerical laboratory for 1D periodic alignment dynamics")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes for sweeps")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; all current methods are deterministic")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        plan = parse_config(args.config)
        if args.out is not None:
            plan.out_dir = args.out
        plan.workers = args.workers
        plan.seed = args.seed
        plan.quiet = args.quiet
        plan.kind = args.command
        return _COMMANDS[args.command](plan)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
