"""Experiment configuration: sectioned key = value files, strictly validated.

Unknown sections or keys are hard errors carrying the nearest valid name, so
typos never silently fall back to defaults.  Every field has a default
except the kernel family and the initial condition.
"""

from __future__ import annotations

import configparser
import difflib
import math
import re
from dataclasses import dataclass
from pathlib import Path

from alignlab.dynamics import ICSpec, RunConfig
from alignlab.kernels import FAMILIES, KernelSpec


class ConfigError(ValueError):
    """Invalid, missing, or unknown configuration content."""


_SECTIONS = {
    "run": ("n", "t_end", "cfl", "dealias", "snapshot_every", "diag_every", "out"),
    "kernel": ("family", "alpha", "r0", "gamma", "quad_tol", "table_r", "table_psi"),
    "ic": ("preset", "rho0_cos", "rho0_sin", "u0_cos", "u0_sin"),
    "symbol": ("tol", "cache"),
    "sweep": ("param", "values"),
    "kernel_check": ("expected_failures", "grid_min", "grid_points"),
    "convergence": ("t_compare", "dt_base"),
    "dichotomy": ("integrable_family", "singular_family"),
}

#: Sweepable parameter paths understood by cmd_sweep.
SWEEP_PARAMS = ("ic.steepness", "run.n", "run.cfl", "kernel.alpha")


@dataclass
class ExperimentPlan:
    """A validated experiment: base run plus orchestration settings."""

    kind: str
    run_config: RunConfig
    out_dir: str | None = None
    workers: int = 1
    seed: int | None = None
    quiet: bool = False
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = ()
    expected_failures: tuple[str, ...] = ()
    audit_grid_min: float = 1e-6
    audit_grid_points: int = 4096
    convergence_t: float = 0.25
    convergence_dt: float | None = None
    dichotomy_integrable: str = "lipschitz_gaussian"
    dichotomy_singular: str = "inverse_linear"


def _suggest(name: str, options) -> str:
    close = difflib.get_close_matches(name, list(options), n=1)
    return f"; nearest valid name is {close[0]!r}" if close else ""


def _parse_float(raw: str, path: str) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"{path}: expected a number, got {raw!r}") from None
    if not math.isfinite(val):
        raise ConfigError(f"{path}: value must be finite")
    return val


def _parse_int(raw: str, path: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{path}: expected an integer, got {raw!r}") from None


def _parse_floats(raw: str, path: str) -> tuple[float, ...]:
    toks = raw.replace(",", " ").split()
    return tuple(_parse_float(t, path) for t in toks)


_PRESET_RE = re.compile(r"^(?P<name>[a-z_]+)(\((?P<arg>[^)]*)\))?$")


def _parse_ic(sec: dict) -> ICSpec:
    if "preset" in sec:
        m = _PRESET_RE.match(sec["preset"].strip())
        if m is None:
            raise ConfigError(f"ic.preset: cannot parse {sec['preset']!r}")
        name, arg = m.group("name"), m.group("arg")
        if name == "supercritical":
            if arg is None:
                raise ConfigError("ic.preset: supercritical needs a steepness, "
                                  "e.g. supercritical(5)")
            return ICSpec.supercritical(_parse_float(arg, "ic.preset"))
        if arg is not None:
            raise ConfigError(f"ic.preset: {name} takes no argument")
        try:
            return ICSpec(preset=name)
        except ValueError as exc:
            raise ConfigError(f"ic.preset: {exc}") from None
    coeff_keys = ("rho0_cos", "rho0_sin", "u0_cos", "u0_sin")
    if not any(k in sec for k in coeff_keys):
        raise ConfigError("ic section needs a preset or rho0_cos coefficients")
    kwargs = {k: _parse_floats(sec[k], f"ic.{k}") for k in coeff_keys if k in sec}
    try:
        return ICSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"ic: {exc}") from None


def _parse_kernel(sec: dict) -> KernelSpec:
    if "family" not in sec:
        raise ConfigError("kernel.family is required"
                          + _suggest("family", _SECTIONS["kernel"]))
    family = sec["family"].strip()
    if family not in FAMILIES:
        raise ConfigError(f"kernel.family: unknown family {family!r}"
                          + _suggest(family, FAMILIES))
    kwargs = {"family": family}
    for key, cast in (("alpha", _parse_float), ("r0", _parse_float),
                      ("gamma", _parse_float), ("quad_tol", _parse_float)):
        if key in sec:
            kwargs[key] = cast(sec[key], f"kernel.{key}")
    for key in ("table_r", "table_psi"):
        if key in sec:
            kwargs[key] = _parse_floats(sec[key], f"kernel.{key}")
    try:
        return KernelSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"kernel: {exc}") from None


def parse_config(path) -> ExperimentPlan:
    """Read and validate a sectioned key = value experiment file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    sections: dict[str, dict] = {}
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]" + _suggest(name, _SECTIONS))
        sec = {}
        for key, value in parser.items(name):
            if key not in _SECTIONS[name]:
                raise ConfigError(f"unknown key {key!r} in section [{name}]"
                                  + _suggest(key, _SECTIONS[name]))
            sec[key] = value
        sections[name] = sec

    if "kernel" not in sections:
        raise ConfigError("missing required section [kernel]")
    if "ic" not in sections:
        raise ConfigError("missing required section [ic]")
    kernel = _parse_kernel(sections["kernel"])
    ic = _parse_ic(sections["ic"])

    run_sec = sections.get("run", {})
    sym_sec = sections.get("symbol", {})
    run_kwargs: dict = {"kernel": kernel, "ic": ic}
    if "n" in run_sec:
        run_kwargs["n"] = _parse_int(run_sec["n"], "run.n")
    for key in ("t_end", "cfl", "dealias", "snapshot_every", "diag_every"):
        if key in run_sec:
            run_kwargs[key] = _parse_float(run_sec[key], f"run.{key}")
    if "out" in run_sec:
        run_kwargs["out_dir"] = run_sec["out"].strip()
    if "tol" in sym_sec:
        run_kwargs["symbol_tol"] = _parse_float(sym_sec["tol"], "symbol.tol")
    if "cache" in sym_sec:
        run_kwargs["symbol_cache"] = sym_sec["cache"].strip()
    try:
        run_config = RunConfig(**run_kwargs)
    except ValueError as exc:
        msg = str(exc)
        raise ConfigError(f"run: {msg}") from None

    plan = ExperimentPlan(kind="simulate", run_config=run_config,
                          out_dir=run_config.out_dir)

    if "sweep" in sections:
        sec = sections["sweep"]
        if "param" not in sec or "values" not in sec:
            raise ConfigError("sweep section needs both param and values")
        param = sec["param"].strip()
        if param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep.param: unknown parameter {param!r}"
                              + _suggest(param, SWEEP_PARAMS))
        values = _parse_floats(sec["values"], "sweep.values")
        if not values:
            raise ConfigError("sweep.values must not be empty")
        plan.sweep_param = param
        plan.sweep_values = values

    if "kernel_check" in sections:
        sec = sections["kernel_check"]
        if "expected_failures" in sec:
            plan.expected_failures = tuple(sec["expected_failures"].split())
        if "grid_min" in sec:
            plan.audit_grid_min = _parse_float(sec["grid_min"], "kernel_check.grid_min")
        if "grid_points" in sec:
            plan.audit_grid_points = _parse_int(sec["grid_points"],
                                                "kernel_check.grid_points")

    if "convergence" in sections:
        sec = sections["convergence"]
        if "t_compare" in sec:
            plan.convergence_t = _parse_float(sec["t_compare"], "convergence.t_compare")
        if "dt_base" in sec:
            plan.convergence_dt = _parse_float(sec["dt_base"], "convergence.dt_base")

    if "dichotomy" in sections:
        sec = sections["dichotomy"]
        for key, attr in (("integrable_family", "dichotomy_integrable"),
                          ("singular_family", "dichotomy_singular")):
            if key in sec:
                fam = sec[key].strip()
                if fam not in FAMILIES:
                    raise ConfigError(f"dichotomy.{key}: unknown family {fam!r}"
                                      + _suggest(fam, FAMILIES))
                setattr(plan, attr, fam)

    return plan
