import math

import numpy as np
import pytest

from alignlab.fields import TorusField, grid
from alignlab.kernels import KernelSpec
from alignlab.dynamics import (
    EXIT_COMPLETED,
    ICSpec,
    RunConfig,
    SimState,
    run,
)
from alignlab.diagnostics import (
    blowup_indicator,
    bounds_monitor,
    critical_steepness,
    critical_threshold,
    density_equation_residual,
    holder_report,
    m_lipschitz_velocity,
    maximum_principle_F,
    transport_Q,
    RunMonitor,
    summarize,
)
from alignlab.nonlocal_operator import compute_symbol


def _state_at(rho, u=None, t=1.0):
    n = rho.shape[0]
    u = np.zeros(n) if u is None else u
    return SimState(t=t, rho=TorusField(rho), g=TorusField(np.zeros(n)),
                    kappa=float(np.mean(rho)), nu=0.0, p0=0.0, u=TorusField(u))


# --------------------------------------------------------------- bounds

def test_bounds_monitor_values():
    assert bounds_monitor(_state_at(np.ones(64))) == (1.0, 1.0)
    x = grid(64)
    lo, hi = bounds_monitor(_state_at(1.0 + 0.5 * np.cos(x)))
    assert lo == pytest.approx(0.5, abs=1e-12)
    assert hi == pytest.approx(1.5, abs=1e-12)


def test_flat_run_series_constant(bump_run_256):
    cfg = RunConfig(kernel=KernelSpec("inverse_linear"), ic=ICSpec.flat(),
                    n=64, t_end=0.5, diag_every=0.1)
    rec = run(cfg).record
    assert max(rec.f_sup) == 0.0
    assert max(rec.q_sup) == 0.0
    assert max(rec.min_rho) - min(rec.min_rho) < 1e-12


# --------------------------------------------------- transported principles

def test_max_principle_trivial_when_G_zero(bump_run_256):
    _, result = bump_run_256
    # bump starts with F = G/rho from G = -L rho, transported thereafter
    report = maximum_principle_F(result.record)
    assert report.passed


def test_max_principle_shear(shear_run_256):
    _, result = shear_run_256
    rec = result.record
    assert rec.f_sup[0] == pytest.approx(1.0, abs=1e-12)
    assert rec.q_sup[0] == pytest.approx(1.0, abs=1e-10)
    assert maximum_principle_F(rec).passed
    assert transport_Q(rec).passed


def test_max_principle_overshoot_shrinks_with_dt(il_spec):
    def worst_excess(cfl):
        cfg = RunConfig(kernel=il_spec, ic=ICSpec.shear(), n=128, t_end=1.0,
                        cfl=cfl, diag_every=0.05)
        rec = run(cfg).record
        return max(0.0, max(s - rec.f_sup[0] for s in rec.f_sup[1:]))

    full, half = worst_excess(0.4), worst_excess(0.2)
    assert half <= 0.5 * full + 1e-12


def test_max_principle_reports_violation():
    from alignlab.diagnostics import DiagnosticsRecord

    rec = DiagnosticsRecord()
    base = {"min_rho": 1.0, "max_rho": 1.0, "max_abs_rhox": 0.0, "q_sup": 0.0,
            "momentum": 0.0, "g_residual": 0.0, "tail_fraction": 0.0,
            "k0": {b: 0.0 for b in rec.betas}, "m_lipschitz": 0.0}
    rec.append({"t": 0.0, "f_sup": 1.0, **base})
    rec.append({"t": 0.5, "f_sup": 1.0 + 5e-5, **base})  # within slack
    rec.append({"t": 1.0, "f_sup": 1.1, **base})  # violation
    report = maximum_principle_F(rec)
    assert not report.passed
    assert report.first_violation_t == 1.0


# --------------------------------------------------------------- holder

def test_holder_zero_for_constant_density(il_spec):
    ks = holder_report(_state_at(np.full(256, 2.0), t=1.0), il_spec)
    assert all(v == 0.0 for v in ks.values())


def test_holder_homogeneity(il_spec):
    x = grid(256)
    base = 1.0 + 0.2 * np.cos(3 * x)
    k1 = holder_report(_state_at(base, t=0.7), il_spec)
    k2 = holder_report(_state_at(2.0 * base - 0.5, t=0.7), il_spec)
    for beta in k1:
        assert k2[beta] == pytest.approx(2.0 * k1[beta], rel=1e-12)


def test_holder_window_validation(il_spec):
    state = _state_at(np.ones(256), t=1.0)
    with pytest.raises(ValueError):
        holder_report(_state_at(np.ones(256), t=0.0), il_spec)
    with pytest.raises(ValueError):
        holder_report(state, il_spec, r_window=(0.001, 0.002))  # below grid
    with pytest.raises(ValueError):
        holder_report(state, il_spec, r_window=(0.05, 3.0))  # beyond r0 cap


def test_holder_bounded_on_bump_run(bump_run_256):
    _, result = bump_run_256
    k05 = result.record.k0[0.5]
    assert np.all(np.isfinite(k05))
    assert max(k05) < 1.0


# --------------------------------------------------------------- m-Lipschitz

def test_m_lipschitz_constant_velocity(il_spec):
    state = _state_at(np.ones(256), u=np.full(256, 2.5))
    assert m_lipschitz_velocity(state, il_spec) == 0.0


def test_m_lipschitz_translation_invariance(il_spec):
    x = grid(256)
    a = m_lipschitz_velocity(_state_at(np.ones(256), u=np.sin(x)), il_spec)
    b = m_lipschitz_velocity(_state_at(np.ones(256), u=np.sin(x) + 7.0), il_spec)
    assert a == pytest.approx(b, rel=1e-14)
    assert 0.0 < a < 10.0


def test_m_lipschitz_bounded_over_run(shear_run_256):
    _, result = shear_run_256
    assert max(result.record.m_lipschitz) < 10.0


# ----------------------------------------------------------- threshold

def test_threshold_flat_is_global():
    spec = KernelSpec("lipschitz_gaussian")
    min_sigma, flag = critical_threshold(ICSpec.flat(), spec, n=256)
    assert flag
    assert min_sigma == pytest.approx(math.sqrt(2.0 * math.pi), rel=1e-9)


def test_threshold_rejects_singular_kernels():
    with pytest.raises(ValueError):
        critical_threshold(ICSpec.flat(), KernelSpec("inverse_linear"), n=64)


def test_threshold_sign_invariant_under_velocity_shift():
    spec = KernelSpec("lipschitz_gaussian")
    base = ICSpec(rho0_cos=(1.0,), u0_sin=(0.0, -3.0))
    shifted = ICSpec(rho0_cos=(1.0,), u0_cos=(5.0,), u0_sin=(0.0, -3.0))
    m1, f1 = critical_threshold(base, spec, n=256)
    m2, f2 = critical_threshold(shifted, spec, n=256)
    assert m1 == pytest.approx(m2, abs=1e-12)
    assert f1 == f2


def test_threshold_bisection_matches_mass():
    # for rho0 = 1 the threshold steepness is exactly the kernel mass 2 M(0+)
    spec = KernelSpec("lipschitz_gaussian")
    s_star = critical_steepness(spec, n=256)
    assert s_star == pytest.approx(math.sqrt(2.0 * math.pi), rel=1e-8)


def test_threshold_zero_kernel_is_burgers_criterion():
    min_sigma, flag = critical_threshold(ICSpec.supercritical(1.0),
                                         KernelSpec("zero"), n=256)
    assert min_sigma == pytest.approx(-1.0, abs=1e-12)
    assert not flag


# ----------------------------------------------------------- blow-up

def test_blowup_indicator_flat_never_fires():
    state = _state_at(np.ones(256))
    ind = blowup_indicator(state, initial_max_rhox=0.0, dt=0.1)
    assert not ind.fired and ind.reason is None
    assert ind.max_abs_rhox == 0.0 and ind.tail_fraction == 0.0


def test_blowup_indicator_dt_underflow():
    ind = blowup_indicator(_state_at(np.ones(256)), dt=1e-13)
    assert ind.fired and ind.reason == "dt_underflow"


def test_blowup_indicator_gradient_needs_spectral_stress():
    x = grid(256)
    smooth_steep = 1000.0 + 999.0 * np.cos(x)  # huge gradient, clean spectrum
    ind = blowup_indicator(_state_at(smooth_steep), initial_max_rhox=0.0, dt=0.1)
    assert not ind.fired
    rng = np.random.default_rng(1)
    stressed = smooth_steep + 5e2 * rng.normal(size=256)
    ind = blowup_indicator(_state_at(np.abs(stressed) + 1.0),
                           initial_max_rhox=0.0, dt=0.1)
    assert ind.fired and ind.reason in ("gradient", "tail_fraction")


def test_monitor_deterministic(il_spec, symbol_il_256):
    x = grid(256)
    state = _state_at(1.0 + 0.3 * np.cos(2 * x), u=0.1 * np.sin(x), t=0.5)
    monitor = RunMonitor(il_spec, symbol_il_256, 256)
    r1, r2 = monitor.measure(state), monitor.measure(state)
    assert r1 == r2


def test_density_equation_residual_third_order(il_spec):
    # the conservative solver never integrates the density equation
    # directly; its finite-difference-in-time residual across snapshots
    # must vanish at the order of the time stencil
    from dataclasses import replace

    sym = compute_symbol(il_spec, 128, 1e-10)
    base = RunConfig(kernel=il_spec, ic=ICSpec.shear(), n=128, t_end=1.0,
                     snapshot_every=0.1, diag_every=0.25)
    residuals = []
    for delta in (0.1, 0.05, 0.025):
        res = run(replace(base, snapshot_every=delta, diag_every=delta))
        i = round(0.5 / delta) - 1  # stencil node pinned at t = 0.5
        residuals.append(density_equation_residual(res.snapshots[i:i + 4], sym))
    r1 = residuals[0] / residuals[1]
    r2 = residuals[1] / residuals[2]
    assert 6.0 <= r1 <= 12.0 and 6.0 <= r2 <= 12.0


def test_density_equation_residual_validation(il_spec, symbol_il_256):
    from alignlab.dynamics import init_state

    st = init_state(ICSpec.bump(), il_spec, 256, symbol=symbol_il_256)
    with pytest.raises(ValueError):
        density_equation_residual([st, st], symbol_il_256)


def test_summary_contents(bump_run_256):
    cfg, result = bump_run_256
    summary = summarize(result, cfg)
    assert summary["exit_status"] == EXIT_COMPLETED
    assert summary["envelopes"]["min_rho"] == pytest.approx(0.5, abs=1e-9)
    assert summary["envelopes"]["max_rho"] == pytest.approx(1.5, abs=1e-9)
    assert summary["threshold"] is None  # singular kernel: no verdict
    assert summary["momentum_drift"] < 1e-10
