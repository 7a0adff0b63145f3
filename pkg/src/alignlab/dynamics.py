"""Time evolution of the conservative density/G system.

The alignment system is evolved in the variables (rho, G) with
G = du/dx - L rho, which turns both equations into plain conservation laws

    d rho/dt + d(rho u)/dx = 0,        dG/dt + d(G u)/dx = 0,

while the velocity is recovered nonlocally at every stage from the mean-zero
primitives of rho - kappa and G - nu plus a momentum-fixing constant.  The
stiff rho * L rho term never appears explicitly: the operator enters through
u, one derivative smoother, though the recovery still feeds density modes
back diffusively, which is why the adaptive step carries a dissipative cap
next to the advective CFL bound.

Spatial discretization is pseudo-spectral with 2/3-rule dealiasing on all
products; time stepping is the three-stage third-order strong-stability
preserving Runge-Kutta scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from alignlab.fields import (
    TorusField,
    dealias_cutoff,
    grid,
    lowpass,
    mean_zero_primitive,
    spectral_derivative,
    tail_fraction,
    wavenumbers,
)
from alignlab.kernels import KernelSpec
from alignlab.nonlocal_operator import SpectralSymbol, load_or_compute_symbol

DEALIAS_DEFAULT = 2.0 / 3.0
CFL_DEFAULT = 0.4
CFL_FLOOR = 1e-12
DT_UNDERFLOW = 1e-12

EXIT_COMPLETED = "completed"
EXIT_BLOWUP = "blowup_detected"
EXIT_POSITIVITY = "positivity_lost"
EXIT_INSTABILITY = "numerical_instability"

PRESET_NAMES = ("flat", "shear", "bump", "supercritical")


class PositivityLost(RuntimeError):
    """Density reached zero after a step; terminal for the run."""


class NumericalInstability(RuntimeError):
    """Non-finite values appeared after a step; terminal for the run."""


@dataclass(frozen=True)
class ICSpec:
    """Initial data, either a named preset or finite Fourier coefficient lists.

    Coefficient lists are indexed by wavenumber: rho0(x) = sum_k rho0_cos[k]
    cos(kx) + rho0_sin[k] sin(kx), and likewise for u0.  The density mean
    must dominate the magnitudes of the remaining coefficients, which
    guarantees positivity on every grid.
    """

    preset: str | None = None
    steepness: float = 1.0
    rho0_cos: tuple[float, ...] = ()
    rho0_sin: tuple[float, ...] = ()
    u0_cos: tuple[float, ...] = ()
    u0_sin: tuple[float, ...] = ()

    def __post_init__(self):
        if self.preset is not None:
            if self.preset not in PRESET_NAMES:
                raise ValueError(f"unknown preset {self.preset!r}; choose from {PRESET_NAMES}")
            if self.preset == "supercritical" and not math.isfinite(self.steepness):
                raise ValueError("supercritical preset needs finite steepness")
            return
        for name in ("rho0_cos", "rho0_sin", "u0_cos", "u0_sin"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{name} coefficients must be finite")
            object.__setattr__(self, name, vals)
        if not self.rho0_cos:
            raise ValueError("coefficient initial data needs rho0_cos (index 0 = mean)")
        mean = self.rho0_cos[0]
        rest = sum(abs(v) for v in self.rho0_cos[1:]) + sum(abs(v) for v in self.rho0_sin[1:])
        if mean <= rest:
            raise ValueError("density mean must exceed the sum of the other coefficient "
                             "magnitudes (positivity)")

    @classmethod
    def flat(cls) -> "ICSpec":
        return cls(preset="flat")

    @classmethod
    def shear(cls) -> "ICSpec":
        return cls(preset="shear")

    @classmethod
    def bump(cls) -> "ICSpec":
        return cls(preset="bump")

    @classmethod
    def supercritical(cls, steepness: float) -> "ICSpec":
        return cls(preset="supercritical", steepness=float(steepness))

    def label(self) -> str:
        if self.preset == "supercritical":
            return f"supercritical({self.steepness:g})"
        if self.preset is not None:
            return self.preset
        return "coefficients"

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Sample (rho0, u0) on the n-point grid."""
        x = grid(n)
        if self.preset == "flat":
            return np.ones(n), np.zeros(n)
        if self.preset == "shear":
            return np.ones(n), -np.sin(x)
        if self.preset == "bump":
            return 1.0 + 0.5 * np.cos(x), np.zeros(n)
        if self.preset == "supercritical":
            return np.ones(n), -self.steepness * np.sin(x)

        def synth(cos_amps, sin_amps):
            out = np.zeros(n)
            for k, a in enumerate(cos_amps):
                out += a * np.cos(k * x)
            for k, b in enumerate(sin_amps):
                if k > 0:
                    out += b * np.sin(k * x)
            return out

        return synth(self.rho0_cos, self.rho0_sin), synth(self.u0_cos, self.u0_sin)


@dataclass(frozen=True)
class RunConfig:
    """Everything a single simulation needs; validated on construction."""

    kernel: KernelSpec
    ic: ICSpec
    n: int = 256
    t_end: float = 2.0
    cfl: float = CFL_DEFAULT
    dealias: float = DEALIAS_DEFAULT
    snapshot_every: float = 0.5
    diag_every: float = 0.05
    symbol_tol: float = 1e-10
    out_dir: str | None = None
    symbol_cache: str | None = None
    holder_betas: tuple[float, ...] = (0.25, 0.5, 0.75)

    def __post_init__(self):
        if self.n < 32 or (self.n & (self.n - 1)) != 0:
            raise ValueError("n must be a power of two >= 32")
        if not (self.t_end > 0.0):
            raise ValueError("t_end must be positive")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError("cfl must be in (0, 1]")
        if not (0.0 < self.dealias <= 1.0):
            raise ValueError("dealias must be in (0, 1]")
        if not (self.snapshot_every > 0.0 and self.diag_every > 0.0):
            raise ValueError("cadences must be positive")
        if not (1e-14 <= self.symbol_tol <= 1e-6):
            raise ValueError("symbol_tol must lie in [1e-14, 1e-6]")


@dataclass(frozen=True)
class SimState:
    """Full solver state at one time, with the velocity cache kept fresh."""

    t: float
    rho: TorusField
    g: TorusField
    kappa: float
    nu: float
    p0: float
    u: TorusField
    steps: int = 0


def _recover_u(rho: np.ndarray, g: np.ndarray, kappa: float, nu: float, p0: float,
               symbol: SpectralSymbol, dealias: float) -> np.ndarray:
    """u = L Phi + Psi + I0 from the mean-zero primitives Phi, Psi."""
    n = rho.shape[0]
    theta = rho - kappa
    phi = mean_zero_primitive(theta)
    psi = mean_zero_primitive(g - nu)
    lphi = np.fft.irfft(np.fft.rfft(phi) * symbol.lam, n)
    kmax = dealias_cutoff(n, dealias)
    rho_psi = float(np.mean(lowpass(rho, kmax) * lowpass(psi, kmax))) * 2.0 * np.pi
    i0 = (p0 - rho_psi) / (2.0 * np.pi * kappa)
    return lphi + psi + i0


def recover_velocity(state: SimState, symbol: SpectralSymbol,
                     dealias: float = DEALIAS_DEFAULT) -> TorusField:
    """Velocity from (rho, G) and the conserved scalars.

    The construction makes du/dx - L rho - G = -nu identically, and the
    momentum integral fixes the remaining constant.
    """
    if state.kappa == 0.0:
        raise ValueError("velocity recovery needs a nonzero average density")
    return TorusField(_recover_u(state.rho.values, state.g.values, state.kappa,
                                 state.nu, state.p0, symbol, dealias))


def init_state(ic: ICSpec, spec: KernelSpec, n: int,
               symbol: SpectralSymbol | None = None,
               dealias: float = DEALIAS_DEFAULT,
               symbol_tol: float = 1e-10) -> SimState:
    """Sample the initial data and assemble the conservative state.

    G0 = du0/dx - L rho0 is formed spectrally; the conserved means kappa, nu
    and the initial momentum P0 are recorded; the cached velocity must
    reproduce u0 to 1e-10, which cross-checks the recovery formula.
    """
    if symbol is None:
        symbol = load_or_compute_symbol(spec, n, symbol_tol)
    rho0, u0 = ic.sample(n)
    if np.min(rho0) <= 0.0:
        raise ValueError("positivity of initial density required")
    lrho0 = np.fft.irfft(np.fft.rfft(rho0) * symbol.lam, n)
    g0 = spectral_derivative(u0) - lrho0
    kappa = float(np.mean(rho0))
    nu = float(np.mean(g0))
    p0 = float(np.mean(rho0 * u0)) * 2.0 * np.pi
    u_rec = _recover_u(rho0, g0, kappa, nu, p0, symbol, dealias)
    err = float(np.max(np.abs(u_rec - u0)))
    if err > 1e-10 * (1.0 + float(np.max(np.abs(u0)))):
        raise NumericalInstability(
            f"velocity recovery failed to reproduce u0 (max error {err:.3e})")
    return SimState(t=0.0, rho=TorusField(rho0), g=TorusField(g0), kappa=kappa,
                    nu=nu, p0=p0, u=TorusField(u_rec), steps=0)


def _rhs_arrays(rho: np.ndarray, g: np.ndarray, u: np.ndarray,
                dealias: float) -> tuple[np.ndarray, np.ndarray]:
    n = rho.shape[0]
    kmax = dealias_cutoff(n, dealias)
    u_d = lowpass(u, kmax)
    flux_rho = lowpass(rho, kmax) * u_d
    flux_g = lowpass(g, kmax) * u_d
    k = wavenumbers(n)
    out = []
    for flux in (flux_rho, flux_g):
        coeff = np.fft.rfft(flux)
        coeff *= 1j * k
        coeff[-1] = 0.0
        coeff[kmax + 1 :] = 0.0
        out.append(-np.fft.irfft(coeff, n))
    return out[0], out[1]


def rhs(state: SimState, symbol: SpectralSymbol,
        dealias: float = DEALIAS_DEFAULT) -> tuple[TorusField, TorusField]:
    """Conservative tendencies (-d(rho u)/dx, -d(G u)/dx), fully dealiased.

    Both factors of each product are truncated to the dealias fraction of
    modes and so is the resulting flux derivative; the spectral derivative
    kills mode zero, so both outputs have exactly zero mean.
    """
    drho, dg = _rhs_arrays(state.rho.values, state.g.values, state.u.values, dealias)
    return TorusField(drho), TorusField(dg)


def step(state: SimState, dt: float, symbol: SpectralSymbol,
         dealias: float = DEALIAS_DEFAULT) -> SimState:
    """One three-stage third-order SSP Runge-Kutta step.

    The velocity is recovered afresh at every stage.  Raises PositivityLost
    or NumericalInstability when the new state is unusable; kappa, nu and P0
    ride along unchanged.
    """
    if not (dt > 0.0):
        raise ValueError("dt must be positive")
    kappa, nu, p0 = state.kappa, state.nu, state.p0
    r0, g0 = state.rho.values, state.g.values

    dr, dg = _rhs_arrays(r0, g0, state.u.values, dealias)
    r1 = r0 + dt * dr
    g1 = g0 + dt * dg

    u1 = _recover_u(r1, g1, kappa, nu, p0, symbol, dealias)
    dr, dg = _rhs_arrays(r1, g1, u1, dealias)
    r2 = 0.75 * r0 + 0.25 * (r1 + dt * dr)
    g2 = 0.75 * g0 + 0.25 * (g1 + dt * dg)

    u2 = _recover_u(r2, g2, kappa, nu, p0, symbol, dealias)
    dr, dg = _rhs_arrays(r2, g2, u2, dealias)
    r3 = (r0 + 2.0 * (r2 + dt * dr)) / 3.0
    g3 = (g0 + 2.0 * (g2 + dt * dg)) / 3.0

    if not (np.all(np.isfinite(r3)) and np.all(np.isfinite(g3))):
        raise NumericalInstability(f"non-finite state after step at t={state.t + dt:.6g}")
    if np.min(r3) <= 0.0:
        raise PositivityLost(f"density reached zero at t={state.t + dt:.6g}")
    u3 = _recover_u(r3, g3, kappa, nu, p0, symbol, dealias)
    if not np.all(np.isfinite(u3)):
        raise NumericalInstability(f"non-finite velocity after step at t={state.t + dt:.6g}")
    return SimState(t=state.t + dt, rho=TorusField(r3), g=TorusField(g3),
                    kappa=kappa, nu=nu, p0=p0, u=TorusField(u3), steps=state.steps + 1)


STIFF_SAFETY = 2.0


def adaptive_dt(state: SimState, cfl: float = CFL_DEFAULT, cap: float = math.inf,
                lam_active_max: float = 0.0) -> float:
    """Advective CFL step with a dissipative stability cap.

    The advective part is dt = cfl * dx / (max|u| + floor).  The operator
    enters the dynamics only through the recovered velocity (a bounded
    multiplier, no gradient stiffness), but the velocity recovery feeds the
    density back diffusively with high-mode rate up to max(rho) * lambda_k,
    so explicit stability also needs dt <= 2 / (max(rho) * lambda_max) over
    the retained modes.  The advective part dominates while the flow moves;
    the dissipative cap matters in aligned, quasi-steady regimes where
    max|u| decays.  Both are capped by the snapshot cadence.
    """
    dx = 2.0 * np.pi / state.rho.n
    umax = float(np.max(np.abs(state.u.values)))
    dt = cfl * dx / (umax + CFL_FLOOR)
    if lam_active_max > 0.0:
        rho_max = float(np.max(state.rho.values))
        dt = min(dt, STIFF_SAFETY / (lam_active_max * rho_max + CFL_FLOOR))
    return min(dt, cap)


def integrate_fixed(state: SimState, dt: float, n_steps: int, symbol: SpectralSymbol,
                    dealias: float = DEALIAS_DEFAULT) -> SimState:
    """Fixed-step integration helper for self-convergence studies."""
    for _ in range(n_steps):
        state = step(state, dt, symbol, dealias)
    return state


@dataclass
class RunResult:
    snapshots: list[SimState]
    record: "object"
    status: str
    state: SimState
    detection_time: float | None = None
    detection_reason: str | None = None


def run(config: RunConfig) -> RunResult:
    """Integrate to t_end or a terminal condition.

    Snapshots are collected at the snapshot cadence and diagnostics appended
    at the (finer) diagnostics cadence; any blow-up indicator firing, loss of
    positivity, or numerical instability ends the run with the matching exit
    status.  Terminal statuses are data, not exceptions.
    """
    from alignlab.diagnostics import DiagnosticsRecord, RunMonitor, blowup_indicator

    spec = config.kernel
    symbol = load_or_compute_symbol(spec, config.n, config.symbol_tol,
                                    cache_dir=config.symbol_cache)
    state = init_state(config.ic, spec, config.n, symbol=symbol, dealias=config.dealias)
    monitor = RunMonitor(spec, symbol, config.n, dealias=config.dealias,
                         betas=config.holder_betas)
    record = DiagnosticsRecord(betas=config.holder_betas)
    record.append(monitor.measure(state))
    baseline_rhox = record.max_abs_rhox[0]

    snapshots = [state]
    status = EXIT_COMPLETED
    detection_time = None
    detection_reason = None
    next_diag = config.diag_every
    next_snap = config.snapshot_every
    eps = 1e-12
    kmax = dealias_cutoff(config.n, config.dealias)
    lam_active_max = float(np.max(symbol.lam[: kmax + 1]))

    while state.t < config.t_end - eps:
        dt_cfl = adaptive_dt(state, config.cfl, cap=config.snapshot_every,
                             lam_active_max=lam_active_max)
        if dt_cfl < DT_UNDERFLOW:
            status = EXIT_BLOWUP
            detection_time = state.t
            detection_reason = "dt_underflow"
            break
        target = min(next_diag, next_snap, config.t_end)
        dt = min(dt_cfl, max(target - state.t, eps))
        try:
            state = step(state, dt, symbol, config.dealias)
        except PositivityLost:
            # Positivity of the density is guaranteed for healthy solutions;
            # losing it while the spectrum is under stress is the solution
            # degrading at a singularity, not a solver bug.
            from alignlab.diagnostics import TAIL_CONFIRM

            stress = tail_fraction(state.rho.values,
                                   dealias_cutoff(config.n, config.dealias))
            if stress > TAIL_CONFIRM:
                status = EXIT_BLOWUP
                detection_time = state.t
                detection_reason = "positivity_under_stress"
            else:
                status = EXIT_POSITIVITY
            break
        except NumericalInstability:
            status = EXIT_INSTABILITY
            break

        if state.t >= next_diag - eps or state.t >= config.t_end - eps:
            record.append(monitor.measure(state))
            indication = blowup_indicator(state, baseline_rhox, dt_cfl,
                                          dealias=config.dealias)
            if indication.fired:
                status = EXIT_BLOWUP
                detection_time = state.t
                detection_reason = indication.reason
                break
            while next_diag <= state.t + eps:
                next_diag += config.diag_every
        if state.t >= next_snap - eps:
            snapshots.append(state)
            while next_snap <= state.t + eps:
                next_snap += config.snapshot_every

    if snapshots[-1].t < state.t - eps:
        snapshots.append(state)
    return RunResult(snapshots=snapshots, record=record, status=status, state=state,
                     detection_time=detection_time, detection_reason=detection_reason)
