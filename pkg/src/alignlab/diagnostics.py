"""Runtime measurement of every theorem-level quantity on solver output.

Monitors are pure functions of their inputs: density extrema, the transported
sup-norms of F = G/rho and Q = dF/dx / rho, the momentum integral, the
defining identity of the reformulation as a corruption tripwire, spectral
tail energy, modulus-of-continuity constants weighted by powers of the tail
mass, the velocity's M-Lipschitz constant, the critical-threshold sign test
for integrable kernels, and a three-tripwire blow-up indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from alignlab.fields import dealias_cutoff, spectral_derivative, tail_fraction
from alignlab.kernels import (
    SINGULAR_FAMILIES,
    KernelSpec,
    eval_M,
)
from alignlab.nonlocal_operator import SpectralSymbol, compute_symbol

#: Spectral tail share beyond which the solution no longer resolves.
TAIL_THRESHOLD = 0.1

#: Tail share that must corroborate the gradient tripwire.  A smooth but
#: steep resolved profile can exceed any fixed gradient multiple while the
#: spectrum stays clean; requiring spectral stress prevents that misfire.
TAIL_CONFIRM = 0.02

#: Gradient growth factor over the initial data that arms the gradient tripwire.
GRADIENT_FACTOR = 1e3

#: Adaptive step underflow level.
DT_FLOOR = 1e-12

DEFAULT_BETAS = (0.25, 0.5, 0.75)

CSV_COLUMNS = ("t", "min_rho", "max_rho", "max_abs_rhox", "f_sup", "q_sup",
               "momentum", "g_residual", "tail_fraction",
               "k0_beta25", "k0_beta50", "k0_beta75")


def bounds_monitor(state) -> tuple[float, float]:
    """Pointwise density extrema (min rho, max rho)."""
    vals = state.rho.values
    return float(np.min(vals)), float(np.max(vals))


@dataclass
class DiagnosticsRecord:
    """Time series of every monitored invariant, one row per cadence tick."""

    betas: tuple[float, ...] = DEFAULT_BETAS
    t: list[float] = field(default_factory=list)
    min_rho: list[float] = field(default_factory=list)
    max_rho: list[float] = field(default_factory=list)
    max_abs_rhox: list[float] = field(default_factory=list)
    f_sup: list[float] = field(default_factory=list)
    q_sup: list[float] = field(default_factory=list)
    momentum: list[float] = field(default_factory=list)
    g_residual: list[float] = field(default_factory=list)
    tail_fraction: list[float] = field(default_factory=list)
    k0: dict[float, list[float]] = field(default_factory=dict)
    m_lipschitz: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.k0 = {beta: [] for beta in self.betas}

    def append(self, row: dict) -> None:
        if self.t and row["t"] <= self.t[-1]:
            raise ValueError("diagnostics rows must be strictly increasing in t")
        self.t.append(row["t"])
        self.min_rho.append(row["min_rho"])
        self.max_rho.append(row["max_rho"])
        self.max_abs_rhox.append(row["max_abs_rhox"])
        self.f_sup.append(row["f_sup"])
        self.q_sup.append(row["q_sup"])
        self.momentum.append(row["momentum"])
        self.g_residual.append(row["g_residual"])
        self.tail_fraction.append(row["tail_fraction"])
        for beta in self.betas:
            self.k0[beta].append(row["k0"][beta])
        self.m_lipschitz.append(row["m_lipschitz"])

    def __len__(self) -> int:
        return len(self.t)

    def csv_rows(self):
        """Rows in the fixed CSV schema (K0 at beta = 0.25, 0.5, 0.75)."""
        for i in range(len(self.t)):
            yield (self.t[i], self.min_rho[i], self.max_rho[i], self.max_abs_rhox[i],
                   self.f_sup[i], self.q_sup[i], self.momentum[i], self.g_residual[i],
                   self.tail_fraction[i],
                   self.k0.get(0.25, self.k0[self.betas[0]])[i],
                   self.k0.get(0.5, self.k0[self.betas[0]])[i],
                   self.k0.get(0.75, self.k0[self.betas[0]])[i])


class RunMonitor:
    """Per-run evaluator with the grid- and kernel-dependent tables precomputed."""

    def __init__(self, spec: KernelSpec, symbol: SpectralSymbol, n: int,
                 dealias: float = 2.0 / 3.0, betas: tuple[float, ...] = DEFAULT_BETAS,
                 r_max: float | None = None):
        self.spec = spec
        self.symbol = symbol
        self.n = n
        self.betas = betas
        self.kmax_active = dealias_cutoff(n, dealias)
        dx = 2.0 * np.pi / n
        self.dx = dx
        if r_max is None:
            r_max = min(spec.r0, np.pi / 2.0)
        self.holder_offsets = np.arange(2, int(np.floor(r_max / dx)) + 1)
        if self.holder_offsets.size and spec.family != "zero":
            self.holder_M = eval_M(self.spec, self.holder_offsets * dx)
        else:
            self.holder_offsets = np.arange(0)
            self.holder_M = np.zeros(0)
        mlip_m = np.arange(1, int(np.floor(1.0 / dx)) + 1)
        if spec.family != "zero":
            self.mlip_weights = 1.0 / (mlip_m * dx * eval_M(self.spec, mlip_m * dx))
        else:
            self.mlip_weights = np.zeros(mlip_m.size)
        self.mlip_offsets = mlip_m

    def _pair_sup(self, values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        out = np.empty(offsets.size)
        for i, m in enumerate(offsets):
            out[i] = np.max(np.abs(values - np.roll(values, -int(m))))
        return out

    def measure(self, state) -> dict:
        rho = state.rho.values
        g = state.g.values
        u = state.u.values
        rhox = spectral_derivative(rho)
        f_field = g / rho
        q_field = spectral_derivative(f_field) / rho
        lrho = np.fft.irfft(np.fft.rfft(rho) * self.symbol.lam, self.n)
        residual = float(np.max(np.abs(spectral_derivative(u) - lrho - g)))
        k0 = {}
        if self.holder_offsets.size and state.t > 0.0:
            diffs = self._pair_sup(rho, self.holder_offsets)
            for beta in self.betas:
                k0[beta] = float(state.t**beta * np.max(diffs * self.holder_M**beta))
        else:
            k0 = {beta: 0.0 for beta in self.betas}
        if self.mlip_weights.size:
            udiffs = self._pair_sup(u, self.mlip_offsets)
            mlip = float(np.max(udiffs * self.mlip_weights))
        else:
            mlip = 0.0
        return {
            "t": state.t,
            "min_rho": float(np.min(rho)),
            "max_rho": float(np.max(rho)),
            "max_abs_rhox": float(np.max(np.abs(rhox))),
            "f_sup": float(np.max(np.abs(f_field))),
            "q_sup": float(np.max(np.abs(q_field))),
            "momentum": float(np.mean(rho * u)) * 2.0 * np.pi,
            "g_residual": residual,
            "tail_fraction": tail_fraction(rho, self.kmax_active),
            "k0": k0,
            "m_lipschitz": mlip,
        }


@dataclass(frozen=True)
class PrincipleReport:
    passed: bool
    sup_initial: float
    worst_excess: float
    first_violation_t: float | None


def _transported_sup_check(ts, sups) -> PrincipleReport:
    sup0 = sups[0]
    tol = 1e-4 * sup0 + 1e-8
    worst = 0.0
    first_t = None
    for t, s in zip(ts[1:], sups[1:]):
        excess = s - (sup0 + tol)
        worst = max(worst, excess)
        if excess > 0.0 and first_t is None:
            first_t = t
    return PrincipleReport(passed=first_t is None, sup_initial=sup0,
                           worst_excess=worst, first_violation_t=first_t)


def maximum_principle_F(record: DiagnosticsRecord) -> PrincipleReport:
    """sup|F(t)| must never exceed sup|F(0)| beyond the discretization slack.

    The slack is 1e-4 relative plus 1e-8 absolute; the first violating tick
    is reported when the check fails.
    """
    if not record.t:
        raise ValueError("empty diagnostics record")
    return _transported_sup_check(record.t, record.f_sup)


def transport_Q(record: DiagnosticsRecord) -> PrincipleReport:
    """Same transported-sup check for Q = (dF/dx)/rho."""
    if not record.t:
        raise ValueError("empty diagnostics record")
    return _transported_sup_check(record.t, record.q_sup)


def holder_report(state, kernel: KernelSpec, beta_grid=DEFAULT_BETAS,
                  r_window: tuple[float, float] | None = None) -> dict[float, float]:
    """Measured modulus constants K0(beta) = t^beta sup |drho| M(|x-y|)^beta.

    The pair scan runs over periodic grid distances inside `r_window`,
    default [2 dx, min(r0, pi/2)]; the window must contain at least one
    admissible grid distance.
    """
    if state.t <= 0.0:
        raise ValueError("modulus constants are defined for t > 0")
    n = state.rho.n
    dx = 2.0 * np.pi / n
    r_hi_cap = min(kernel.r0, np.pi / 2.0)
    if r_window is None:
        r_window = (2.0 * dx, r_hi_cap)
    r_lo, r_hi = r_window
    if r_hi > r_hi_cap * (1.0 + 1e-12):
        raise ValueError(f"r_window upper edge {r_hi} exceeds min(r0, pi/2) = {r_hi_cap}")
    m_lo = max(2, int(np.ceil(r_lo / dx - 1e-12)))
    m_hi = int(np.floor(r_hi / dx + 1e-12))
    if m_hi < m_lo:
        raise ValueError("r_window lies below the grid resolution")
    offsets = np.arange(m_lo, m_hi + 1)
    M = eval_M(kernel, offsets * dx)
    rho = state.rho.values
    diffs = np.empty(offsets.size)
    for i, m in enumerate(offsets):
        diffs[i] = np.max(np.abs(rho - np.roll(rho, -int(m))))
    return {beta: float(state.t**beta * np.max(diffs * M**beta)) for beta in beta_grid}


def m_lipschitz_velocity(state, kernel: KernelSpec) -> float:
    """max over pairs with |x-y| <= 1 of |u(x)-u(y)| / (|x-y| M(|x-y|))."""
    n = state.u.n
    dx = 2.0 * np.pi / n
    offsets = np.arange(1, int(np.floor(1.0 / dx)) + 1)
    if offsets.size == 0:
        return 0.0
    d = offsets * dx
    M = eval_M(kernel, d)
    u = state.u.values
    best = 0.0
    for m, dd, mm in zip(offsets, d, M):
        best = max(best, float(np.max(np.abs(u - np.roll(u, -int(m)))) / (dd * mm)))
    return best


def _integrable_mass(spec: KernelSpec) -> float:
    """Total mass int_R psi = 2 M(0+) for an integrable kernel; rejects singular ones."""
    if spec.family in SINGULAR_FAMILIES:
        raise ValueError("critical threshold is stated for integrable kernels only")
    if spec.family == "zero":
        return 0.0
    if spec.family == "tabulated":
        m_a, m_b = eval_M(spec, 1e-10), eval_M(spec, 1e-8)
        if (m_a - m_b) >= 1e-3 * m_b:
            raise ValueError("tabulated kernel looks non-integrable near r=0")
    return 2.0 * float(eval_M(spec, 1e-12))


def critical_threshold(ic, kernel: KernelSpec, n: int = 1024,
                       symbol_tol: float = 1e-10) -> tuple[float, bool]:
    """Initial-data sign test sigma0 = du0/dx + psi * rho0 for integrable kernels.

    Returns (min over x of sigma0, predicted-global flag); the prediction is
    "global" exactly when the minimum is nonnegative.  The convolution uses
    the kernel's line Fourier coefficients psi_hat(k) = 2 M(0+) - lambda_k.
    """
    mass = _integrable_mass(kernel)
    rho0, u0 = ic.sample(n)
    symbol = compute_symbol(kernel, n, symbol_tol)
    psi_hat = mass - symbol.lam
    conv = np.fft.irfft(np.fft.rfft(rho0) * psi_hat, n)
    sigma0 = spectral_derivative(u0) + conv
    min_sigma = float(np.min(sigma0))
    return min_sigma, min_sigma >= 0.0


def critical_steepness(kernel: KernelSpec, n: int = 1024, iters: int = 60) -> float:
    """Bisection for the steepness s* where supercritical(s) loses min sigma0 >= 0."""
    from alignlab.dynamics import ICSpec

    def min_sigma(s: float) -> float:
        return critical_threshold(ICSpec.supercritical(s), kernel, n)[0]

    lo, hi = 0.0, 1.0
    for _ in range(60):
        if min_sigma(hi) < 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise RuntimeError("no supercritical steepness found below the search cap")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if min_sigma(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class BlowupIndication:
    max_abs_rhox: float
    tail_fraction: float
    fired: bool
    reason: str | None


def blowup_indicator(state, initial_max_rhox: float = 0.0, dt: float = math.inf,
                     dealias: float = 2.0 / 3.0) -> BlowupIndication:
    """Three-tripwire blow-up detector.

    Fires when the spectral tail share of the density exceeds 0.1, when the
    adaptive step underflows below 1e-12, or when max|drho/dx| exceeds
    10^3 (initial max|drho/dx| + 1) with the spectrum already under stress
    (tail share above 0.02 -- a resolved smooth profile can carry huge
    gradients without any of this indicating breakdown).
    """
    rho = state.rho.values
    n = rho.shape[0]
    rhox_max = float(np.max(np.abs(spectral_derivative(rho))))
    tail = tail_fraction(rho, dealias_cutoff(n, dealias))
    reason = None
    if tail > TAIL_THRESHOLD:
        reason = "tail_fraction"
    elif dt < DT_FLOOR:
        reason = "dt_underflow"
    elif rhox_max > GRADIENT_FACTOR * (initial_max_rhox + 1.0) and tail > TAIL_CONFIRM:
        reason = "gradient"
    return BlowupIndication(max_abs_rhox=rhox_max, tail_fraction=tail,
                            fired=reason is not None, reason=reason)


def density_equation_residual(snapshots, symbol: SpectralSymbol) -> float:
    """Sup-norm residual of d rho/dt + u d rho/dx + rho L rho + G rho.

    The solver never integrates this equation directly (it is absorbed into
    the conservative form plus velocity recovery), so its residual across
    stored snapshots is an independent consistency probe.  The time
    derivative uses the third-order four-point stencil at the second node
    of each window; snapshots must be equally spaced.
    """
    if len(snapshots) < 4:
        raise ValueError("residual needs at least four equally spaced snapshots")
    ts = np.array([s.t for s in snapshots])
    gaps = np.diff(ts)
    if np.max(np.abs(gaps - gaps[0])) > 1e-9 * gaps[0]:
        raise ValueError("snapshots must be equally spaced in time")
    dt = float(gaps[0])
    n = snapshots[0].rho.n
    worst = 0.0
    for i in range(len(snapshots) - 3):
        window = snapshots[i : i + 4]
        s = window[1]
        rho = [w.rho.values for w in window]
        drho_dt = (-2.0 * rho[0] - 3.0 * rho[1] + 6.0 * rho[2] - rho[3]) / (6.0 * dt)
        lrho = np.fft.irfft(np.fft.rfft(s.rho.values) * symbol.lam, n)
        transport = s.u.values * spectral_derivative(s.rho.values)
        resid = drho_dt + transport + s.rho.values * lrho + s.g.values * s.rho.values
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


def summarize(result, config) -> dict:
    """Per-run summary: exit status, envelopes, modulus constants, verdicts."""
    rec: DiagnosticsRecord = result.record
    summary = {
        "exit_status": result.status,
        "t_final": result.state.t,
        "steps": result.state.steps,
        "detection_time": result.detection_time,
        "detection_reason": result.detection_reason,
        "kappa": result.state.kappa,
        "nu": result.state.nu,
        "p0": result.state.p0,
        "envelopes": {
            "min_rho": min(rec.min_rho),
            "max_rho": max(rec.max_rho),
            "max_abs_rhox": max(rec.max_abs_rhox),
            "f_sup": max(rec.f_sup),
            "q_sup": max(rec.q_sup),
            "tail_fraction": max(rec.tail_fraction),
            "g_residual": max(rec.g_residual),
            "m_lipschitz": max(rec.m_lipschitz),
        },
        "k0_envelopes": {f"beta{int(100 * b):02d}": max(vals)
                         for b, vals in rec.k0.items()},
        "momentum_drift": max(abs(m - rec.momentum[0]) for m in rec.momentum),
    }
    try:
        min_sigma, predicted = critical_threshold(config.ic, config.kernel, config.n,
                                                  config.symbol_tol)
        summary["threshold"] = {"min_sigma0": min_sigma,
                                "predicted": "global" if predicted else "blowup"}
    except ValueError:
        summary["threshold"] = None
    return summary
