"""The nonlocal mean-difference operator on the torus.

Two independent realizations of L f(x) = int psi(x-y) (f(x) - f(y)) dy:

  * a Fourier multiplier lambda_k = 2 int_0^inf psi(z)(1 - cos kz) dz applied
    by FFT (exact on trigonometric polynomials, O(n log n)), and
  * a real-space quadrature of the periodized kernel, kept deliberately
    separate so it can serve as the cross-validation oracle.

Symbols are deterministic for a given (kernel, n, tolerance), persistable in
a small binary record, and cached on disk.
"""

from __future__ import annotations

import functools
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

from alignlab.fields import (
    TorusField,
    shifted_samples,
    tail_fraction,
    wavenumbers,
)
from alignlab.kernels import (
    KernelSpec,
    QuadratureError,
    eval_M,
    eval_psi,
    psi_prime,
)

SYMBOL_MAGIC = b"EASYM1"

#: Fields whose top-third spectral energy share reaches this level are too
#: rough for the direct quadrature's error estimate to hold.
SMOOTHNESS_TAIL_LIMIT = 0.1


class FieldSmoothnessError(ValueError):
    """Direct operator application rejected: field spectrum too rough."""


@dataclass(frozen=True)
class SpectralSymbol:
    """Multiplier lambda_k of the nonlocal operator on an n-point torus grid."""

    n: int
    lam: np.ndarray
    kernel_key: str
    tol: float

    def __post_init__(self):
        lam = np.ascontiguousarray(np.asarray(self.lam, dtype=np.float64))
        if lam.shape != (self.n // 2 + 1,):
            raise ValueError("symbol must hold n/2 + 1 values")
        if lam[0] != 0.0:
            raise ValueError("lambda_0 must be exactly zero")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0.0):
            raise ValueError("symbol values must be finite and nonnegative")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _panel_integral(fn, edges: np.ndarray) -> float:
    """Composite 16-point Gauss-Legendre over the panels defined by `edges`."""
    a, b = edges[:-1], edges[1:]
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    z = mid + half * _GL_NODES[None, :]
    v = fn(z.ravel()).reshape(z.shape)
    return float(((v * _GL_WEIGHTS[None, :]).sum(axis=1) * (b - a) * 0.5).sum())


def _lambda_single(spec: KernelSpec, k: int, tol: float) -> float:
    """lambda_k by oscillation-split panels with an integration-by-parts tail.

    Strategy: the cell [0, delta] uses the bound (1 - cos kz) <= k^2 z^2 / 2
    (relative error (k delta)^2/12 <= tol/4); panels between delta and the
    cutoff Z sit between consecutive zeros z = m pi/k of the oscillation,
    with the gap below the first zero refined dyadically to tame the kernel
    singularity; beyond an even-multiple cutoff Z = 2 pi m / k the remainder
    equals M(Z) plus the cosine tail, which integration by parts reduces to
    psi'(Z)/k^2 with error below 2|psi'(Z)|/k^2.
    """
    delta = math.sqrt(3.0 * tol) / k

    def near_integrand(z):
        return z * z * eval_psi(spec, z)

    j2, _ = integrate.quad(near_integrand, 0.0, delta,
                           epsabs=1e-300, epsrel=min(1e-12, tol), limit=200)
    near = 0.5 * k * k * j2

    def integrand(z):
        return eval_psi(spec, z) * (1.0 - np.cos(k * z))

    m0 = max(1, int(np.ceil(delta * k / np.pi)))
    m_end = 2 * max(1, int(np.ceil(k / 2)))
    # dyadic refinement across the singular gap below the first zero
    gap: list[float] = [delta]
    z = delta
    while 2.0 * z < m0 * np.pi / k:
        z *= 2.0
        gap.append(z)
    edges = np.concatenate([gap, np.arange(m0, m_end + 1) * np.pi / k])
    acc = near + _panel_integral(integrand, edges)
    Z = m_end * np.pi / k
    for _ in range(48):
        tail_err = 2.0 * abs(psi_prime(spec, Z)) / k**2
        if tail_err <= 0.25 * tol * (acc + eval_M(spec, Z)):
            break
        m_next = 2 * m_end
        edges = np.arange(m_end, m_next + 1) * np.pi / k
        acc += _panel_integral(integrand, edges)
        m_end, Z = m_next, m_next * np.pi / k
    else:
        raise QuadratureError(
            f"symbol tail did not converge for k={k}",
            achieved=2.0 * abs(psi_prime(spec, Z)) / (k**2 * max(acc, 1e-300)))
    lam = 2.0 * (acc + eval_M(spec, Z) + psi_prime(spec, Z) / k**2)
    return max(lam, 0.0)


@functools.lru_cache(maxsize=64)
def _compute_symbol_cached(spec: KernelSpec, n: int, tol: float) -> SpectralSymbol:
    lam = np.zeros(n // 2 + 1)
    if spec.family != "zero":
        for k in range(1, n // 2 + 1):
            lam[k] = _lambda_single(spec, k, tol)
    return SpectralSymbol(n=n, lam=lam, kernel_key=spec.key(), tol=tol)


def compute_symbol(spec: KernelSpec, n: int, tol: float = 1e-10) -> SpectralSymbol:
    """Fourier multiplier of the operator for every mode k = 0..n/2."""
    if n < 32 or (n & (n - 1)) != 0:
        raise ValueError("grid size must be a power of two >= 32")
    if not (1e-14 <= tol <= 1e-6):
        raise ValueError("symbol tolerance must lie in [1e-14, 1e-6]")
    return _compute_symbol_cached(spec, n, float(tol))


def write_symbol(symbol: SpectralSymbol, path) -> None:
    """Binary record: magic 'EASYM1', n as u32 LE, then n/2+1 f64 LE values."""
    payload = SYMBOL_MAGIC + struct.pack("<I", symbol.n)
    payload += symbol.lam.astype("<f8").tobytes()
    Path(path).write_bytes(payload)


def read_symbol(path, kernel_key: str = "", tol: float = float("nan")) -> SpectralSymbol:
    raw = Path(path).read_bytes()
    if raw[: len(SYMBOL_MAGIC)] != SYMBOL_MAGIC:
        raise ValueError(f"{path}: not a symbol record (bad magic)")
    (n,) = struct.unpack_from("<I", raw, len(SYMBOL_MAGIC))
    lam = np.frombuffer(raw, dtype="<f8", offset=len(SYMBOL_MAGIC) + 4).copy()
    return SpectralSymbol(n=int(n), lam=lam, kernel_key=kernel_key, tol=tol)


def load_or_compute_symbol(spec: KernelSpec, n: int, tol: float = 1e-10,
                           cache_dir=None) -> SpectralSymbol:
    """Disk-cached symbol, keyed by (kernel hash, n, tol)."""
    if cache_dir is None:
        return compute_symbol(spec, n, tol)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"symbol-{spec.key()}-n{n}-tol{tol:.3e}.bin"
    if path.exists():
        return read_symbol(path, kernel_key=spec.key(), tol=tol)
    symbol = compute_symbol(spec, n, tol)
    # per-process temporary name: concurrent sweep workers may race here
    tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
    write_symbol(symbol, tmp)
    tmp.replace(path)
    return symbol


def apply_spectral(symbol: SpectralSymbol, f: TorusField) -> TorusField:
    """Multiply Fourier modes by lambda_|k|; output is real by symmetry."""
    if symbol.n != f.n:
        raise ValueError(f"symbol grid {symbol.n} does not match field grid {f.n}")
    coeff = np.fft.rfft(f.values)
    coeff *= symbol.lam
    return TorusField(np.fft.irfft(coeff, f.n))


def _periodized_psi(spec: KernelSpec, z: np.ndarray, n_images: int) -> np.ndarray:
    """psi_per(z) = sum_{|j| <= J} psi(z + 2 pi j) for z in (0, pi]."""
    out = eval_psi(spec, z)
    # pair the +/- j images and sum in slabs to bound memory
    step = max(1, int(2e6 // max(z.size, 1)))
    for start in range(1, n_images + 1, step):
        js = 2.0 * np.pi * np.arange(start, min(start + step, n_images + 1))
        out = out + eval_psi(spec, z[:, None] + js[None, :]).sum(axis=1)
        out = out + eval_psi(spec, z[:, None] - js[None, :]).sum(axis=1)
    return out


def _truncation_images(spec: KernelSpec, tol: float) -> int:
    """Power-of-two image count whose neglected tail mass sits below tol/4."""
    J = 1
    for _ in range(64):
        if eval_M(spec, 2.0 * np.pi * J - np.pi) <= 0.25 * tol:
            return J
        J *= 2
        if J > 300_000:
            raise QuadratureError(
                "periodization truncation exceeds budget for this kernel tail",
                achieved=4.0 * eval_M(spec, 2.0 * np.pi * J - np.pi))
    return J


def _core_edges(n: int, h: float, k_active: int, refinement: int) -> np.ndarray:
    """Panel edges on [h, pi]: dyadic off the singular end, then uniform
    panels narrow enough to resolve the field's highest active mode."""
    width = min(np.pi / 4.0, 12.0 / max(k_active, 1))
    edges = [h]
    z = h
    while 2.0 * z < width:
        z *= 2.0
        edges.append(z)
    m = int(np.ceil((np.pi - edges[-1]) / width))
    edges = np.concatenate([edges, edges[-1] + (np.pi - edges[-1]) * np.arange(1, m + 1) / m])
    splits = max(1, refinement // 4)
    if splits > 1:
        a, b = edges[:-1], edges[1:]
        sub = a[:, None] + (b - a)[:, None] * np.arange(splits)[None, :] / splits
        edges = np.append(sub.ravel(), edges[-1])
    return edges


def apply_direct(spec: KernelSpec, f: TorusField, refinement: int = 4,
                 truncation_tol: float = 1e-11) -> TorusField:
    """Real-space oracle for the operator via the periodized kernel.

    For each grid point computes int_0^pi psi_per(z) (2 f(x) - f(x-z) - f(x+z)) dz
    with psi_per the image sum truncated once the neglected tail mass drops
    below `truncation_tol`; the innermost cell [0, h), h = pi/(refinement*n),
    uses the local expansion 2 f(x) - f(x-z) - f(x+z) ~ -f''(x) z^2 with the
    second derivative taken spectrally; off-grid samples of f come from exact
    trigonometric interpolation (spectral phase shifts).

    Rough fields are rejected: the quadrature error estimate assumes the
    spectral tail carries less than 10% of the energy.
    """
    if refinement < 4:
        raise ValueError("refinement must be an integer >= 4")
    n = f.n
    frac = tail_fraction(f.values)
    if frac >= SMOOTHNESS_TAIL_LIMIT:
        raise FieldSmoothnessError(
            f"field too rough for the direct quadrature: tail fraction {frac:.3f} >= "
            f"{SMOOTHNESS_TAIL_LIMIT}")
    coeff = np.fft.rfft(f.values)
    k = wavenumbers(n)
    fpp = np.fft.irfft(coeff * -(k * k), n)

    scale = float(np.max(np.abs(f.values))) or 1.0
    n_images = _truncation_images(spec, truncation_tol)

    h = np.pi / (refinement * n)
    # inner cell: -f''(x) * int_0^h z^2 psi_per(z) dz
    w_sing, _ = integrate.quad(lambda z: z * z * eval_psi(spec, z), 0.0, h,
                               epsabs=1e-300, epsrel=1e-12, limit=200)
    inner_nodes = 0.5 * h + 0.5 * h * _GL_NODES
    images = _periodized_psi(spec, inner_nodes, n_images) - eval_psi(spec, inner_nodes)
    w_images = float(np.sum(inner_nodes**2 * images * _GL_WEIGHTS) * 0.5 * h)
    out = -fpp * (w_sing + w_images)

    amps = np.abs(coeff)
    sig = np.nonzero(amps > 1e-13 * amps.max())[0]
    k_active = int(sig.max()) if sig.size else 1
    edges = _core_edges(n, h, k_active, refinement)
    a, b = edges[:-1], edges[1:]
    nodes = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_NODES[None, :]).ravel()
    wts = (0.5 * (b - a)[:, None] * _GL_WEIGHTS[None, :]).ravel()
    psi_w = _periodized_psi(spec, nodes, n_images) * wts
    for z, w in zip(nodes, psi_w):
        minus, plus = shifted_samples(coeff, n, z)
        out += w * (2.0 * f.values - minus - plus)
    return TorusField(out)
