"""Real fields sampled on the uniform periodic grid, plus shared spectral helpers.

The grid on the 2pi-torus is x_j = -pi + 2*pi*j/n with n a power of two.
All solver fields (density, velocity, G, primitives) live on this grid; the
helpers below implement the spectral derivative, the mean-zero primitive,
low-pass truncation for dealiasing and the tail-energy diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_GRID = 32


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def grid(n: int) -> np.ndarray:
    """Grid points x_j = -pi + 2*pi*j/n for j = 0..n-1."""
    return -np.pi + 2.0 * np.pi * np.arange(n) / n


@dataclass(frozen=True)
class TorusField:
    """Real samples of a 2pi-periodic function on the uniform n-point grid."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 1:
            raise ValueError("field values must be a 1-d array")
        n = vals.shape[0]
        if n < MIN_GRID or not _is_pow2(n):
            raise ValueError(f"grid size must be a power of two >= {MIN_GRID}, got {n}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def x(self) -> np.ndarray:
        return grid(self.n)

    def mean(self) -> float:
        return float(np.mean(self.values))

    @classmethod
    def from_function(cls, fn, n: int) -> "TorusField":
        return cls(np.asarray(fn(grid(n)), dtype=np.float64))

    def __len__(self) -> int:
        return self.n


def wavenumbers(n: int) -> np.ndarray:
    """Nonnegative wavenumbers 0..n/2 matching numpy.fft.rfft layout."""
    return np.arange(n // 2 + 1, dtype=np.float64)


def spectral_derivative(values: np.ndarray) -> np.ndarray:
    """d/dx by the ik multiplier; the Nyquist mode is zeroed (odd operator)."""
    n = values.shape[0]
    coeff = np.fft.rfft(values)
    coeff *= 1j * wavenumbers(n)
    coeff[-1] = 0.0
    return np.fft.irfft(coeff, n)


def mean_zero_primitive(values: np.ndarray) -> np.ndarray:
    """Periodic antiderivative with zero mean; the input's mean is discarded."""
    n = values.shape[0]
    coeff = np.fft.rfft(values)
    k = wavenumbers(n)
    k[0] = 1.0  # avoid 0/0; mode 0 is overwritten below
    coeff /= 1j * k
    coeff[0] = 0.0
    coeff[-1] = 0.0
    return np.fft.irfft(coeff, n)


def dealias_cutoff(n: int, frac: float) -> int:
    """Highest retained wavenumber when keeping `frac` of the spectrum."""
    return int(np.floor(frac * (n // 2)))


def lowpass(values: np.ndarray, kmax: int) -> np.ndarray:
    """Zero all modes with wavenumber above kmax."""
    n = values.shape[0]
    coeff = np.fft.rfft(values)
    coeff[kmax + 1 :] = 0.0
    return np.fft.irfft(coeff, n)


def mode_energy(values: np.ndarray) -> np.ndarray:
    """Parseval weights per nonnegative mode: |c_k|^2 doubled except k=0, n/2."""
    n = values.shape[0]
    coeff = np.fft.rfft(values) / n
    e = np.abs(coeff) ** 2
    e[1:-1] *= 2.0
    return e


def tail_fraction(values: np.ndarray, kmax_active: int | None = None) -> float:
    """Share of nonzero-mode energy sitting in the top third of the active band.

    `kmax_active` is the highest dynamically meaningful mode (the dealias
    cutoff for evolved fields); defaults to n/2 for standalone fields.
    """
    n = values.shape[0]
    if kmax_active is None:
        kmax_active = n // 2
    e = mode_energy(values)
    k_lo = int(np.floor(kmax_active * 2.0 / 3.0))
    total = float(np.sum(e[1 : kmax_active + 1]))
    if total <= 0.0:
        return 0.0
    top = float(np.sum(e[k_lo + 1 : kmax_active + 1]))
    return top / total


def reflect(values: np.ndarray) -> np.ndarray:
    """Samples of x -> f(-x); exact on the symmetric grid."""
    n = values.shape[0]
    idx = (-np.arange(n)) % n
    return values[idx]


def shifted_samples(coeff: np.ndarray, n: int, z: float) -> tuple[np.ndarray, np.ndarray]:
    """Trigonometric interpolation of f(x-z) and f(x+z) on the grid.

    `coeff` is the rfft of the grid samples; the shift is a spectral phase,
    so the interpolation is exact for band-limited fields.
    """
    k = wavenumbers(n)
    phase = np.exp(-1j * k * z)
    minus = np.fft.irfft(coeff * phase, n)
    plus = np.fft.irfft(coeff * np.conj(phase), n)
    return minus, plus
