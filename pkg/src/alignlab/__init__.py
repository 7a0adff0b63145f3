"""Numerical laboratory for 1D periodic Euler alignment dynamics.

The solver evolves the conservative density/G reformulation of the alignment
system with a nonlocal velocity recovery, while the diagnostics measure the
invariants that the underlying theory predicts: density bounds, transported
maximum principles, modulus-of-continuity constants, the critical-threshold
dichotomy for integrable kernels, and blow-up indicators.
"""

from alignlab.fields import TorusField, grid
from alignlab.kernels import KernelSpec, KernelAssessment
from alignlab.nonlocal_operator import (
    SpectralSymbol,
    apply_direct,
    apply_spectral,
    compute_symbol,
)
from alignlab.dynamics import ICSpec, RunConfig, SimState, init_state, run

__version__ = "0.1.0"

__all__ = [
    "TorusField",
    "grid",
    "KernelSpec",
    "KernelAssessment",
    "SpectralSymbol",
    "compute_symbol",
    "apply_spectral",
    "apply_direct",
    "ICSpec",
    "RunConfig",
    "SimState",
    "init_state",
    "run",
    "__version__",
]
