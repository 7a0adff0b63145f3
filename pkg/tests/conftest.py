import numpy as np
import pytest

from alignlab.dynamics import ICSpec, RunConfig, run
from alignlab.kernels import KernelSpec
from alignlab.nonlocal_operator import compute_symbol


@pytest.fixture(scope="session")
def il_spec():
    return KernelSpec("inverse_linear")


@pytest.fixture(scope="session")
def gaussian_spec():
    return KernelSpec("lipschitz_gaussian")


@pytest.fixture(scope="session")
def symbol_il_256(il_spec):
    return compute_symbol(il_spec, 256, 1e-10)


@pytest.fixture(scope="session")
def bump_run_256(il_spec):
    """Bump preset, inverse_linear, n=256 to t=2; reused by several suites."""
    cfg = RunConfig(kernel=il_spec, ic=ICSpec.bump(), n=256, t_end=2.0,
                    snapshot_every=0.5, diag_every=0.05)
    return cfg, run(cfg)


@pytest.fixture(scope="session")
def shear_run_256(il_spec):
    """Shear preset, inverse_linear, n=256 to t=2."""
    cfg = RunConfig(kernel=il_spec, ic=ICSpec.shear(), n=256, t_end=2.0,
                    snapshot_every=0.5, diag_every=0.05)
    return cfg, run(cfg)


def random_band_limited(n: int, kmax: int, seed: int, amp: float = 1.0) -> np.ndarray:
    """Random real field with modes up to kmax; deterministic in the seed."""
    rng = np.random.default_rng(seed)
    x = -np.pi + 2.0 * np.pi * np.arange(n) / n
    out = np.zeros(n)
    for k in range(1, kmax + 1):
        a, b = rng.normal(size=2) / (1 + k * k)
        out += a * np.cos(k * x) + b * np.sin(k * x)
    return amp * out
