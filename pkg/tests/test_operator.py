import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alignlab.fields import TorusField, grid, reflect
from alignlab.kernels import KernelSpec, eval_M, eval_psi
from alignlab.nonlocal_operator import (
    FieldSmoothnessError,
    SpectralSymbol,
    apply_direct,
    apply_spectral,
    compute_symbol,
    load_or_compute_symbol,
    read_symbol,
    write_symbol,
)
from conftest import random_band_limited

FAMILIES_WITH_FAST_TAILS = ("inverse_linear", "log_boosted", "log_damped",
                            "lipschitz_gaussian")


def test_symbol_lambda0_zero_everywhere():
    for family in ("power", "inverse_linear", "log_damped", "lipschitz_gaussian", "zero"):
        sym = compute_symbol(KernelSpec(family, alpha=0.5), 32, 1e-8)
        assert sym.lam[0] == 0.0
        assert np.all(sym.lam >= 0.0)


def test_symbol_power_scaling_constant():
    # lambda_k for r^(-3/2) scales exactly as sqrt(k); the constant is
    # 2 int s^(-3/2)(1 - cos s) ds = 2 sqrt(2 pi)
    sym = compute_symbol(KernelSpec("power", alpha=0.5), 32, 1e-10)
    ratios = sym.lam[1:] / np.sqrt(np.arange(1, 17))
    assert np.max(np.abs(ratios - ratios[0])) <= 1e-9 * ratios[0]
    assert ratios[0] == pytest.approx(2.0 * math.sqrt(2.0 * math.pi), rel=1e-9)


def test_symbol_growth_singular_vs_integrable():
    n = 128
    for family in ("power", "inverse_linear", "log_boosted", "log_damped"):
        sym = compute_symbol(KernelSpec(family, alpha=0.5), n, 1e-8)
        assert sym.lam[n // 2] > sym.lam[n // 8]
    spec = KernelSpec("lipschitz_gaussian")
    sym = compute_symbol(spec, n, 1e-8)
    mass = 2.0 * eval_M(spec, 1e-13)
    assert np.all(sym.lam <= 2.0 * mass)
    assert sym.lam[n // 2] == pytest.approx(mass, rel=1e-6)


def test_symbol_linearity_against_tabulated_sum():
    # symbol of (psi_a + psi_b) equals the elementwise sum of symbols
    n = 128
    a = KernelSpec("inverse_linear")
    b = KernelSpec("lipschitz_gaussian")
    rs = np.logspace(-8, np.log10(50.0), 4000)
    summed = KernelSpec("tabulated",
                        table_r=tuple(rs),
                        table_psi=tuple(eval_psi(a, rs) + eval_psi(b, rs)),
                        quad_tol=1e-9)
    sym_sum = compute_symbol(summed, n, 1e-8)
    sym_a = compute_symbol(a, n, 1e-8)
    sym_b = compute_symbol(b, n, 1e-8)
    expected = sym_a.lam + sym_b.lam
    err = np.abs(sym_sum.lam[1:] - expected[1:]) / expected[1:]
    assert np.max(err) < 2e-5  # limited by log-log interpolation of the table


def test_symbol_determinism_and_validation():
    spec = KernelSpec("inverse_linear")
    s1 = compute_symbol(spec, 64, 1e-9)
    s2 = compute_symbol(spec, 64, 1e-9)
    assert np.array_equal(s1.lam, s2.lam)
    with pytest.raises(ValueError):
        compute_symbol(spec, 48, 1e-9)  # not a power of two
    with pytest.raises(ValueError):
        compute_symbol(spec, 64, 1e-3)  # tolerance out of range
    with pytest.raises(ValueError):
        SpectralSymbol(n=64, lam=np.ones(33), kernel_key="x", tol=1e-9)  # lam[0] != 0


def test_symbol_file_round_trip(tmp_path):
    spec = KernelSpec("log_damped")
    sym = compute_symbol(spec, 64, 1e-8)
    path = tmp_path / "sym.bin"
    write_symbol(sym, path)
    back = read_symbol(path, kernel_key=sym.kernel_key, tol=sym.tol)
    assert back.n == 64
    assert np.array_equal(back.lam, sym.lam)
    raw = path.read_bytes()
    assert raw[:6] == b"EASYM1"
    assert len(raw) == 6 + 4 + 8 * 33


def test_symbol_disk_cache(tmp_path):
    spec = KernelSpec("inverse_linear")
    s1 = load_or_compute_symbol(spec, 64, 1e-9, cache_dir=tmp_path)
    files = list(tmp_path.glob("symbol-*.bin"))
    assert len(files) == 1
    stamp = files[0].stat().st_mtime_ns
    s2 = load_or_compute_symbol(spec, 64, 1e-9, cache_dir=tmp_path)
    assert files[0].stat().st_mtime_ns == stamp  # reused, not rewritten
    assert np.array_equal(s1.lam, s2.lam)


# ------------------------------------------------------------ apply_spectral

def test_apply_spectral_constant_is_zero(symbol_il_256):
    f = TorusField(np.full(256, 3.7))
    out = apply_spectral(symbol_il_256, f)
    assert np.max(np.abs(out.values)) < 1e-14


def test_apply_spectral_eigenfunction(symbol_il_256):
    x = grid(256)
    out = apply_spectral(symbol_il_256, TorusField(np.cos(3 * x)))
    expected = symbol_il_256.lam[3] * np.cos(3 * x)
    assert np.max(np.abs(out.values - expected)) < 1e-12


def test_apply_spectral_size_mismatch(symbol_il_256):
    with pytest.raises(ValueError):
        apply_spectral(symbol_il_256, TorusField(np.ones(128)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_apply_spectral_linear(symbol_il_256, seed, a, b):
    f = random_band_limited(256, 20, seed)
    g = random_band_limited(256, 20, seed + 1)
    lhs = apply_spectral(symbol_il_256, TorusField(a * f + b * g)).values
    rhs = (a * apply_spectral(symbol_il_256, TorusField(f)).values
           + b * apply_spectral(symbol_il_256, TorusField(g)).values)
    scale = np.max(np.abs(lhs)) + 1.0
    assert np.max(np.abs(lhs - rhs)) < 1e-11 * scale


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_apply_spectral_mean_annihilation_and_positivity(symbol_il_256, seed):
    f = random_band_limited(256, 40, seed)
    out = apply_spectral(symbol_il_256, TorusField(f))
    assert abs(np.mean(out.values)) < 1e-13
    assert float(np.sum(f * out.values)) >= -1e-12 * np.sum(f * f)


# -------------------------------------------------------------- apply_direct

def test_apply_direct_constant_is_zero():
    spec = KernelSpec("lipschitz_gaussian")
    out = apply_direct(spec, TorusField(np.full(64, 2.0)), refinement=4)
    assert np.max(np.abs(out.values)) < 1e-12


def test_apply_direct_matches_spectral_gaussian():
    spec = KernelSpec("lipschitz_gaussian")
    n = 64
    x = grid(n)
    f = TorusField(1.0 + 0.5 * np.cos(2 * x) + 0.25 * np.sin(3 * x))
    direct = apply_direct(spec, f, refinement=4)
    sym = compute_symbol(spec, n, 1e-12)
    spectral = apply_spectral(sym, f)
    assert np.max(np.abs(direct.values - spectral.values)) < 1e-8


def test_apply_direct_reflection_equivariance():
    spec = KernelSpec("inverse_linear")
    f = random_band_limited(64, 8, seed=7)
    out = apply_direct(spec, TorusField(f), refinement=4, truncation_tol=1e-9)
    out_ref = apply_direct(spec, TorusField(reflect(f)), refinement=4,
                           truncation_tol=1e-9)
    assert np.max(np.abs(out_ref.values - reflect(out.values))) < 1e-10


def test_apply_direct_pairing_positive():
    spec = KernelSpec("log_damped")
    f = random_band_limited(64, 10, seed=3)
    out = apply_direct(spec, TorusField(f), refinement=4, truncation_tol=1e-9)
    assert float(np.sum(f * out.values)) >= -1e-10 * np.sum(f * f)


def test_apply_direct_rejects_rough_fields():
    rng = np.random.default_rng(0)
    noisy = rng.normal(size=256)
    with pytest.raises(FieldSmoothnessError):
        apply_direct(KernelSpec("inverse_linear"), TorusField(noisy))


def test_apply_direct_refinement_validation():
    with pytest.raises(ValueError):
        apply_direct(KernelSpec("inverse_linear"), TorusField(np.ones(64)),
                     refinement=2)


def test_apply_direct_heavy_tail_exceeds_image_budget():
    # the power family's algebraic tail cannot meet a tight periodization
    # tolerance within the image budget; the error carries what was achieved
    from alignlab.kernels import QuadratureError

    f = TorusField(1.0 + 0.1 * np.cos(grid(64)))
    with pytest.raises(QuadratureError) as err:
        apply_direct(KernelSpec("power", alpha=0.5), f, truncation_tol=1e-11)
    assert err.value.achieved > 0.0
