import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from dtnfem.kernels import (
    KernelDomainError,
    KernelTable,
    WaveContext,
    Zn,
    bessel_j,
    bessel_y,
    hankel1,
    spherical_hankel1_array,
    verify_kernels,
    wronskian_residual,
    zn,
)


def test_hankel1_reference_value():
    assert hankel1(0, 1.0) == pytest.approx(0.7651976865579666 + 0.08825696421567697j, rel=1e-13)


@pytest.mark.parametrize("x", [0.1, 0.7, 3.0, 17.5, 60.0, 100.0])
@pytest.mark.parametrize("n", [0, 1, 2, 5, 20, 50, 100])
def test_hankel1_against_library(n, x):
    ref = special.hankel1(n, x)
    if not np.isfinite(ref):
        pytest.skip("reference overflows")
    assert abs(hankel1(n, x) - ref) <= 1e-12 * abs(ref)


@pytest.mark.parametrize("n", [1, 3, 8])
def test_hankel1_negative_order_sign(n):
    x = 2.3
    assert hankel1(-n, x) == (-1) ** n * hankel1(n, x)


@pytest.mark.parametrize("x", [0.0, -1.0, math.nan])
def test_hankel1_domain(x):
    with pytest.raises(KernelDomainError):
        hankel1(5, x)


def test_hankel1_overflow():
    with pytest.raises(OverflowError):
        hankel1(400, 0.1)


def test_bessel_tables_match_library():
    x = 7.3
    n = np.arange(61)
    np.testing.assert_allclose(bessel_j(60, x), special.jv(n, x), rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(bessel_y(60, x), special.yv(n, x), rtol=1e-12)


def test_zn_symmetry_bitwise():
    assert Zn(-7, 3.0) == Zn(7, 3.0)


def test_zn_reference():
    z = Zn(0, 1.0)
    assert z == pytest.approx(-special.hankel1(1, 1.0) / special.hankel1(0, 1.0), rel=1e-13)
    assert z == pytest.approx(-0.4513241865340087 + 1.0729845872563197j, rel=1e-12)


@pytest.mark.parametrize("xi", [0.5, 2.0, 10.0])
def test_zn_against_library(xi):
    n = np.arange(0, 60)
    h = special.hankel1(n, xi)
    ref = xi * special.h1vp(n, xi) / h
    got = np.array([Zn(k, xi) for k in n])
    np.testing.assert_allclose(got, ref, rtol=1e-11)


@pytest.mark.parametrize("xi", [0.5, 2.0, 10.0])
def test_cylindrical_bound(xi):
    t = KernelTable.build(2, xi, 200)
    assert np.all(t.bound_ratio() <= 1.0)


@pytest.mark.parametrize("xi", [0.5, 1.0, 5.0])
def test_spherical_z0_closed_form(xi):
    assert abs(zn(0, xi) - (1j * xi - 1)) <= 1e-13


def test_spherical_bound_and_library():
    t = KernelTable.build(3, 4.0, 200)
    assert np.all(t.bound_ratio() <= 1.0)
    n = np.arange(30)
    h = special.spherical_jn(n, 4.0) + 1j * special.spherical_yn(n, 4.0)
    dh = special.spherical_jn(n, 4.0, True) + 1j * special.spherical_yn(n, 4.0, True)
    np.testing.assert_allclose(t.values[:30], 4.0 * dh / h, rtol=1e-11)
    np.testing.assert_allclose(spherical_hankel1_array(10, 4.0), h[:11], rtol=1e-12)


def test_spherical_domain():
    with pytest.raises(KernelDomainError):
        zn(3, -2.0)
    with pytest.raises(KernelDomainError):
        zn(-1, 2.0)


def test_table_mirrored_and_indexed():
    t = WaveContext(2.0, 1.0, 12).kernel_table()
    assert len(t.values) == 25
    assert all(t[n] == t[-n] for n in range(13))
    assert t[3] == Zn(3, 2.0)
    with pytest.raises(IndexError):
        t[13]


@given(st.integers(0, 50), st.floats(0.1, 50.0))
@settings(max_examples=60, deadline=None)
def test_wronskian(n, x):
    assert wronskian_residual(n, x) <= 1e-11


@pytest.mark.parametrize("xi", [0.5, 2.0, 4.0, 10.0])
def test_outgoing_sign(xi):
    t = KernelTable.build(2, xi, 200)
    # Im Z_n = 2 / (pi |H_n|^2) is positive but underflows once |H_n| exceeds ~1e154
    h = np.abs(special.hankel1(np.arange(201), xi))
    representable = h < 1e150
    assert np.all(t.values[200:][representable].imag > 0)
    assert np.all(t.values.imag >= 0)


def test_wave_context_validation():
    with pytest.raises(ValueError):
        WaveContext(0.5, 1.0, 4)
    WaveContext(0.5, 1.0, 4, dimension=3)
    with pytest.raises(ValueError):
        WaveContext(2.0, 1.0, -1)


def test_verify_suite_passes():
    checks = verify_kernels()
    assert len(checks) == 6
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]
