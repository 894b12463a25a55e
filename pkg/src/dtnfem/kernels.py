"""Cylindrical and spherical Hankel functions and the DtN kernel ratios.

Bessel functions of the first kind come from Miller's downward recurrence
normalised with ``J_0 + 2 * sum_k J_2k = 1``; Y_0 and Y_1 follow from their
Neumann series in the same table of J values, and higher Y_n from upward
recurrence.  The kernel ratios are never formed as H'/H from independently
evaluated functions: the ratio ``H_{n-1}/H_n`` obeys a stable upward recurrence
of its own, which keeps Z_n finite long after Y_n has overflowed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

N_MAX = 512
EULER_GAMMA = 0.57721566490153286061

_RESCALE = 1e250


class KernelDomainError(ValueError):
    """Argument outside the domain of a kernel function."""


def _check_arg(x: float) -> float:
    x = float(x)
    if not (x > 0.0 and math.isfinite(x)):
        raise KernelDomainError(f"argument must be positive and finite, got {x!r}")
    return x


def _miller_start(nmax: int, x: float) -> int:
    m = max(nmax, int(math.ceil(x))) + 30 + int(6.0 * math.sqrt(max(nmax, x)))
    return m + (m % 2)


@lru_cache(maxsize=256)
def _bessel_j_table(nmax: int, x: float) -> np.ndarray:
    """J_0..J_nmax(x) by normalised downward recurrence."""
    m = _miller_start(nmax, x)
    out = np.zeros(m + 2)
    jp1, j = 0.0, 1e-300
    norm = 0.0
    for k in range(m, 0, -1):
        out[k] = j
        if k % 2 == 0:
            norm += 2.0 * j
        jm1 = (2.0 * k / x) * j - jp1
        jp1, j = j, jm1
        if abs(j) > _RESCALE:
            j /= _RESCALE
            jp1 /= _RESCALE
            norm /= _RESCALE
            out[k:] /= _RESCALE
    out[0] = j
    norm += j
    out /= norm
    out.setflags(write=False)
    return out


def bessel_j(nmax: int, x: float) -> np.ndarray:
    """Array of J_n(x) for n = 0..nmax."""
    x = _check_arg(x)
    return _bessel_j_table(int(nmax), x)[: nmax + 1].copy()


def _y01(x: float) -> tuple[float, float]:
    jt = _bessel_j_table(1, x)
    kmax = (len(jt) - 3) // 2
    k = np.arange(1, kmax + 1)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    log_term = math.log(x / 2.0) + EULER_GAMMA
    j_even = jt[2 * k]
    y0 = (2.0 / math.pi) * log_term * jt[0] - (4.0 / math.pi) * np.sum(sign * j_even / k)
    # Y_1 = -Y_0' applied termwise, with J_2k' = (J_{2k-1} - J_{2k+1}) / 2
    dj_even = jt[2 * k - 1] - jt[2 * k + 1]
    y1 = (
        -(2.0 / (math.pi * x)) * jt[0]
        + (2.0 / math.pi) * log_term * jt[1]
        + (2.0 / math.pi) * np.sum(sign * dj_even / k)
    )
    return float(y0), float(y1)


def bessel_y(nmax: int, x: float) -> np.ndarray:
    """Array of Y_n(x) for n = 0..nmax; raises OverflowError once Y_n leaves float range."""
    x = _check_arg(x)
    y = np.empty(nmax + 1)
    y0, y1 = _y01(x)
    y[0] = y0
    if nmax >= 1:
        y[1] = y1
    for n in range(1, nmax):
        with np.errstate(over="ignore"):
            y[n + 1] = (2.0 * n / x) * y[n] - y[n - 1]
        if not math.isfinite(y[n + 1]):
            raise OverflowError(f"Y_{n + 1}({x}) overflows double precision")
    return y


def hankel1(n: int, x: float) -> complex:
    """Cylindrical Hankel function of the first kind, H_n^(1)(x) = J_n(x) + i Y_n(x)."""
    x = _check_arg(x)
    n = int(n)
    m = abs(n)
    if m > N_MAX:
        raise ValueError(f"|n| = {m} exceeds n_max = {N_MAX}")
    h = complex(bessel_j(m, x)[m], bessel_y(m, x)[m])
    if n < 0 and m % 2 == 1:
        h = -h
    return h


def hankel1_array(nmax: int, x: float) -> np.ndarray:
    """H_0^(1)(x) .. H_nmax^(1)(x)."""
    return bessel_j(nmax, x) + 1j * bessel_y(nmax, x)


def _cyl_ratios(nmax: int, xi: float) -> np.ndarray:
    """Z_0..Z_nmax at xi from the upward ratio recurrence."""
    j = _bessel_j_table(1, xi)
    y0, y1 = _y01(xi)
    h0 = complex(j[0], y0)
    h1 = complex(j[1], y1)
    z = np.empty(nmax + 1, dtype=complex)
    z[0] = -xi * h1 / h0
    # r = H_{n-1}/H_n;  Z_n = xi * r - n
    r = h0 / h1
    for n in range(1, nmax + 1):
        z[n] = xi * r - n
        r = 1.0 / (2.0 * n / xi - r)
    return z


def Zn(n: int, xi: float) -> complex:
    """Two-dimensional DtN kernel xi * H_n'(xi) / H_n(xi); even in n."""
    xi = _check_arg(xi)
    m = abs(int(n))
    if m > N_MAX:
        raise ValueError(f"|n| = {m} exceeds n_max = {N_MAX}")
    return complex(_cyl_ratios(m, xi)[m])


def spherical_hankel1_array(nmax: int, x: float) -> np.ndarray:
    """h_0^(1)(x) .. h_nmax^(1)(x) from the closed forms of h_0, h_1 and upward recurrence."""
    x = _check_arg(x)
    e = complex(math.cos(x), math.sin(x))
    h = np.empty(nmax + 1, dtype=complex)
    h[0] = -1j * e / x
    if nmax >= 1:
        h[1] = -e * (x + 1j) / (x * x)
    for n in range(1, nmax):
        h[n + 1] = (2 * n + 1) / x * h[n] - h[n - 1]
        if not np.isfinite(h[n + 1]):
            raise OverflowError(f"h_{n + 1}({x}) overflows double precision")
    return h


def _sph_ratios(nmax: int, xi: float) -> np.ndarray:
    z = np.empty(nmax + 1, dtype=complex)
    z[0] = 1j * xi - 1.0
    # s = h_{n-1}/h_n;  z_n = xi * s - (n + 1)
    s = xi / (1.0 - 1j * xi)
    for n in range(1, nmax + 1):
        z[n] = xi * s - (n + 1)
        s = 1.0 / ((2 * n + 1) / xi - s)
    return z


def zn(n: int, xi: float) -> complex:
    """Three-dimensional DtN kernel xi * h_n'(xi) / h_n(xi)."""
    xi = _check_arg(xi)
    n = int(n)
    if n < 0:
        raise KernelDomainError(f"spherical order must be non-negative, got {n}")
    if n > N_MAX:
        raise ValueError(f"n = {n} exceeds n_max = {N_MAX}")
    return complex(_sph_ratios(n, xi)[n])


@dataclass(frozen=True)
class WaveContext:
    """Wavenumber, artificial-boundary radius and truncation order."""

    kappa: float
    R: float
    N: int
    dimension: int = 2

    def __post_init__(self):
        if not (self.kappa > 0 and self.R > 0):
            raise ValueError("kappa and R must be positive")
        if self.dimension == 2 and self.kappa < 1:
            raise ValueError("the 2D solver requires kappa >= 1")
        if int(self.N) != self.N or self.N < 0:
            raise ValueError("N must be a non-negative integer")
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")

    @property
    def xi(self) -> float:
        return self.kappa * self.R

    def kernel_table(self, n_max: int | None = None) -> "KernelTable":
        return KernelTable.build(self.dimension, self.xi, self.N if n_max is None else n_max)


@dataclass(frozen=True)
class KernelTable:
    """Precomputed kernel values at one argument.

    In 2D ``values`` has length ``2*n_max + 1`` and ``values[n_max + n]`` holds
    Z_n; the negative half is a mirror of the positive half.  In 3D
    ``values[n]`` holds z_n for ``0 <= n <= n_max``.
    """

    dimension: int
    xi: float
    n_max: int
    values: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, dimension: int, xi: float, n_max: int) -> "KernelTable":
        xi = _check_arg(xi)
        if n_max > N_MAX:
            raise ValueError(f"n_max = {n_max} exceeds {N_MAX}")
        if dimension == 2:
            half = _cyl_ratios(n_max, xi)
            values = np.concatenate([half[:0:-1], half])
        elif dimension == 3:
            values = _sph_ratios(n_max, xi)
        else:
            raise ValueError("dimension must be 2 or 3")
        values.setflags(write=False)
        return cls(dimension, xi, n_max, values)

    def __getitem__(self, n: int) -> complex:
        if self.dimension == 2:
            if abs(n) > self.n_max:
                raise IndexError(n)
            return complex(self.values[self.n_max + n])
        if not 0 <= n <= self.n_max:
            raise IndexError(n)
        return complex(self.values[n])

    def orders(self) -> np.ndarray:
        if self.dimension == 2:
            return np.arange(-self.n_max, self.n_max + 1)
        return np.arange(self.n_max + 1)

    def bound_ratio(self) -> np.ndarray:
        """|kernel_n|^2 / ((1+n^2)(d-1+xi^2)); at most one when the kernel bound holds."""
        n = self.orders()
        return np.abs(self.values) ** 2 / ((1.0 + n**2) * (self.dimension - 1 + self.xi**2))


def wronskian_residual(n: int, x: float) -> float:
    """Relative defect of J_n Y_n' - J_n' Y_n = 2/(pi x), derivatives from C_n' = C_{n-1} - (n/x) C_n."""
    x = _check_arg(x)
    j = bessel_j(max(n, 1), x)
    y = bessel_y(max(n, 1), x)
    if n == 0:
        jp, yp = -j[1], -y[1]
    else:
        jp = j[n - 1] - n / x * j[n]
        yp = y[n - 1] - n / x * y[n]
    w = j[n] * yp - jp * y[n]
    target = 2.0 / (math.pi * x)
    return abs(w - target) / target


@dataclass(frozen=True)
class KernelCheck:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)


def verify_kernels(n_max: int = 200, xis=(0.5, 2.0, 4.0, 10.0)) -> list[KernelCheck]:
    """Invariant suite: symmetry, kernel bounds, z_0 closed form, Wronskian, outgoing sign."""
    checks = []
    sym = 0.0
    for xi in xis:
        for n in range(0, n_max + 1, 7):
            sym = max(sym, abs(Zn(-n, xi) - Zn(n, xi)))
    checks.append(KernelCheck("Z_{-n} == Z_n", sym, 0.0))
    checks.append(KernelCheck("max |Z_n|^2/((1+n^2)(1+xi^2))",
                              max(float(KernelTable.build(2, xi, n_max).bound_ratio().max()) for xi in xis), 1.0))
    checks.append(KernelCheck("max |z_n|^2/((1+n^2)(2+xi^2))",
                              max(float(KernelTable.build(3, xi, n_max).bound_ratio().max()) for xi in xis), 1.0))
    z0 = max(abs(zn(0, xi) - (1j * xi - 1.0)) for xi in (0.5, 1.0, 5.0) + tuple(xis))
    checks.append(KernelCheck("|z_0(xi) - (i xi - 1)|", z0, 1e-13))
    wr = max(wronskian_residual(n, x) for n in range(0, 51, 5) for x in np.linspace(0.1, 50.0, 25))
    checks.append(KernelCheck("Wronskian relative residual", wr, 1e-11))
    neg = 0.0
    for xi in xis:
        z = KernelTable.build(2, xi, n_max).values
        neg = max(neg, float(np.sum(z.imag < 0)))
    checks.append(KernelCheck("count Im Z_n < 0", neg, 0.0))
    return checks
