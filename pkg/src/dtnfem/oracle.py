"""Series solutions for plane-wave scattering by a concentric penetrable disk.

Deliberately built on ``scipy.special`` rather than :mod:`dtnfem.kernels`, so
that it is an independent check on the solver path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .dtn import SQRT_2PI, FourierTrace


class ResonanceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeriesSolution:
    """Mode coefficients in the ``Y_n = exp(i n theta)/sqrt(2 pi)`` basis.

    For ``r < a``: ``u = sum_n alpha_n J_n(kappa sqrt(c_in) r) Y_n(theta)``;
    for ``r >= a``: ``u = sum_n (inc_n J_n(kappa r) + b_n H_n(kappa r)) Y_n(theta)``
    with ``inc_n = sqrt(2 pi) i^n exp(-i n theta_d)``.
    """

    kappa: float
    a: float
    c_in: float
    R: float
    theta_d: float
    amplitude: complex
    alpha: np.ndarray
    b: np.ndarray

    @property
    def n_f(self) -> int:
        return (len(self.b) - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_f, self.n_f + 1)

    @property
    def k_in(self) -> float:
        return self.kappa * math.sqrt(self.c_in)

    @property
    def incident(self) -> np.ndarray:
        n = self.modes
        return self.amplitude * SQRT_2PI * (1j**n) * np.exp(-1j * n * self.theta_d)

    def interface_residuals(self) -> tuple[np.ndarray, np.ndarray]:
        """Mode-wise jumps of value and radial derivative at r = a, relative to the incident mode."""
        n, ka, kia = self.modes, self.kappa * self.a, self.k_in * self.a
        inc = self.incident
        val_out = inc * special.jv(n, ka) + self.b * special.hankel1(n, ka)
        val_in = self.alpha * special.jv(n, kia)
        der_out = self.kappa * (inc * special.jvp(n, ka) + self.b * special.h1vp(n, ka))
        der_in = self.alpha * self.k_in * special.jvp(n, kia)
        scale = np.maximum(np.abs(val_out), np.abs(inc * special.jv(n, ka))) + 1e-300
        dscale = np.maximum(np.abs(der_out), np.abs(self.kappa * inc * special.jvp(n, ka))) + 1e-300
        return np.abs(val_out - val_in) / scale, np.abs(der_out - der_in) / dscale

    def scattering_coefficients(self) -> np.ndarray:
        """``1 + 2 b_n / inc_n``; unimodular for lossless real contrast."""
        return 1.0 + 2.0 * self.b / self.incident

    def trace(self, r: float | None = None) -> FourierTrace:
        """Fourier coefficients of the total field on the circle of radius ``r >= a``."""
        r = self.R if r is None else r
        n = self.modes
        c = self.incident * special.jv(n, self.kappa * r) + self.b * special.hankel1(n, self.kappa * r)
        return FourierTrace(r, c)

    def scattered_trace(self, r: float | None = None) -> FourierTrace:
        r = self.R if r is None else r
        return FourierTrace(r, self.b * special.hankel1(self.modes, self.kappa * r))

    def __call__(self, x) -> np.ndarray:
        return eval_series(self, x)

    def gradient(self, x) -> np.ndarray:
        return eval_series_gradient(self, x)


def mie_disk_solve(kappa: float, a: float, c_in: float, theta_d: float = 0.0, N_f: int | None = None,
                   R: float = 1.0, amplitude: complex = 1.0) -> SeriesSolution:
    if not (a > 0 and c_in > 0):
        raise ValueError("obstacle radius and contrast must be positive")
    n_min = math.ceil(kappa * max(a, R)) + 16
    if N_f is None:
        N_f = n_min + 8
    if N_f < math.ceil(kappa * a) + 16:
        raise ValueError(f"N_f = {N_f} too small; need at least ceil(kappa a) + 16")
    n = np.arange(-N_f, N_f + 1)
    ka = kappa * a
    k_in = kappa * math.sqrt(c_in)
    kia = k_in * a
    inc = amplitude * SQRT_2PI * (1j**n) * np.exp(-1j * n * theta_d)
    alpha = np.zeros(len(n), dtype=complex)
    b = np.zeros(len(n), dtype=complex)
    if c_in == 1.0:
        return SeriesSolution(kappa, a, c_in, R, theta_d, complex(amplitude), inc.copy(), b)
    for i, m in enumerate(n):
        # alpha J_m(kia) - b H_m(ka) = inc J_m(ka);  alpha k_in J_m'(kia) - b kappa H_m'(ka) = inc kappa J_m'(ka)
        A = np.array([[special.jv(m, kia), -special.hankel1(m, ka)],
                      [k_in * special.jvp(m, kia), -kappa * special.h1vp(m, ka)]])
        rhs = inc[i] * np.array([special.jv(m, ka), kappa * special.jvp(m, ka)])
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(rhs)):
            continue  # mode beyond float range: its coefficients underflow to zero
        scale = np.linalg.norm(A, axis=0)
        if np.any(scale == 0) or abs(np.linalg.det(A / scale)) < 1e-13:
            raise ResonanceError(f"transmission system for mode {m} is singular")
        alpha[i], b[i] = np.linalg.solve(A / scale, rhs) / scale
    return SeriesSolution(kappa, a, c_in, R, theta_d, complex(amplitude), alpha, b)


def _jv_down(n_top: int, x: np.ndarray) -> np.ndarray:
    """``J_0..J_{n_top}`` by downward recurrence from library values at the two top orders."""
    out = np.empty((len(x), n_top + 1))
    out[:, n_top] = special.jv(n_top, x)
    out[:, n_top - 1] = special.jv(n_top - 1, x)
    tiny = x < 1e-8
    xs = np.where(tiny, 1.0, x)
    for n in range(n_top - 1, 0, -1):
        out[:, n - 1] = (2 * n / xs) * out[:, n] - out[:, n + 1]
    if np.any(tiny):
        out[tiny] = special.jv(np.arange(n_top + 1), x[tiny][:, None])
    return out


def _yv_up(n_top: int, x: np.ndarray) -> np.ndarray:
    """``Y_0..Y_{n_top}`` by upward recurrence (stable for Y)."""
    out = np.empty((len(x), n_top + 1))
    out[:, 0] = special.y0(x)
    out[:, 1] = special.y1(x)
    for n in range(1, n_top):
        out[:, n + 1] = (2 * n / x) * out[:, n] - out[:, n - 1]
    return out


def _mirror(C: np.ndarray, n_f: int) -> np.ndarray:
    """Orders ``0..n_f+1`` to ``-(n_f+1)..n_f+1`` via ``C_{-n} = (-1)^n C_n``."""
    pos = np.arange(1, n_f + 2)
    neg = C[:, pos][:, ::-1] * np.where(pos[::-1] % 2, -1.0, 1.0)
    return np.concatenate([neg, C], axis=1)


def _radial(sol: SeriesSolution, r: np.ndarray, derivative: bool):
    """Radial mode functions (and r-derivatives) at radii ``r``, shape ``(len(r), 2 n_f + 1)``."""
    n_f = sol.n_f
    f = np.zeros((len(r), 2 * n_f + 1), dtype=complex)
    df = np.zeros_like(f) if derivative else None
    for mask, k, outside in ((r < sol.a, sol.k_in, False), (r >= sol.a, sol.kappa, True)):
        if not np.any(mask):
            continue
        kr = k * r[mask]
        J = _mirror(_jv_down(n_f + 1, kr), n_f)
        if outside:
            H = J + 1j * _mirror(_yv_up(n_f + 1, np.where(kr > 0, kr, 1.0)), n_f)
            f[mask] = sol.incident * J[:, 1:-1] + sol.b * H[:, 1:-1]
            if derivative:
                df[mask] = 0.5 * k * (sol.incident * (J[:, :-2] - J[:, 2:]) + sol.b * (H[:, :-2] - H[:, 2:]))
        else:
            f[mask] = sol.alpha * J[:, 1:-1]
            if derivative:
                df[mask] = 0.5 * k * sol.alpha * (J[:, :-2] - J[:, 2:])
    return f, df


def eval_series(sol: SeriesSolution, x) -> np.ndarray:
    """Total field at points ``x`` (shape ``(..., 2)``) inside B_R."""
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    x = x.reshape(-1, 2)
    r = np.hypot(x[:, 0], x[:, 1])
    if np.any(r > sol.R * (1 + 1e-12)):
        raise ValueError("evaluation point outside B_R")
    theta = np.arctan2(x[:, 1], x[:, 0])
    f, _ = _radial(sol, r, False)
    e = np.exp(1j * np.outer(theta, sol.modes)) / SQRT_2PI
    return np.sum(f * e, axis=1).reshape(shape)


def eval_series_gradient(sol: SeriesSolution, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.reshape(-1, 2)
    r = np.hypot(x[:, 0], x[:, 1])
    if np.any(r > sol.R * (1 + 1e-12)):
        raise ValueError("evaluation point outside B_R")
    theta = np.arctan2(x[:, 1], x[:, 0])
    f, df = _radial(sol, r, True)
    e = np.exp(1j * np.outer(theta, sol.modes)) / SQRT_2PI
    ur = np.sum(df * e, axis=1)
    ut = np.sum(1j * sol.modes * f * e, axis=1) / np.maximum(r, 1e-300)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([c * ur - s * ut, s * ur + c * ut], axis=-1).reshape(shape)


def planewave(kappa: float, theta_d: float = 0.0, amplitude: complex = 1.0):
    d = np.array([math.cos(theta_d), math.sin(theta_d)])

    def u(x):
        return amplitude * np.exp(1j * kappa * (np.asarray(x) @ d))

    return u


def planewave_coeffs(kappa: float, R: float, theta_d: float, N_f: int,
                     amplitude: complex = 1.0) -> tuple[FourierTrace, FourierTrace]:
    """Jacobi-Anger coefficients of the plane wave and of its radial derivative on S_R."""
    if N_f < math.ceil(kappa * R) + 16:
        raise ValueError("N_f must be at least ceil(kappa R) + 16")
    n = np.arange(-N_f, N_f + 1)
    c = amplitude * SQRT_2PI * (1j**n) * np.exp(-1j * n * theta_d)
    return (FourierTrace(R, c * special.jv(n, kappa * R)),
            FourierTrace(R, c * kappa * special.jvp(n, kappa * R)))
