"""Truncated Dirichlet-to-Neumann operators on S_R and their adjoints.

Fourier coefficients follow the orthonormal convention
``v_n = int_0^{2pi} v(R, phi) conj(Y_n(phi)) dphi`` with
``Y_n = exp(i n phi) / sqrt(2 pi)``, so ``(w, v)_{S_R} = R sum_n w_n conj(v_n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .femspace import DofMap, FeFunction, trace_sampling_matrix
from .kernels import KernelTable, WaveContext
from .mesh import Mesh

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class FourierTrace:
    """Circular-harmonic coefficients ``coeffs[n + n_f]`` for ``|n| <= n_f``."""

    R: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or len(c) % 2 != 1:
            raise ValueError("coefficient array must have odd length 2*n_f + 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite Fourier coefficients")
        object.__setattr__(self, "coeffs", c)

    @property
    def n_f(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_f, self.n_f + 1)

    def __getitem__(self, n: int) -> complex:
        if abs(n) > self.n_f:
            return 0j
        return complex(self.coeffs[n + self.n_f])

    def evaluate(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.exp(1j * np.multiply.outer(theta, self.modes)) @ self.coeffs / SQRT_2PI

    def pad(self, n_f: int) -> "FourierTrace":
        if n_f < self.n_f:
            return FourierTrace(self.R, self.coeffs[self.n_f - n_f: self.n_f + n_f + 1])
        out = np.zeros(2 * n_f + 1, dtype=complex)
        out[n_f - self.n_f: n_f + self.n_f + 1] = self.coeffs
        return FourierTrace(self.R, out)

    def __add__(self, other: "FourierTrace") -> "FourierTrace":
        n = max(self.n_f, other.n_f)
        return FourierTrace(self.R, self.pad(n).coeffs + other.pad(n).coeffs)

    def __mul__(self, alpha) -> "FourierTrace":
        return FourierTrace(self.R, alpha * self.coeffs)

    __rmul__ = __mul__


def fourier_coeffs(samples, R: float, n_f: int) -> FourierTrace:
    """Trapezoidal Fourier coefficients from ``M`` equispaced samples ``u(R, 2 pi j / M)``."""
    u = np.asarray(samples, dtype=complex)
    m = len(u)
    if m < 4 * n_f:
        raise ValueError(f"{m} samples undersample n_f = {n_f} (need at least {4 * n_f})")
    spec = np.fft.fft(u) * (SQRT_2PI / m)
    n = np.arange(-n_f, n_f + 1)
    return FourierTrace(R, spec[n % m])


def trace_pairing(w: FourierTrace, v: FourierTrace) -> complex:
    """``(w, v)_{S_R}`` for traces given by their coefficients."""
    n = max(w.n_f, v.n_f)
    return complex(w.R * np.vdot(v.pad(n).coeffs, w.pad(n).coeffs))


def _kernel(ctx: WaveContext, n_f: int, kernel: KernelTable | None) -> np.ndarray:
    N = min(ctx.N, n_f)
    if kernel is None:
        kernel = KernelTable.build(2, ctx.xi, N)
    z = np.zeros(2 * n_f + 1, dtype=complex)
    z[n_f - N: n_f + N + 1] = kernel.values[kernel.n_max - N: kernel.n_max + N + 1]
    return z


def _check_radius(trace: FourierTrace, ctx: WaveContext):
    if not math.isclose(trace.R, ctx.R, rel_tol=1e-14):
        raise ValueError(f"trace lives on radius {trace.R}, operator on {ctx.R}")


def apply_dtn(trace: FourierTrace, ctx: WaveContext, kernel: KernelTable | None = None) -> FourierTrace:
    """Coefficients of ``T_{kappa,N} v``: ``Z_n(kappa R) v_n / R`` for ``|n| <= N``."""
    _check_radius(trace, ctx)
    return FourierTrace(trace.R, _kernel(ctx, trace.n_f, kernel) * trace.coeffs / ctx.R)


def adjoint_apply(trace: FourierTrace, ctx: WaveContext, kernel: KernelTable | None = None) -> FourierTrace:
    """Coefficients of the adjoint ``conj(T conj(v))``: ``conj(Z_n) v_n / R``."""
    _check_radius(trace, ctx)
    return FourierTrace(trace.R, np.conj(_kernel(ctx, trace.n_f, kernel)) * trace.coeffs / ctx.R)


def sobolev_trace_norm(trace: FourierTrace, s: float) -> float:
    """``sqrt(R sum_n (1+n^2)^s |v_n|^2)``."""
    w = (1.0 + trace.modes.astype(float) ** 2) ** s
    return float(math.sqrt(trace.R * np.sum(w * np.abs(trace.coeffs) ** 2)))


def truncation_gap_constant(N: int, R: float, kappa: float, s: float, dimension: int = 2) -> float:
    """Constant of the truncation-gap bound ``(d-1+(kappa R)^2)^(1/2) / (R (1+N^2)^((2s-1)/4))``."""
    if s < 0.5:
        raise ValueError("the truncation gap bound needs s >= 1/2")
    if dimension not in (2, 3):
        raise ValueError("dimension must be 2 or 3")
    return math.sqrt(dimension - 1 + (kappa * R) ** 2) / (R * (1.0 + N**2) ** ((2.0 * s - 1.0) / 4.0))


def reference_order(N: int, kappa: float, R: float) -> int:
    """Order standing in for the untruncated operator."""
    return max(4 * N, 2 * math.ceil(kappa * R) + 64)


# --- spherical (3D) series level -------------------------------------------------

def _check_sphere_shape(coeffs: np.ndarray) -> int:
    if coeffs.ndim != 2 or coeffs.shape[1] != 2 * coeffs.shape[0] - 1:
        raise ValueError("3D coefficients must have shape (n_max+1, 2*n_max+1), m offset by n_max")
    return coeffs.shape[0] - 1


def sphere_mask(n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)[:, None]
    m = np.arange(-n_max, n_max + 1)[None, :]
    return np.abs(m) <= n


def apply_dtn_3d_series(coeffs, ctx: WaveContext, adjoint: bool = False) -> np.ndarray:
    """Multiply the ``(n, m)`` coefficients by ``z_n(kappa R)/R`` (or its conjugate), zero for ``n > N``."""
    c = np.asarray(coeffs, dtype=complex)
    n_max = _check_sphere_shape(c)
    N = min(ctx.N, n_max)
    z = np.zeros(n_max + 1, dtype=complex)
    z[: N + 1] = KernelTable.build(3, ctx.xi, N).values
    if adjoint:
        z = np.conj(z)
    return np.where(sphere_mask(n_max), c * z[:, None] / ctx.R, 0.0)


def sphere_pairing(w, v, R: float) -> complex:
    """``(w, v)_{S_R}`` from spherical-harmonic coefficients (area element R^2)."""
    w = np.asarray(w)
    v = np.asarray(v)
    mask = sphere_mask(_check_sphere_shape(w))
    return complex(R**2 * np.sum(w[mask] * np.conj(v[mask])))


def sobolev_sphere_norm(coeffs, R: float, s: float) -> float:
    c = np.asarray(coeffs)
    n_max = _check_sphere_shape(c)
    n = np.arange(n_max + 1)[:, None].astype(float)
    w = np.where(sphere_mask(n_max), (1.0 + n**2) ** s, 0.0)
    return float(math.sqrt(R**2 * np.sum(w * np.abs(c) ** 2)))


# --- finite element realisation ------------------------------------------------

def default_sample_count(mesh: Mesh, N: int, oversample: int = 8) -> int:
    """Samples per sweep of S_R.

    A multiple of the arc count, so vertex kinks fall on samples, and the same
    for every ``N <= 128`` so truncation studies share one boundary quadrature.
    """
    n_arcs = len(mesh.curved)
    per_arc = max(oversample, math.ceil(4 * max(N, 128) / n_arcs))
    return n_arcs * per_arc


class DtnOperator:
    """Truncated DtN form on a P1 space, kept in factored form ``B^H diag(Z) B``.

    ``B`` maps the coefficients of the dofs that touch S_R to the circular
    harmonic coefficients ``|n| <= N`` of the trace, through trace sampling and
    a discrete Fourier transform.
    """

    def __init__(self, ctx: WaveContext, dofmap: DofMap, n_samples: int | None = None,
                 kernel: np.ndarray | None = None):
        self.ctx = ctx
        self.dofmap = dofmap
        mesh = dofmap.mesh
        self.n_samples = n_samples or default_sample_count(mesh, ctx.N)
        if self.n_samples < 4 * ctx.N:
            raise ValueError("too few boundary samples for the truncation order")
        self.trace_dofs = dofmap.trace_dofs
        S = trace_sampling_matrix(mesh, self.n_samples)[:, self.trace_dofs].toarray()
        n = np.arange(-ctx.N, ctx.N + 1)
        theta = 2.0 * math.pi * np.arange(self.n_samples) / self.n_samples
        F = np.exp(-1j * np.outer(n, theta)) * (SQRT_2PI / self.n_samples)
        self.B = F @ S
        if kernel is None:
            kernel = ctx.kernel_table().values
        self.Z = np.asarray(kernel, dtype=complex)
        if self.Z.shape != (2 * ctx.N + 1,):
            raise ValueError("kernel must hold 2N+1 values")

    @property
    def rank(self) -> int:
        return 2 * self.ctx.N + 1

    def adjoint(self) -> "DtnOperator":
        out = object.__new__(DtnOperator)
        out.__dict__.update(self.__dict__)
        out.__dict__.pop("trace_block", None)
        out.Z = np.conj(self.Z)
        return out

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        """Trace Fourier coefficients (``|n| <= N``) of the field with dof vector ``x``."""
        return self.B @ np.asarray(x)[self.trace_dofs]

    def trace(self, f: FeFunction) -> FourierTrace:
        return FourierTrace(self.ctx.R, self.coefficients(f.coeffs))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``D x`` with ``D[i, j] = (T phi_j, phi_i)_{S_R}``."""
        out = np.zeros(self.dofmap.n_dofs, dtype=complex)
        out[self.trace_dofs] = self.B.conj().T @ (self.Z * self.coefficients(x))
        return out

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        """``D^H x``."""
        out = np.zeros(self.dofmap.n_dofs, dtype=complex)
        out[self.trace_dofs] = self.B.conj().T @ (np.conj(self.Z) * self.coefficients(x))
        return out

    @cached_property
    def trace_block(self) -> np.ndarray:
        """Dense ``D`` restricted to the trace dofs."""
        return self.B.conj().T @ (self.Z[:, None] * self.B)

    def dense(self) -> np.ndarray:
        n = self.dofmap.n_dofs
        D = np.zeros((n, n), dtype=complex)
        D[np.ix_(self.trace_dofs, self.trace_dofs)] = self.trace_block
        return D

    def form(self, w: FeFunction, v: FeFunction) -> complex:
        """``(T_{kappa,N} w, v)_{S_R} = sum_n Z_n w_n conj(v_n)``."""
        if w.dofmap != self.dofmap or v.dofmap != self.dofmap:
            raise ValueError("functions do not live on the operator's mesh")
        return complex(np.sum(self.Z * self.coefficients(w.coeffs) * np.conj(self.coefficients(v.coeffs))))


def dtn_form(w: FeFunction, v: FeFunction, op: DtnOperator) -> complex:
    return op.form(w, v)
