"""Linear, adjoint and fixed-point solvers for the DtN-truncated FEM problem.

System matrix ``A = K - kappa^2 M_c - D`` where ``M_c`` is the mass matrix
weighted with the linear part of the contrast and ``D = B^H diag(Z) B`` the
truncated DtN form.  Factorisation uses the shifted split

    A = P + E C E^T,   P = K - kappa^2 M_c - i kappa M_b,   C = i kappa M_b - D

with ``M_b`` the boundary mass on S_R and ``E`` the injection of the dofs that
touch S_R.  ``P`` is an impedance operator and never singular, so it is
factorised once per mesh and contrast; ``C`` lives on the boundary-coupled
dofs only and enters through a Woodbury capacitance solve.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .dtn import DtnOperator, FourierTrace, fourier_coeffs
from .femspace import (AssembledForms, DofMap, FeFunction, assemble_forms, barycentric,
                       mesh_quadrature, norm_V, trace_sampling_matrix)
from .kernels import WaveContext
from .mesh import OBSTACLE, Mesh, ObstacleSpec, build_mesh

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class SingularFactorizationError(SolverError):
    pass


class CapacitanceError(SolverError):
    pass


class NoContraction(SolverError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ContrastModel:
    """``c(x, u) = c_lin + epsilon |u|^2`` in the obstacle, 1 elsewhere."""

    c_lin: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("Kerr coefficient must be non-negative")

    @property
    def kind(self) -> str:
        return "kerr" if self.epsilon > 0 else "linear_constant"

    def __call__(self, u, in_obstacle):
        u = np.asarray(u)
        inside = self.c_lin + self.epsilon * np.abs(u) ** 2
        return np.where(in_obstacle, inside, 1.0)


@dataclass(frozen=True)
class SourceModel:
    """Linear source ``f0(x)``, supported in the obstacle; ``None`` means no source."""

    f0: object = None

    def __call__(self, x) -> np.ndarray:
        if self.f0 is None:
            return np.zeros(len(x), dtype=complex)
        return np.asarray(self.f0(x), dtype=complex)


@dataclass(frozen=True)
class IncidentField:
    theta_d: float = 0.0
    amplitude: complex = 1.0
    kind: str = "planewave"

    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.theta_d), math.sin(self.theta_d)])

    def value(self, kappa: float, x) -> np.ndarray:
        return self.amplitude * np.exp(1j * kappa * (np.asarray(x) @ self.direction()))

    def radial_derivative(self, kappa: float, x) -> np.ndarray:
        """``r_hat . grad u_inc = i kappa (d . r_hat) u_inc``."""
        x = np.asarray(x)
        rhat = x / np.hypot(x[:, 0], x[:, 1])[:, None]
        return 1j * kappa * (rhat @ self.direction()) * self.value(kappa, x)


@dataclass(eq=False)
class ProblemData:
    ctx: WaveContext
    mesh: Mesh
    forms: AssembledForms
    dtn: DtnOperator
    contrast: ContrastModel = field(default_factory=ContrastModel)
    source: SourceModel = field(default_factory=SourceModel)
    incident: IncidentField = field(default_factory=IncidentField)

    def __post_init__(self):
        if self.forms.dofmap.mesh is not self.mesh or self.dtn.dofmap.mesh is not self.mesh:
            raise ValueError("forms and DtN operator must be built on the problem mesh")
        if self.dtn.ctx != self.ctx:
            raise ValueError("DtN operator built for a different wave context")

    @classmethod
    def build(cls, ctx: WaveContext, mesh: Mesh, contrast=None, source=None, incident=None,
              forms: AssembledForms | None = None, n_samples: int | None = None) -> "ProblemData":
        forms = forms or assemble_forms(mesh)
        return cls(ctx, mesh, forms, DtnOperator(ctx, forms.dofmap, n_samples),
                   contrast or ContrastModel(), source or SourceModel(), incident or IncidentField())

    @classmethod
    def from_obstacle(cls, ctx: WaveContext, obstacle: ObstacleSpec, h_target: float,
                      incident=None, source=None) -> "ProblemData":
        mesh = build_mesh(ctx, obstacle, h_target)
        return cls.build(ctx, mesh, ContrastModel(obstacle.c_lin, obstacle.epsilon), source, incident)

    def with_order(self, N: int) -> "ProblemData":
        ctx = WaveContext(self.ctx.kappa, self.ctx.R, N)
        return ProblemData.build(ctx, self.mesh, self.contrast, self.source, self.incident, self.forms,
                                 self.dtn.n_samples)

    @property
    def dofmap(self) -> DofMap:
        return self.forms.dofmap


@dataclass
class SolveReport:
    iterations: int = 0
    increments: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual: float = 0.0
    contraction_estimates: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rho_monitor: float = 0.0

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "increments": [float(x) for x in self.increments],
            "residual": float(self.residual),
            "contraction_estimates": [float(x) for x in self.contraction_estimates],
            "rho_monitor": float(self.rho_monitor),
        }


class LinearSystem:
    """``A = K - kappa^2 M_c - D`` in split form with a cached factorisation."""

    def __init__(self, forms: AssembledForms, dtn: DtnOperator, kappa: float, c_lin: float = 1.0):
        self.forms = forms
        self.dtn = dtn
        self.kappa = float(kappa)
        self.c_lin = float(c_lin)
        self.Mc = forms.M + (self.c_lin - 1.0) * forms.M_obstacle
        self.sparse_part = (forms.K - self.kappa**2 * self.Mc).tocsc()
        self.E = dtn.trace_dofs
        Mb = forms.M_boundary[self.E][:, self.E].toarray()
        self._shift = 1j * self.kappa * Mb
        self.P = (self.sparse_part - 1j * self.kappa * forms.M_boundary).tocsc()
        self.C = self._shift - dtn.trace_block
        self._lu = None
        self._cap = {}

    @property
    def n(self) -> int:
        return self.forms.dofmap.n_dofs

    @property
    def factor_shapes(self) -> tuple:
        return self.dtn.B.shape

    def matvec(self, x) -> np.ndarray:
        return self.sparse_part @ x - self.dtn.matvec(x)

    def rmatvec(self, x) -> np.ndarray:
        return self.sparse_part.conj().T @ x - self.dtn.rmatvec(x)

    def dense(self) -> np.ndarray:
        return self.sparse_part.toarray() - self.dtn.dense()

    @property
    def lu(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.P)
            except RuntimeError as exc:
                raise SingularFactorizationError(
                    "factorisation of the shifted sparse part failed (suspected resonance)") from exc
        return self._lu

    def _capacitance(self, adjoint: bool):
        if adjoint not in self._cap:
            n, E = self.n, self.E
            rhs = np.zeros((n, len(E)), dtype=complex)
            rhs[E, np.arange(len(E))] = 1.0
            W = self.lu.solve(rhs, trans="H" if adjoint else "N")
            C = self.C.conj().T if adjoint else self.C
            cap = np.eye(len(E)) + C @ W[E]
            try:
                lu_cap = la.lu_factor(cap, check_finite=True)
            except (ValueError, la.LinAlgError) as exc:
                raise CapacitanceError("Woodbury capacitance matrix is singular") from exc
            if np.min(np.abs(np.diag(lu_cap[0]))) < 1e-14 * np.max(np.abs(np.diag(lu_cap[0]))):
                raise CapacitanceError("Woodbury capacitance matrix is numerically singular")
            self._cap[adjoint] = (W, C, lu_cap)
        return self._cap[adjoint]

    def _solve_once(self, b, adjoint: bool) -> np.ndarray:
        W, C, lu_cap = self._capacitance(adjoint)
        y = self.lu.solve(np.asarray(b, dtype=complex), trans="H" if adjoint else "N")
        z = la.lu_solve(lu_cap, C @ y[self.E])
        return y - W @ z

    def solve(self, b, adjoint: bool = False, refine_steps: int = 2) -> np.ndarray:
        b = np.asarray(b, dtype=complex)
        op = self.rmatvec if adjoint else self.matvec
        u = self._solve_once(b, adjoint)
        nb = np.linalg.norm(b)
        for _ in range(refine_steps):
            r = b - op(u)
            if nb == 0 or np.linalg.norm(r) <= 1e-14 * nb:
                break
            u = u + self._solve_once(r, adjoint)
        return u

    def relative_residual(self, u, b, adjoint: bool = False) -> float:
        op = self.rmatvec if adjoint else self.matvec
        nb = np.linalg.norm(b)
        r = np.linalg.norm(op(u) - b)
        return float(r / nb) if nb > 0 else float(r)


def assemble_system(data: ProblemData, kernel: str = "direct") -> LinearSystem:
    """System of ``a_N`` plus the frozen linear contrast; ``kernel='adjoint'`` uses ``conj(Z_n)``."""
    dtn = data.dtn.adjoint() if kernel == "adjoint" else data.dtn
    return LinearSystem(data.forms, dtn, data.ctx.kappa, data.contrast.c_lin)


def incident_trace_coeffs(data: ProblemData, n_f: int) -> tuple[FourierTrace, FourierTrace]:
    """Fourier coefficients of ``u_inc`` and ``r . grad u_inc`` on S_R from trace sampling."""
    m = max(data.dtn.n_samples, 4 * n_f)
    theta = 2 * math.pi * np.arange(m) / m
    x = data.ctx.R * np.column_stack([np.cos(theta), np.sin(theta)])
    k = data.ctx.kappa
    return (fourier_coeffs(data.incident.value(k, x), data.ctx.R, n_f),
            fourier_coeffs(data.incident.radial_derivative(k, x), data.ctx.R, n_f))


def assemble_incident_rhs(data: ProblemData) -> np.ndarray:
    """``-(T_{kappa,N} u_inc, phi_i)_{S_R} + (r . grad u_inc, phi_i)_{S_R}``."""
    n = data.dofmap.n_dofs
    if data.incident.amplitude == 0:
        return np.zeros(n, dtype=complex)
    dtn = data.dtn
    value, _ = incident_trace_coeffs(data, data.ctx.N)
    rhs = np.zeros(n, dtype=complex)
    rhs[dtn.trace_dofs] -= dtn.B.conj().T @ (dtn.Z * value.coeffs)
    m = dtn.n_samples
    theta = 2 * math.pi * np.arange(m) / m
    x = data.ctx.R * np.column_stack([np.cos(theta), np.sin(theta)])
    g = data.incident.radial_derivative(data.ctx.kappa, x)
    S = trace_sampling_matrix(data.mesh, m)
    rhs += (2 * math.pi * data.ctx.R / m) * (S.T @ g)
    return rhs


class _ObstacleQuadrature:
    """Quadrature restricted to obstacle cells, with shape-function values."""

    def __init__(self, mesh: Mesh):
        q = mesh_quadrature(mesh)
        keep = mesh.region[q.cell] == OBSTACLE
        self.cell = q.cell[keep]
        self.points = q.points[keep]
        self.weights = q.weights[keep]
        self.lam = barycentric(mesh, self.cell, self.points)
        self.dofs = mesh.cells[self.cell]
        self.n = mesh.n_vertices

    def values(self, coeffs) -> np.ndarray:
        return np.einsum("qi,qi->q", self.lam, coeffs[self.dofs])

    def load(self, integrand) -> np.ndarray:
        """``(integrand, phi_i)`` for real shape functions."""
        contrib = (self.weights * integrand)[:, None] * self.lam
        return np.bincount(self.dofs.ravel(), weights=contrib.real.ravel(), minlength=self.n) + \
            1j * np.bincount(self.dofs.ravel(), weights=contrib.imag.ravel(), minlength=self.n)


def assemble_source_rhs(data: ProblemData) -> np.ndarray:
    if data.source.f0 is None:
        return np.zeros(data.dofmap.n_dofs, dtype=complex)
    q = _ObstacleQuadrature(data.mesh)
    return q.load(data.source(q.points))


def solve_linear(system: LinearSystem, rhs) -> tuple[FeFunction, SolveReport]:
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape != (system.n,):
        raise ValueError("right-hand side length does not match the system")
    u = system.solve(rhs)
    res = system.relative_residual(u, rhs)
    report = SolveReport(iterations=1, residual=res, rho_monitor=norm_V(u, system.forms))
    return FeFunction(u, system.forms.dofmap), report


def solve_adjoint(system: LinearSystem, f) -> FeFunction:
    """``w_N`` with ``conj(a_N(v, w_N)) = (v, f)_{B_R}``: matrix ``A^H``, right-hand side ``M f``."""
    coeffs = f.coeffs if isinstance(f, FeFunction) else np.asarray(f, dtype=complex)
    rhs = system.forms.M @ coeffs
    return FeFunction(system.solve(rhs, adjoint=True), system.forms.dofmap)


def fixed_point_solve(data: ProblemData, tol: float = 1e-10, max_iter: int = 100,
                      system: LinearSystem | None = None) -> tuple[FeFunction, SolveReport]:
    """Fixed-point iteration ``u <- A^{-1} F(u)`` for the Kerr-type problem.

    ``A`` carries the linear contrast ``c(., 0)``; ``F`` collects the
    remaining nonlinear contrast term, the source and the incident-field
    functional.  Stops on ``||u_{k+1} - u_k||_V <= tol ||u_{k+1}||_V``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    system = system or assemble_system(data)
    forms = data.forms
    kappa2eps = data.ctx.kappa**2 * data.contrast.epsilon
    linear_rhs = assemble_incident_rhs(data) + assemble_source_rhs(data)
    q = _ObstacleQuadrature(data.mesh) if kappa2eps else None

    def F(w):
        if not kappa2eps:
            return linear_rhs
        wq = q.values(w)
        return linear_rhs + kappa2eps * q.load(np.abs(wq) ** 2 * wq)

    u = system.solve(linear_rhs)
    increments, rates = [], []
    bad = 0
    for k in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            u_new = system.solve(F(u))
        if not np.all(np.isfinite(u_new)):
            report = SolveReport(k, np.array(increments), math.inf, np.array(rates), math.inf)
            raise NoContraction("fixed-point iterate diverged to non-finite values", report)
        inc = norm_V(u_new - u, forms)
        increments.append(inc)
        if len(increments) > 1 and increments[-2] > 0:
            rates.append(inc / increments[-2])
            bad = bad + 1 if rates[-1] >= 1.0 else 0
        u = u_new
        size = norm_V(u, forms)
        log.debug("fixed point %d: increment %.3e, |u|_V %.3e", k, inc, size)
        if inc <= tol * size:
            Fu = F(u)
            report = SolveReport(k, np.array(increments), system.relative_residual(u, Fu),
                                 np.array(rates), size)
            return FeFunction(u, forms.dofmap), report
        if bad >= 3:
            report = SolveReport(k, np.array(increments), math.nan, np.array(rates), size)
            raise NoContraction(
                "contraction estimate >= 1 for 3 consecutive steps; the nonlinearity is too strong "
                "for the fixed-point map on this data", report)
    report = SolveReport(max_iter, np.array(increments), math.nan, np.array(rates), norm_V(u, forms))
    raise NoContraction(f"no convergence within {max_iter} iterations", report)


def infsup_constant(A: np.ndarray, G: np.ndarray) -> float:
    """Smallest singular value of ``L^{-1} A L^{-H}`` with ``G = L L^H``."""
    L = la.cholesky(G, lower=True)
    X = la.solve_triangular(L, A, lower=True)
    X = la.solve_triangular(L, X.conj().T, lower=True).conj().T
    return float(la.svdvals(X)[-1])


def estimate_infsup(system: LinearSystem, forms: AssembledForms, kappa: float, cap: int = 3000) -> float:
    """Discrete inf-sup constant of the system form in the ``||.||_{V,kappa}`` norm (dense)."""
    n = forms.dofmap.n_dofs
    if n > cap:
        raise ValueError(f"{n} dofs exceed the dense inf-sup cap of {cap}")
    G = (forms.K + kappa**2 * forms.M).toarray()
    G = 0.5 * (G + G.conj().T)
    try:
        return infsup_constant(system.dense(), G)
    except la.LinAlgError as exc:
        raise SolverError("Gram matrix of the V_kappa norm is not positive definite") from exc
