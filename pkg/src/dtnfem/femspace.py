"""P1 Lagrange space on curved meshes: quadrature, assembly, interpolation, norms.

On a curved cell the local shape functions are those of the straight generator
triangle, extended linearly over the circular segment between chord and arc.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import CURVED, OBSTACLE, Mesh, TWO_PI

# symmetric 6-point rule, exact for degree 4 (barycentric a, a, 1-2a)
_D4_A = np.array([0.445948490915965, 0.091576213509771])
_D4_W = np.array([0.223381589678011, 0.109951743655322])


def _triangle_rule() -> tuple[np.ndarray, np.ndarray]:
    bary, w = [], []
    for a, wt in zip(_D4_A, _D4_W):
        b = 1.0 - 2.0 * a
        bary += [(a, a, b), (a, b, a), (b, a, a)]
        w += [wt] * 3
    return np.array(bary), np.array(w)


TRI_BARY, TRI_W = _triangle_rule()
SEG_N_THETA = 8
SEG_N_R = 4


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class CellQuadrature:
    """Quadrature for all cells, flattened: point ``q`` belongs to ``cell[q]``."""

    cell: np.ndarray
    points: np.ndarray
    weights: np.ndarray


def _segment_rule(mesh: Mesh, cells: np.ndarray):
    """Polar tensor Gauss rule on the circular segments of ``cells``."""
    xt, wt = np.polynomial.legendre.leggauss(SEG_N_THETA)
    xr, wr = np.polynomial.legendre.leggauss(SEG_N_R)
    t0, t1 = mesh.arcs[cells, 0], mesh.arcs[cells, 1]
    half = 0.5 * (t1 - t0)
    mid = 0.5 * (t0 + t1)
    d = mesh.R * np.cos(half)
    phi = mid[:, None] + half[:, None] * xt[None, :]
    rc = d[:, None] / np.cos(phi - mid[:, None])
    # r nodes between chord and arc
    r = 0.5 * (rc[..., None] + mesh.R) + 0.5 * (mesh.R - rc[..., None]) * xr
    w = (half[:, None, None] * wt[None, :, None]) * (0.5 * (mesh.R - rc[..., None]) * wr) * r
    phi = np.broadcast_to(phi[..., None], r.shape)
    pts = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
    n = SEG_N_THETA * SEG_N_R
    return pts.reshape(len(cells), n, 2), w.reshape(len(cells), n)


def cell_quadrature(mesh: Mesh, c: int) -> QuadratureRule:
    """Degree-4 rule on one cell in physical coordinates."""
    p = mesh.points[mesh.cells[c]]
    e1, e2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    pts = TRI_BARY @ p
    w = area * TRI_W
    if mesh.kind[c] == CURVED:
        sp_, sw = _segment_rule(mesh, np.array([c]))
        pts = np.vstack([pts, sp_[0]])
        w = np.concatenate([w, sw[0]])
    return QuadratureRule(pts, w)


def mesh_quadrature(mesh: Mesh) -> CellQuadrature:
    p = mesh.points[mesh.cells]
    area = mesh.generator_areas()
    pts = np.einsum("qi,cid->cqd", TRI_BARY, p).reshape(-1, 2)
    w = (area[:, None] * TRI_W[None, :]).ravel()
    cell = np.repeat(np.arange(mesh.n_cells), len(TRI_W))
    curved = mesh.curved
    if len(curved):
        sp_, sw = _segment_rule(mesh, curved)
        pts = np.vstack([pts, sp_.reshape(-1, 2)])
        w = np.concatenate([w, sw.ravel()])
        cell = np.concatenate([cell, np.repeat(curved, sw.shape[1])])
    return CellQuadrature(cell, pts, w)


def _affine(mesh: Mesh):
    """Per-cell inverse Jacobians of the generator triangles and basis gradients."""
    p = mesh.points[mesh.cells]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns e1, e2
    Jinv = np.linalg.inv(J)
    grads = np.empty((mesh.n_cells, 3, 2))
    grads[:, 1] = Jinv[:, 0]
    grads[:, 2] = Jinv[:, 1]
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return p[:, 0], Jinv, grads


def barycentric(mesh: Mesh, cells: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Values of the three local shape functions of ``cells[i]`` at ``pts[i]``."""
    p0, Jinv, _ = _affine(mesh)
    lam12 = np.einsum("qij,qj->qi", Jinv[cells], pts - p0[cells])
    return np.column_stack([1.0 - lam12.sum(axis=1), lam12])


@dataclass(eq=False)
class DofMap:
    """One dof per vertex, numbered like the vertices."""

    mesh: Mesh

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_vertices

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        return self.mesh.boundary_vertices()

    @cached_property
    def trace_dofs(self) -> np.ndarray:
        """Dofs whose shape function is non-zero somewhere on S_R (curved-cell vertices)."""
        return np.unique(self.mesh.cells[self.mesh.curved])

    def __eq__(self, other):
        return isinstance(other, DofMap) and other.mesh is self.mesh

    __hash__ = object.__hash__


@dataclass(eq=False)
class FeFunction:
    coeffs: np.ndarray
    dofmap: DofMap

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.dofmap.n_dofs,):
            raise ValueError("coefficient vector does not match the dof map")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficients")

    @property
    def mesh(self) -> Mesh:
        return self.dofmap.mesh

    def __call__(self, cells: np.ndarray, pts: np.ndarray) -> np.ndarray:
        lam = barycentric(self.mesh, cells, pts)
        return np.einsum("qi,qi->q", lam, self.coeffs[self.mesh.cells[cells]])


def interpolate(mesh: Mesh, dofmap: DofMap, v) -> FeFunction:
    """Nodal interpolant of a callable ``v(points) -> values``."""
    return FeFunction(np.asarray(v(mesh.points), dtype=complex), dofmap)


@dataclass(eq=False)
class AssembledForms:
    """Stiffness, mass and auxiliary mass matrices of one mesh."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    M_obstacle: sp.csr_matrix
    M_boundary: sp.csr_matrix
    dofmap: DofMap


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(mesh.cells, 3, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _local_mass(mesh: Mesh, quad: CellQuadrature, weight=None) -> np.ndarray:
    lam = barycentric(mesh, quad.cell, quad.points)
    w = quad.weights if weight is None else quad.weights * weight
    contrib = w[:, None, None] * lam[:, :, None] * lam[:, None, :]
    out = np.zeros((mesh.n_cells, 3, 3), dtype=contrib.dtype)
    np.add.at(out, quad.cell, contrib)
    return out


def boundary_mass(mesh: Mesh, n_gauss: int = 6) -> sp.csr_matrix:
    """``(phi_j, phi_i)_{S_R}`` with shape functions restricted to the exact arcs."""
    c = mesh.curved
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    t0, t1 = mesh.arcs[c, 0], mesh.arcs[c, 1]
    half = 0.5 * (t1 - t0)
    th = 0.5 * (t0 + t1)[:, None] + half[:, None] * x
    pts = mesh.R * np.stack([np.cos(th), np.sin(th)], axis=-1).reshape(-1, 2)
    ww = (mesh.R * half[:, None] * w).ravel()
    cells = np.repeat(c, n_gauss)
    lam = barycentric(mesh, cells, pts)
    contrib = ww[:, None, None] * lam[:, :, None] * lam[:, None, :]
    local = np.zeros((mesh.n_cells, 3, 3))
    np.add.at(local, cells, contrib)
    return _scatter(mesh, local)


def assemble_forms(mesh: Mesh, dofmap: DofMap | None = None) -> AssembledForms:
    dofmap = dofmap or DofMap(mesh)
    quad = mesh_quadrature(mesh)
    area = np.bincount(quad.cell, weights=quad.weights, minlength=mesh.n_cells)
    _, _, grads = _affine(mesh)
    kloc = area[:, None, None] * np.einsum("cid,cjd->cij", grads, grads)
    mloc = _local_mass(mesh, quad)
    K = _scatter(mesh, kloc)
    M = _scatter(mesh, mloc)
    obst = (mesh.region == OBSTACLE)[:, None, None]
    M_obs = _scatter(mesh, np.where(obst, mloc, 0.0))
    return AssembledForms(K.astype(complex), M.astype(complex), M_obs.astype(complex),
                          boundary_mass(mesh).astype(complex), dofmap)


def _qform(A, x) -> float:
    return float(np.real(np.vdot(x, A @ x)))


def norm_L2(f, forms: AssembledForms) -> float:
    x = f.coeffs if isinstance(f, FeFunction) else np.asarray(f)
    return float(np.sqrt(max(_qform(forms.M, x), 0.0)))


def seminorm_H1(f, forms: AssembledForms) -> float:
    x = f.coeffs if isinstance(f, FeFunction) else np.asarray(f)
    return float(np.sqrt(max(_qform(forms.K, x), 0.0)))


def norm_V(f, forms: AssembledForms) -> float:
    return norm_V_kappa(f, forms, 1.0)


def norm_V_kappa(f, forms: AssembledForms, kappa: float) -> float:
    """``sqrt(|f|_1^2 + kappa^2 ||f||_0^2)``."""
    x = f.coeffs if isinstance(f, FeFunction) else np.asarray(f)
    return float(np.sqrt(max(_qform(forms.K, x) + kappa**2 * _qform(forms.M, x), 0.0)))


def cell_gradients(f: FeFunction) -> np.ndarray:
    _, _, grads = _affine(f.mesh)
    return np.einsum("cid,ci->cd", grads, f.coeffs[f.mesh.cells])


def error_norms(f: FeFunction, exact, exact_grad, kappa: float = 1.0,
                quad: CellQuadrature | None = None) -> dict:
    """L2, H1-seminorm, H1 and kappa-weighted errors of ``f`` against a smooth field."""
    mesh = f.mesh
    quad = quad or mesh_quadrature(mesh)
    diff = f(quad.cell, quad.points) - exact(quad.points)
    gdiff = cell_gradients(f)[quad.cell] - exact_grad(quad.points)
    l2sq = float(np.sum(quad.weights * np.abs(diff) ** 2))
    h1sq = float(np.sum(quad.weights * np.sum(np.abs(gdiff) ** 2, axis=1)))
    return {
        "L2": np.sqrt(l2sq),
        "H1_semi": np.sqrt(h1sq),
        "H1": np.sqrt(l2sq + h1sq),
        "Vkappa": np.sqrt(h1sq + kappa**2 * l2sq),
    }


def best_approximation(forms: AssembledForms, exact, exact_grad, kappa: float,
                       quad: CellQuadrature | None = None) -> FeFunction:
    """``||.||_{V,kappa}``-orthogonal projection of a smooth field onto the P1 space."""
    mesh = forms.dofmap.mesh
    quad = quad or mesh_quadrature(mesh)
    lam = barycentric(mesh, quad.cell, quad.points)
    _, _, grads = _affine(mesh)
    u = exact(quad.points)
    gu = exact_grad(quad.points)
    # (grad u, grad phi_i) + kappa^2 (u, phi_i) per quadrature point and local dof
    local = np.einsum("qd,qid->qi", gu, grads[quad.cell]) + kappa**2 * u[:, None] * lam
    local *= quad.weights[:, None]
    dofs = mesh.cells[quad.cell].ravel()
    n = forms.dofmap.n_dofs
    rhs = np.bincount(dofs, local.real.ravel(), n) + 1j * np.bincount(dofs, local.imag.ravel(), n)
    G = (forms.K + kappa**2 * forms.M).tocsc()
    return FeFunction(spla.spsolve(G, rhs), forms.dofmap)


def _arc_owner(mesh: Mesh, theta: np.ndarray) -> np.ndarray:
    c = mesh.curved
    starts = mesh.arcs[c, 0]
    order = np.argsort(starts)
    starts = starts[order]
    ends = mesh.arcs[c, 1][order]
    t = np.mod(theta - starts[0], TWO_PI) + starts[0]
    k = np.searchsorted(starts, t, side="right") - 1
    if np.any(k < 0) or np.any(t > ends[k] + 1e-12):
        raise ValueError("boundary arcs do not cover S_R")
    return c[order][k]


def trace_sampling_matrix(mesh: Mesh, n_samples: int) -> sp.csr_matrix:
    """Sparse ``S`` with ``S @ coeffs`` the field at ``R (cos t_j, sin t_j)``, ``t_j = 2 pi j / M``."""
    theta = TWO_PI * np.arange(n_samples) / n_samples
    owner = _arc_owner(mesh, theta)
    pts = mesh.R * np.column_stack([np.cos(theta), np.sin(theta)])
    lam = barycentric(mesh, owner, pts)
    rows = np.repeat(np.arange(n_samples), 3)
    return sp.csr_matrix((lam.ravel(), (rows, mesh.cells[owner].ravel())),
                         shape=(n_samples, mesh.n_vertices))


def boundary_trace_samples(f: FeFunction, mesh: Mesh, n_samples: int) -> np.ndarray:
    """Trace of ``f`` at ``n_samples`` equispaced angles, each taken from its owning curved cell."""
    n_arcs = len(mesh.curved)
    if n_samples < 4 * n_arcs:
        raise ValueError(f"need at least {4 * n_arcs} samples for {n_arcs} boundary arcs")
    return trace_sampling_matrix(mesh, n_samples) @ f.coeffs


def write_function(f: FeFunction, path) -> None:
    with open(path, "w") as fh:
        for i, z in enumerate(f.coeffs):
            fh.write(f"{i} {float(z.real)!r} {float(z.imag)!r}\n")


def read_function(path, dofmap: DofMap) -> FeFunction:
    data = np.loadtxt(path, ndmin=2)
    coeffs = np.zeros(dofmap.n_dofs, dtype=complex)
    coeffs[data[:, 0].astype(int)] = data[:, 1] + 1j * data[:, 2]
    return FeFunction(coeffs, dofmap)


def prolongate(fine: Mesh, coarse_coeffs: np.ndarray) -> np.ndarray:
    """Coarse P1 field at the vertices of ``refine(coarse)`` (edge midpoint averaging)."""
    if fine.parents is None:
        raise ValueError("mesh carries no refinement parents")
    return 0.5 * (coarse_coeffs[fine.parents[:, 0]] + coarse_coeffs[fine.parents[:, 1]])


def prolongation_matrix(fine: Mesh, n_coarse: int) -> sp.csr_matrix:
    """Sparse form of :func:`prolongate`, shape ``(n_fine, n_coarse)``."""
    if fine.parents is None:
        raise ValueError("mesh carries no refinement parents")
    rows = np.repeat(np.arange(fine.n_vertices), 2)
    return sp.csr_matrix((np.full(rows.size, 0.5), (rows, fine.parents.ravel())),
                         shape=(fine.n_vertices, n_coarse))
