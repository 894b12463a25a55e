import math

import numpy as np
import pytest
from scipy import special

from dtnfem.dtn import SQRT_2PI
from dtnfem.femspace import FeFunction, norm_V
from dtnfem.kernels import WaveContext, Zn
from dtnfem.mesh import ObstacleSpec
from dtnfem.solver import (
    ContrastModel,
    IncidentField,
    NoContraction,
    ProblemData,
    SourceModel,
    assemble_incident_rhs,
    assemble_source_rhs,
    assemble_system,
    estimate_infsup,
    fixed_point_solve,
    incident_trace_coeffs,
    infsup_constant,
    solve_adjoint,
    solve_linear,
)


@pytest.fixture(scope="module")
def data(ctx, fine_mesh, fine_forms):
    return ProblemData.build(ctx, fine_mesh, ContrastModel(2.0), forms=fine_forms)


@pytest.fixture(scope="module")
def system(data):
    return assemble_system(data)


@pytest.fixture(scope="module")
def coarse(disk_mesh):
    ctx = WaveContext(2.0, 1.0, 8)
    return ProblemData.build(ctx, disk_mesh)


def test_constant_action(coarse):
    s = assemble_system(coarse)
    one = np.ones(s.n)
    expected = -4 * math.pi - 2 * math.pi * Zn(0, 2.0)
    assert np.vdot(one, s.matvec(one)) == pytest.approx(expected, rel=1e-8)


def test_non_hermitian(coarse):
    A = assemble_system(coarse).dense()
    assert np.abs(A - A.conj().T).max() > 1e-3


def test_rank_of_truncation_correction(coarse):
    s0 = assemble_system(coarse.with_order(0))
    s4 = assemble_system(coarse.with_order(4))
    assert s0.factor_shapes[0] == 1 and s4.factor_shapes[0] == 9
    diff = s4.dense() - s0.dense()
    assert np.linalg.matrix_rank(diff, tol=1e-10 * np.abs(diff).max()) <= 9


def test_zero_rhs(system):
    u, rep = solve_linear(system, np.zeros(system.n))
    assert not np.any(u.coeffs)


def test_residual(system, data):
    u, rep = solve_linear(system, assemble_incident_rhs(data))
    assert rep.residual <= 1e-10
    with pytest.raises(ValueError):
        solve_linear(system, np.zeros(3))


def test_zero_amplitude(ctx, fine_mesh, fine_forms):
    d = ProblemData.build(ctx, fine_mesh, forms=fine_forms, incident=IncidentField(0.0, 0.0))
    assert not np.any(assemble_incident_rhs(d))


def test_incident_coefficients(data):
    value, deriv = incident_trace_coeffs(data, 24)
    n = value.modes
    assert np.max(np.abs(value.coeffs - SQRT_2PI * 1j**n * special.jv(n, 2.0))) <= 1e-10
    assert np.max(np.abs(deriv.coeffs - SQRT_2PI * 1j**n * 2.0 * special.jvp(n, 2.0))) <= 1e-10


def test_incident_rhs_decays_in_N(data):
    ref = assemble_incident_rhs(data.with_order(128))
    gaps = [np.linalg.norm(assemble_incident_rhs(data.with_order(N)) - ref) for N in (2, 4, 8, 16, 32)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_adjoint_duality(system, data, rng):
    n = system.n
    for _ in range(3):
        f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        rhs = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        w = solve_adjoint(system, FeFunction(f, data.dofmap))
        u, _ = solve_linear(system, rhs)
        lhs = np.vdot(f, data.forms.M @ u.coeffs)
        assert lhs == pytest.approx(np.vdot(w.coeffs, rhs), rel=1e-9)


def test_adjoint_equals_conjugate_kernel(system, data, rng):
    b = rng.standard_normal(system.n) + 1j * rng.standard_normal(system.n)
    x1 = system.solve(b, adjoint=True)
    x2 = assemble_system(data, kernel="adjoint").solve(b)
    assert np.max(np.abs(x1 - x2)) <= 1e-11 * max(1.0, np.max(np.abs(x1)))


def test_adjoint_zero(system, data):
    w = solve_adjoint(system, np.zeros(system.n))
    assert not np.any(w.coeffs)


def test_fixed_point_linear_matches_direct(system, data):
    u, rep = fixed_point_solve(data, system=system)
    direct, _ = solve_linear(system, assemble_incident_rhs(data))
    assert rep.iterations == 1
    assert np.max(np.abs(u.coeffs - direct.coeffs)) <= 1e-12 * np.max(np.abs(direct.coeffs))


def test_fixed_point_kerr(ctx, fine_mesh, fine_forms):
    d = ProblemData.build(ctx, fine_mesh, ContrastModel(2.0, 1e-3), forms=fine_forms)
    u, rep = fixed_point_solve(d, tol=1e-10)
    assert rep.iterations <= 25
    assert np.all(rep.contraction_estimates < 1)
    assert np.all(rep.increments > 0)
    assert rep.rho_monitor == pytest.approx(norm_V(u, fine_forms))
    assert rep.residual <= 1e-10


def test_fixed_point_strong_nonlinearity(ctx, fine_mesh, fine_forms):
    d = ProblemData.build(ctx, fine_mesh, ContrastModel(2.0, 10.0), forms=fine_forms)
    with pytest.raises(NoContraction) as info:
        fixed_point_solve(d)
    assert info.value.report is not None


def test_fixed_point_tol_validation(data):
    with pytest.raises(ValueError):
        fixed_point_solve(data, tol=0)


def test_contrast_model():
    with pytest.raises(ValueError):
        ContrastModel(1.0, -1.0)
    assert ContrastModel(2.0).kind == "linear_constant"
    assert ContrastModel(2.0, 0.1).kind == "kerr"


def test_source_rhs(ctx, fine_mesh, fine_forms):
    d = ProblemData.build(ctx, fine_mesh, forms=fine_forms, source=SourceModel(lambda x: np.ones(len(x))))
    rhs = assemble_source_rhs(d)
    # (1, 1)_Omega equals the polygonal obstacle area
    obstacle = fine_mesh.cell_areas()[fine_mesh.region == 0].sum()
    assert rhs.sum() == pytest.approx(obstacle, rel=1e-12)


def test_problem_data_consistency(ctx, fine_mesh, disk_mesh, fine_forms):
    d = ProblemData.build(ctx, fine_mesh, forms=fine_forms)
    with pytest.raises(ValueError):
        ProblemData(ctx, disk_mesh, fine_forms, d.dtn)


def test_from_obstacle(ctx):
    d = ProblemData.from_obstacle(ctx, ObstacleSpec.disk(0.4, c_lin=3.0), 0.25)
    assert d.contrast.c_lin == 3.0


def test_infsup_phase_invariance(coarse):
    s = assemble_system(coarse)
    G = (coarse.forms.K + 4 * coarse.forms.M).toarray()
    A = s.dense()
    b = infsup_constant(A, G)
    assert b > 0
    assert infsup_constant(np.exp(0.7j) * A, G) == pytest.approx(b, abs=1e-12)
    assert estimate_infsup(s, coarse.forms, 2.0) == pytest.approx(b, rel=1e-14)


def test_infsup_cap(coarse):
    with pytest.raises(ValueError):
        estimate_infsup(assemble_system(coarse), coarse.forms, 2.0, cap=10)


def test_infsup_matches_generalized_svd(coarse):
    # smallest sqrt eigenvalue of G^{-1} A^H G^{-1} A
    import scipy.linalg as la
    s = assemble_system(coarse)
    G = (coarse.forms.K + 4 * coarse.forms.M).toarray().real
    A = s.dense()
    ev = la.eigvals(np.linalg.solve(G, A.conj().T) @ np.linalg.solve(G, A))
    assert estimate_infsup(s, coarse.forms, 2.0) == pytest.approx(math.sqrt(np.min(ev.real)), rel=1e-8)
