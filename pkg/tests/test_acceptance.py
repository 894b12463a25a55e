"""Acceptance suite: ten criteria, each with its tolerance and runtime budget.

Every test prints a single ``[PASS]``/``[FAIL]`` line; the terminal summary
repeats them in criterion order.
"""
import math
import time

import numpy as np
import pytest

from dtnfem import config as cfgmod
from dtnfem.config import validate
from dtnfem.dtn import (
    FourierTrace,
    adjoint_apply,
    apply_dtn,
    apply_dtn_3d_series,
    sobolev_sphere_norm,
    sobolev_trace_norm,
    sphere_mask,
    sphere_pairing,
    trace_pairing,
    truncation_gap_constant,
)
from dtnfem.femspace import (
    DofMap,
    assemble_forms,
    best_approximation,
    error_norms,
    interpolate,
    mesh_quadrature,
)
from dtnfem.harness import mesh_levels, problem, series_reference, study_converge_N
from dtnfem.kernels import KernelTable, WaveContext, Zn, wronskian_residual, zn
from dtnfem.mesh import ObstacleSpec, build_mesh, refine
from dtnfem.solver import (
    ContrastModel,
    NoContraction,
    ProblemData,
    assemble_incident_rhs,
    assemble_system,
    estimate_infsup,
    fixed_point_solve,
    infsup_constant,
    solve_linear,
)

XIS = (0.5, 2.0, 4.0, 10.0)


def _sin_cos(x):
    return np.sin(x[:, 0]) * np.cos(x[:, 1])


def _sin_cos_grad(x):
    return np.column_stack([np.cos(x[:, 0]) * np.cos(x[:, 1]), -np.sin(x[:, 0]) * np.sin(x[:, 1])])


def test_c01_kernel_suite(criterion):
    t0 = time.perf_counter()
    sym = all(Zn(-n, xi) == Zn(n, xi) for xi in XIS for n in range(201))
    b2 = max(KernelTable.build(2, xi, 200).bound_ratio().max() for xi in XIS)
    b3 = max(KernelTable.build(3, xi, 200).bound_ratio().max() for xi in XIS)
    z0 = max(abs(zn(0, xi) - (1j * xi - 1)) for xi in XIS + (1.0, 5.0))
    wr = max(wronskian_residual(n, x) for n in range(51) for x in np.linspace(0.1, 50, 40))
    dt = time.perf_counter() - t0
    criterion(1, "kernel suite", {
        "Z_{-n} == Z_n": sym,
        "2D bound": b2 <= 1.0,
        "3D bound": b3 <= 1.0,
        "z_0 closed form": z0 <= 1e-13,
        "Wronskian": wr <= 1e-11,
        "runtime < 5 s": dt < 5,
    }, f"max ratios {b2:.4f}/{b3:.4f}, z0 err {z0:.1e}, Wronskian {wr:.1e}, {dt:.2f} s")


def test_c02_geometry_suite(criterion):
    t0 = time.perf_counter()
    ctx = WaveContext(2.0, 1.0, 16)
    worst = dict(area=0.0, arcs=0.0, fit=0.0)
    matching = containment = partition = True
    for obstacle in (ObstacleSpec.disk(0.4), ObstacleSpec((0.05, -0.03), (0.4, 0.06, 0.0, 0.03), (0.0, 0.04))):
        m = build_mesh(ctx, obstacle, 0.25)
        for level in range(4):
            worst["area"] = max(worst["area"], abs(m.cell_areas().sum() - math.pi * m.R**2) / (math.pi * m.R**2))
            worst["arcs"] = max(worst["arcs"], abs(m.arc_coverage() - 2 * math.pi))
            worst["fit"] = max(worst["fit"], m.fitting_error() / m.R)
            matching &= m.check_matching()
            partition &= m.check_arc_partition()
            containment &= all(bool(np.all(m.supersimplex_of(c).contains(m.arc_points(c, 64)))) for c in m.curved)
            if level < 3:
                m = refine(m)
    dt = time.perf_counter() - t0
    criterion(2, "geometry suite", {
        "area partition": worst["area"] <= 1e-12,
        "arc coverage": worst["arcs"] <= 1e-12 and partition,
        "fitting": worst["fit"] <= 1e-14,
        "matching": matching,
        "supersimplex containment": containment,
        "runtime < 10 s": dt < 10,
    }, f"area {worst['area']:.1e}, arcs {worst['arcs']:.1e}, fit {worst['fit']:.1e}, {dt:.2f} s")


def test_c03_interpolation_rates(criterion):
    t0 = time.perf_counter()
    m = build_mesh(WaveContext(2.0, 1.0, 16), ObstacleSpec.disk(0.5), 0.25)
    errs = []
    for level in range(4):
        errs.append(error_norms(interpolate(m, DofMap(m), _sin_cos), _sin_cos, _sin_cos_grad))
        if level < 3:
            m = refine(m)
    r_l2 = [math.log2(a["L2"] / b["L2"]) for a, b in zip(errs, errs[1:])]
    r_h1 = [math.log2(a["H1_semi"] / b["H1_semi"]) for a, b in zip(errs, errs[1:])]
    dt = time.perf_counter() - t0
    criterion(3, "interpolation rates", {
        "L2 rates within 2 +- 0.15": all(abs(r - 2) <= 0.15 for r in r_l2),
        "H1 rates within 1 +- 0.15": all(abs(r - 1) <= 0.15 for r in r_h1),
        "runtime < 30 s": dt < 30,
    }, f"L2 {[round(r, 3) for r in r_l2]}, H1 {[round(r, 3) for r in r_h1]}, {dt:.2f} s")


def test_c04_adjointness(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    ctx2 = WaveContext(2.0, 1.0, 16)
    ctx3 = WaveContext(2.0, 1.0, 12, dimension=3)
    worst2 = worst3 = 0.0
    for _ in range(50):
        n_f = 24
        w = FourierTrace(1.0, rng.standard_normal(2 * n_f + 1) + 1j * rng.standard_normal(2 * n_f + 1))
        v = FourierTrace(1.0, rng.standard_normal(2 * n_f + 1) + 1j * rng.standard_normal(2 * n_f + 1))
        gap = abs(trace_pairing(apply_dtn(w, ctx2), v) - trace_pairing(w, adjoint_apply(v, ctx2)))
        worst2 = max(worst2, gap / (sobolev_trace_norm(w, 0) * sobolev_trace_norm(v, 0)))
        shape = (15, 29)
        mask = sphere_mask(14)
        a = np.where(mask, rng.standard_normal(shape) + 1j * rng.standard_normal(shape), 0)
        b = np.where(mask, rng.standard_normal(shape) + 1j * rng.standard_normal(shape), 0)
        gap = abs(sphere_pairing(apply_dtn_3d_series(a, ctx3), b, 1.0)
                  - sphere_pairing(a, apply_dtn_3d_series(b, ctx3, adjoint=True), 1.0))
        worst3 = max(worst3, gap / (sobolev_sphere_norm(a, 1.0, 0) * sobolev_sphere_norm(b, 1.0, 0)))
    dt = time.perf_counter() - t0
    criterion(4, "adjointness", {
        "2D identity": worst2 <= 1e-12,
        "3D identity": worst3 <= 1e-12,
        "runtime < 5 s": dt < 5,
    }, f"2D {worst2:.1e}, 3D {worst3:.1e}, {dt:.2f} s")


def test_c05_truncation_gap(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    kappa, R, N_ref = 2.0, 1.0, 128
    ref = WaveContext(kappa, R, N_ref)
    n = np.arange(-N_ref, N_ref + 1)
    worst = 0.0
    for N in (4, 8, 16):
        ctx = WaveContext(kappa, R, N)
        for s in (0.5, 1.5):
            c = truncation_gap_constant(N, R, kappa, s)
            for decay in (0.0, 1.0, 2.0, 3.0):
                for _ in range(10):
                    scale = (1 + n**2) ** (-decay / 2)
                    w = FourierTrace(R, scale * (rng.standard_normal(n.size) + 1j * rng.standard_normal(n.size)))
                    v = FourierTrace(R, scale * (rng.standard_normal(n.size) + 1j * rng.standard_normal(n.size)))
                    lhs = abs(trace_pairing(apply_dtn(w, ref), v) - trace_pairing(apply_dtn(w, ctx), v))
                    worst = max(worst, lhs / (c * sobolev_trace_norm(w, s) * sobolev_trace_norm(v, 0.5)))
    dt = time.perf_counter() - t0
    criterion(5, "truncation gap", {
        "bound holds": worst <= 1.0,
        "runtime < 5 s": dt < 5,
    }, f"max lhs/bound {worst:.3f}, {dt:.2f} s")


@pytest.fixture(scope="module")
def linear_disk_levels():
    """Documented linear disk config solved on four levels."""
    cfg = validate(cfgmod.LINEAR_DISK)
    t0 = time.perf_counter()
    ref = series_reference(cfg)
    out = []
    for mesh in mesh_levels(cfg):
        data = problem(cfg, mesh)
        u, rep = solve_linear(assemble_system(data), assemble_incident_rhs(data))
        q = mesh_quadrature(mesh)
        err = error_norms(u, ref, ref.gradient, 2.0, q)
        best = error_norms(best_approximation(data.forms, ref, ref.gradient, 2.0, q), ref, ref.gradient, 2.0, q)
        out.append(dict(err=err, best=best, residual=rep.residual, n=data.dofmap.n_dofs))
    return out, time.perf_counter() - t0


def test_c06_oracle_convergence(criterion, linear_disk_levels):
    levels, dt = linear_disk_levels
    r_l2 = [math.log2(a["err"]["L2"] / b["err"]["L2"]) for a, b in zip(levels, levels[1:])]
    r_h1 = [math.log2(a["err"]["H1"] / b["err"]["H1"]) for a, b in zip(levels, levels[1:])]
    res = max(lv["residual"] for lv in levels)
    criterion(6, "oracle convergence", {
        "L2 rates within 2 +- 0.25": all(abs(r - 2) <= 0.25 for r in r_l2),
        "H1 rates within 1 +- 0.25": all(abs(r - 1) <= 0.25 for r in r_h1),
        "residual <= 1e-10": res <= 1e-10,
        "runtime < 2 min": dt < 120,
    }, f"L2 {[round(r, 3) for r in r_l2]}, H1 {[round(r, 3) for r in r_h1]}, residual {res:.1e}, {dt:.1f} s")


def test_c07_truncation_study(criterion):
    t0 = time.perf_counter()
    cfg = validate(cfgmod.TRUNCATION_STUDY)
    res = study_converge_N(cfg)
    e = res.column("err_H1")
    ns = np.array([r["N"] for r in res.rows])
    tail = ns >= math.ceil(cfg["wave"]["kappa"] * cfg["wave"]["R"])
    monotone = bool(np.all(np.diff(e[tail]) < 0))
    slope = res.details["fitted_slope"]
    dt = time.perf_counter() - t0
    criterion(7, "truncation study", {
        "e(N) decreasing": monotone,
        "slope <= -1": slope is not None and slope <= -1,
        "runtime < 2 min": dt < 120,
    }, f"e(N) {[f'{x:.3e}' for x in e]}, slope {slope:.3f}, {dt:.1f} s")


def test_c08_fixed_point(criterion):
    t0 = time.perf_counter()
    cfg = validate(cfgmod.KERR_DISK)
    mesh = mesh_levels(cfg)[-1]
    forms = assemble_forms(mesh)
    ctx = WaveContext(2.0, 1.0, 16)
    kerr = ProblemData.build(ctx, mesh, ContrastModel(2.0, 1e-3), forms=forms)
    u, rep = fixed_point_solve(kerr, tol=1e-10)
    lin = ProblemData.build(ctx, mesh, ContrastModel(2.0, 0.0), forms=forms)
    system = assemble_system(lin)
    u0, rep0 = fixed_point_solve(lin, tol=1e-10, system=system)
    direct, _ = solve_linear(system, assemble_incident_rhs(lin))
    lin_err = np.max(np.abs(u0.coeffs - direct.coeffs)) / np.max(np.abs(direct.coeffs))
    strong = ProblemData.build(ctx, mesh, ContrastModel(2.0, 10.0), forms=forms)
    try:
        fixed_point_solve(strong, tol=1e-10)
        raised = False
    except NoContraction:
        raised = True
    dt = time.perf_counter() - t0
    q = rep.contraction_estimates
    criterion(8, "nonlinear fixed point", {
        "eps=1e-3 contraction < 1": bool(np.all(q < 1)),
        "eps=1e-3 iterations <= 25": rep.iterations <= 25,
        "eps=0 matches linear": lin_err <= 1e-12,
        "eps=10 raises NoContraction": raised,
        "runtime < 2 min": dt < 120,
    }, f"{rep.iterations} iterations, max q {q.max():.2e}, eps=0 diff {lin_err:.1e}, {dt:.1f} s")


def test_c09_infsup(criterion):
    t0 = time.perf_counter()
    cfg = validate(cfgmod.INFSUP_COARSE)
    mesh = mesh_levels(cfg)[-1]
    base = problem(cfg, mesh)
    beta = {}
    for N in (8, 16, 32):
        data = base.with_order(N)
        beta[N] = estimate_infsup(assemble_system(data), data.forms, 2.0)
    A = assemble_system(base).dense()
    G = (base.forms.K + 4.0 * base.forms.M).toarray()
    phase = abs(infsup_constant(np.exp(1.234j) * A, G) - infsup_constant(A, G))
    change = abs(beta[16] - beta[32]) / beta[32]
    dt = time.perf_counter() - t0
    criterion(9, "inf-sup", {
        "beta_h > 0": beta[8] > 0,
        "N stability <= 5%": change <= 0.05,
        "phase invariance": phase <= 1e-12,
        "runtime < 1 min": dt < 60,
    }, f"beta {beta[8]:.5f}/{beta[16]:.5f}/{beta[32]:.5f} on {base.dofmap.n_dofs} dofs, {dt:.2f} s")


def test_c10_quasi_optimality(criterion, linear_disk_levels):
    levels, dt = linear_disk_levels
    ratios = [lv["err"]["Vkappa"] / lv["best"]["Vkappa"] for lv in levels]
    trend = np.polyfit(np.arange(len(ratios)), ratios, 1)[0]
    criterion(10, "quasi-optimality", {
        "ratio <= 30": max(ratios) <= 30,
        "non-increasing trend": trend <= 0,
        "runtime < 2 min": dt < 120,
    }, f"ratios {[round(float(r), 4) for r in ratios]}, {dt:.1f} s")
