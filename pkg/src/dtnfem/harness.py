"""Study runners and the ``run`` entry point behind the command line.

Every study returns a :class:`StudyResult`; :func:`run` validates the
configuration, dispatches on ``study.mode`` and writes ``result.csv``,
``result.json`` and (optionally) mesh and solution dumps into the output
directory.

CSV column order is fixed (:data:`CSV_COLUMNS`).  Columns that do not apply to
a study are left empty; ``wallclock_ms`` is written as 0 unless
``output.timing`` is set, so repeated runs produce identical files.  The JSON
file always carries the measured wall clock.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from . import config as cfgmod
from .config import ConfigError, config_hash, obstacle_spec
from .femspace import (
    FeFunction,
    error_norms,
    norm_L2,
    norm_V,
    norm_V_kappa,
    prolongation_matrix,
    write_function,
)
from .kernels import KernelDomainError, WaveContext, verify_kernels
from .mesh import GeometryError, Mesh, ResolutionError, build_mesh, refine, write_mesh
from .oracle import ResonanceError, mie_disk_solve
from .solver import (
    ContrastModel,
    IncidentField,
    NoContraction,
    ProblemData,
    SolverError,
    assemble_system,
    estimate_infsup,
    fixed_point_solve,
    solve_adjoint,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("h", "N", "n_dofs", "err_L2", "err_H1", "err_Vkappa", "rate_L2", "rate_H1",
               "iterations", "beta_h", "wallclock_ms", "config_hash")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3


@dataclass
class StudyResult:
    mode: str
    rows: list[dict] = field(default_factory=list)
    details: dict = field(default_factory=dict)
    solution: FeFunction | None = None
    passed: bool = True

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r.get(name) is None else r[name] for r in self.rows], dtype=float)

    def add_rates(self) -> None:
        """``rate = log2(e_{k-1} / e_k)`` between successive rows."""
        for key, col in (("rate_L2", "err_L2"), ("rate_H1", "err_H1")):
            prev = None
            for r in self.rows:
                e = r.get(col)
                r[key] = math.log2(prev / e) if prev and e else None
                prev = e


# ---------------------------------------------------------------------------
# problem construction


def wave_context(cfg: dict, N: int | None = None) -> WaveContext:
    w = cfg["wave"]
    return WaveContext(float(w["kappa"]), float(w["R"]), int(w["N"] if N is None else N))


def incident_field(cfg: dict) -> IncidentField:
    inc = cfg["incident"]
    amp = inc["amplitude"]
    amp = complex(*amp) if isinstance(amp, list) else complex(amp)
    return IncidentField(float(inc["theta_d"]), amp)


def mesh_levels(cfg: dict) -> list[Mesh]:
    ctx = wave_context(cfg)
    meshes = [build_mesh(ctx, obstacle_spec(cfg), cfg["mesh"]["h_target"])]
    for _ in range(cfg["mesh"]["refinements"]):
        meshes.append(refine(meshes[-1]))
    return meshes


def problem(cfg: dict, mesh: Mesh, N: int | None = None, **kw) -> ProblemData:
    obs = cfg["obstacle"]
    return ProblemData.build(wave_context(cfg, N), mesh, ContrastModel(obs["c_lin"], obs["epsilon"]),
                             incident=incident_field(cfg), **kw)


def series_reference(cfg: dict):
    """Separable reference solution when one exists (concentric disk, linear, no source)."""
    obs = cfg["obstacle"]
    if obs["type"] != "disk" or obs["epsilon"] != 0 or any(obs["center"]):
        return None
    w, inc = cfg["wave"], incident_field(cfg)
    return mie_disk_solve(w["kappa"], obs["radius"], obs["c_lin"], inc.theta_d, R=w["R"],
                          amplitude=inc.amplitude)


def _row(mesh: Mesh, N: int, n_dofs: int, **values) -> dict:
    row = {"h": mesh.h, "N": N, "n_dofs": n_dofs}
    row.update(values)
    return row


# ---------------------------------------------------------------------------
# studies


def study_solve(cfg: dict) -> StudyResult:
    mesh = mesh_levels(cfg)[-1]
    data = problem(cfg, mesh)
    u, report = fixed_point_solve(data, cfg["solver"]["tol"], cfg["solver"]["max_iter"])
    row = _row(mesh, data.ctx.N, data.dofmap.n_dofs, iterations=report.iterations)
    ref = series_reference(cfg)
    if ref is not None:
        e = error_norms(u, ref, ref.gradient, data.ctx.kappa)
        row.update(err_L2=e["L2"], err_H1=e["H1"], err_Vkappa=e["Vkappa"])
    return StudyResult("solve", [row], {"report": report.as_dict(), "reference": ref is not None}, u)


def study_converge_h(cfg: dict) -> StudyResult:
    """Errors over the refinement hierarchy.

    With a separable reference the errors are exact; otherwise the finest level
    serves as reference and coarse solutions are prolongated onto it.
    """
    meshes = mesh_levels(cfg)
    ref = series_reference(cfg)
    kappa = cfg["wave"]["kappa"]
    sols, reports = [], []
    for mesh in meshes:
        data = problem(cfg, mesh)
        u, rep = fixed_point_solve(data, cfg["solver"]["tol"], cfg["solver"]["max_iter"])
        sols.append((data, u))
        reports.append(rep)
    result = StudyResult("converge_h", details={"reference": "series" if ref else "finest level"})
    if ref is None:
        fine_data, fine_u = sols[-1]
        forms = fine_data.forms
    for k, ((data, u), rep) in enumerate(zip(sols, reports)):
        row = _row(data.mesh, data.ctx.N, data.dofmap.n_dofs, iterations=rep.iterations)
        if ref is not None:
            e = error_norms(u, ref, ref.gradient, kappa)
            row.update(err_L2=e["L2"], err_H1=e["H1"], err_Vkappa=e["Vkappa"])
        elif k < len(sols) - 1:
            x = u.coeffs
            for j in range(k + 1, len(sols)):
                x = prolongation_matrix(sols[j][0].mesh, len(x)) @ x
            d = x - fine_u.coeffs
            row.update(err_L2=norm_L2(d, forms), err_H1=norm_V(d, forms), err_Vkappa=norm_V_kappa(d, forms, kappa))
        result.rows.append(row)
    result.add_rates()
    result.details["reports"] = [r.as_dict() for r in reports]
    result.solution = sols[-1][1]
    return result


def study_converge_N(cfg: dict) -> StudyResult:
    """Truncation error ``e(N) = ||u_{h,N} - u_{h,N_ref}||`` on a fixed mesh."""
    study = cfg["study"]
    kappa, R = cfg["wave"]["kappa"], cfg["wave"]["R"]
    n_list = study.get("N_list") or [n for n in (2, 4, 8, 16, 32) if n < study["N_ref"]]
    mesh = mesh_levels(cfg)[-1]
    ref_data = problem(cfg, mesh, study["N_ref"])
    tol, it = cfg["solver"]["tol"], cfg["solver"]["max_iter"]
    u_ref, _ = fixed_point_solve(ref_data, tol, it)
    forms = ref_data.forms
    result = StudyResult("converge_N")
    for N in n_list:
        data = ref_data.with_order(N)
        u, rep = fixed_point_solve(data, tol, it)
        d = u.coeffs - u_ref.coeffs
        result.rows.append(_row(mesh, N, data.dofmap.n_dofs, err_L2=norm_L2(d, forms), err_H1=norm_V(d, forms),
                                err_Vkappa=norm_V_kappa(d, forms, kappa), iterations=rep.iterations))
    ns = np.array(n_list, dtype=float)
    e = result.column("err_H1")
    n0 = math.ceil(kappa * R)
    tail = (ns >= n0) & (e > 0)
    slope = float(np.polyfit(np.log(ns[tail]), np.log(e[tail]), 1)[0]) if tail.sum() >= 2 else None
    result.details.update(
        N_ref=study["N_ref"],
        n_samples_dtn=ref_data.dtn.n_samples,
        N_threshold=n0,
        fitted_slope=slope,
        reference_slope=-1.0,
        reference_curve=[float(e[0] * math.sqrt((1 + ns[0] ** 2) / (1 + n**2))) for n in ns],
        monotone=bool(np.all(np.diff(e[ns >= n0]) < 0)),
    )
    result.solution = u_ref
    return result


def study_verify_kernels(cfg: dict) -> StudyResult:
    checks = verify_kernels()
    table = [{"check": c.name, "value": c.value, "tolerance": c.tolerance, "passed": c.passed} for c in checks]
    return StudyResult("verify_kernels", [], {"checks": table}, passed=all(c.passed for c in checks))


def study_infsup(cfg: dict) -> StudyResult:
    """Discrete inf-sup constant of the truncated form for each order in ``N_list``."""
    study = cfg["study"]
    mesh = mesh_levels(cfg)[-1]
    base = problem(cfg, mesh)
    kappa = base.ctx.kappa
    result = StudyResult("infsup")
    for N in study.get("N_list") or [base.ctx.N]:
        data = base.with_order(N)
        beta = estimate_infsup(assemble_system(data), data.forms, kappa, study["dense_cap"])
        result.rows.append(_row(mesh, N, data.dofmap.n_dofs, beta_h=beta))
    return result


def band_limited_field(mesh: Mesh, rng: np.random.Generator, modes: int = 3) -> np.ndarray:
    """Nodal values of a random trigonometric polynomial of degree ``modes`` in each direction."""
    k = np.arange(-modes, modes + 1)
    c = rng.standard_normal((k.size, k.size)) + 1j * rng.standard_normal((k.size, k.size))
    x = mesh.points / mesh.R
    ex = np.exp(1j * np.pi * np.outer(x[:, 0], k))
    ey = np.exp(1j * np.pi * np.outer(x[:, 1], k))
    return np.einsum("pj,jk,pk->p", ex, c, ey)


def eta_ratio(coarse: ProblemData, fine: ProblemData, f_fine: np.ndarray) -> tuple[float, float]:
    """Approximation ratio of the adjoint solution for one right-hand side.

    Returns ``(probe, galerkin)``: ``probe`` is the ``V``-distance from the
    fine-mesh adjoint solution to the prolongated coarse space divided by
    ``||f||_{L2}``; ``galerkin`` uses the coarse adjoint solution itself in
    place of the best approximation and therefore bounds ``probe`` from above.
    """
    P = prolongation_matrix(fine.mesh, coarse.dofmap.n_dofs)
    w_fine = solve_adjoint(assemble_system(fine), f_fine).coeffs
    # refinement keeps the coarse vertex numbering, so restriction is a slice
    f_coarse = f_fine[: coarse.dofmap.n_dofs]
    w_coarse = solve_adjoint(assemble_system(coarse), f_coarse).coeffs
    G = (fine.forms.K + fine.forms.M).tocsc()
    c = spla.spsolve((P.T @ G @ P).tocsc(), P.T @ (G @ w_fine))
    f_norm = norm_L2(f_fine, fine.forms)
    probe = norm_V(w_fine - P @ c, fine.forms) / f_norm
    galerkin = norm_V(w_fine - P @ w_coarse, fine.forms) / f_norm
    return probe, galerkin


def study_eta_probe(cfg: dict, seed: int = 0) -> StudyResult:
    """Empirical lower bound for the adjoint approximation property, per mesh level.

    For each level the fine reference is the next refinement; the reported
    value is the maximum ratio over ``n_samples`` random right-hand sides.
    It is a lower bound probe, not the supremum itself.
    """
    n_samples = cfg["study"]["n_samples"]
    rng = np.random.default_rng(seed)
    meshes = mesh_levels(cfg)
    meshes.append(refine(meshes[-1]))
    datas = [problem(cfg, m) for m in meshes]
    result = StudyResult("eta_probe", details={"seed": seed, "n_samples": n_samples,
                                                "label": "lower bound probe (max over samples)"})
    fields = [band_limited_field(meshes[-1], rng) for _ in range(n_samples)]
    probes, upper = [], []
    for k in range(len(meshes) - 1):
        ratios = [eta_ratio(datas[k], datas[k + 1], f[: meshes[k + 1].n_vertices]) for f in fields]
        p = max(r[0] for r in ratios)
        probes.append(p)
        upper.append(max(r[1] for r in ratios))
        result.rows.append(_row(meshes[k], datas[k].ctx.N, datas[k].dofmap.n_dofs))
    result.details.update(eta_lower_bound=probes, galerkin_ratio=upper)
    return result


STUDIES = {
    "solve": study_solve,
    "converge_h": study_converge_h,
    "converge_N": study_converge_N,
    "verify_kernels": study_verify_kernels,
    "infsup": study_infsup,
    "eta_probe": study_eta_probe,
}


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(result: StudyResult, path, chash: str, timing: bool, wallclock_ms: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in result.rows:
            r = dict(r, wallclock_ms=int(round(wallclock_ms)) if timing else 0, config_hash=chash)
            w.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        obj = float(obj)
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_outputs(result: StudyResult, cfg: dict, out: Path, seed: int, wallclock_ms: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    formats = cfg["output"]["formats"]
    chash = config_hash(cfg)
    if "csv" in formats:
        write_csv(result, out / "result.csv", chash, cfg["output"]["timing"], wallclock_ms)
    if "json" in formats:
        doc = {"mode": result.mode, "config_hash": chash, "seed": seed, "passed": result.passed,
               "wallclock_ms": wallclock_ms, "columns": list(CSV_COLUMNS), "rows": result.rows,
               "details": result.details, "config": cfg}
        (out / "result.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    if "dumps" in formats and result.solution is not None:
        write_mesh(result.solution.mesh, out / "mesh.txt")
        write_function(result.solution, out / "solution.txt")


def run(config_path, out_dir=None, mode: str | None = None, seed: int = 0, environ=None) -> int:
    """Validate, run and write one study.  Returns the process exit code."""
    try:
        cfg = cfgmod.load_config(config_path, environ)
        if mode is not None:
            cfg["study"]["mode"] = mode
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_INVALID
    out = Path(out_dir if out_dir is not None else cfg["output"]["dir"])
    mode = cfg["study"]["mode"]
    t0 = time.perf_counter()
    try:
        if mode == "eta_probe":
            result = study_eta_probe(cfg, seed)
        else:
            result = STUDIES[mode](cfg)
    except (GeometryError, ResolutionError, KernelDomainError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_INVALID
    except NoContraction as exc:
        log.error("solver error: %s", exc)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"mode": mode, "status": "no_contraction", "message": str(exc),
               "report": exc.report.as_dict() if exc.report else None}
        (out / "result.json").write_text(json.dumps(_jsonable(doc), indent=2) + "\n")
        return EXIT_SOLVER
    except (SolverError, ResonanceError) as exc:
        log.error("solver error: %s", exc)
        return EXIT_SOLVER
    wall = (time.perf_counter() - t0) * 1e3
    write_outputs(result, cfg, out, seed, wall)
    if mode == "verify_kernels":
        for c in result.details["checks"]:
            log.info("%-40s %.3e <= %.1e  %s", c["check"], c["value"], c["tolerance"],
                     "pass" if c["passed"] else "FAIL")
    log.info("%s finished in %.1f ms, results in %s", mode, wall, out)
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED
