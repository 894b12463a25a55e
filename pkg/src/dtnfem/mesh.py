"""Interface-fitted triangulations of the disk B_R with exact circular-arc cells.

The construction is ring based.  The obstacle is filled with concentric rings
of nodes scaled from its boundary curve down to a centre node; the annulus
between the obstacle polygon and the outer polygon is filled with rings that
blend the obstacle curve into the circle of radius R.  Neighbouring rings are
stitched by a merge over their angular parameters, which yields a conforming
mesh without any post-hoc repair.  Cells of the outermost strip having an edge
on the outer polygon keep their straight generator triangle but integrate over
the exact circular segment cut off by that edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

INTERIOR, OBSTACLE_BOUNDARY, OUTER_BOUNDARY = 0, 1, 2
TAG_NAMES = ("interior", "obstacle_boundary", "outer_boundary")
STRAIGHT, CURVED = 0, 1
KIND_NAMES = ("straight", "curved_boundary")
OBSTACLE, ANNULUS = 0, 1
REGION_NAMES = ("obstacle", "annulus")

TWO_PI = 2.0 * math.pi
# fraction of the annulus over which ring node counts grow to the boundary count;
# outside it the rings are rotationally periodic, which keeps spurious high
# harmonics out of the trace on S_R
_RAMP = 0.5


class GeometryError(ValueError):
    pass


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class ObstacleSpec:
    """Star-shaped obstacle ``center + r(theta) (cos theta, sin theta)``.

    ``r(theta) = a[0] + sum_k a[k] cos(k theta) + b[k-1] sin(k theta)``; a disk is
    ``ObstacleSpec.disk(radius)``.
    """

    center: tuple[float, float] = (0.0, 0.0)
    cos_coeffs: tuple[float, ...] = (0.5,)
    sin_coeffs: tuple[float, ...] = ()
    c_lin: float = 1.0
    epsilon: float = 0.0

    @classmethod
    def disk(cls, radius, center=(0.0, 0.0), c_lin=1.0, epsilon=0.0):
        return cls(tuple(map(float, center)), (float(radius),), (), float(c_lin), float(epsilon))

    @property
    def is_disk(self) -> bool:
        return all(c == 0 for c in self.cos_coeffs[1:]) and all(s == 0 for s in self.sin_coeffs)

    def radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.full_like(theta, self.cos_coeffs[0])
        for k, a in enumerate(self.cos_coeffs[1:], start=1):
            r = r + a * np.cos(k * theta)
        for k, b in enumerate(self.sin_coeffs, start=1):
            r = r + b * np.sin(k * theta)
        return r

    def point(self, theta, scale=1.0):
        theta = np.asarray(theta, dtype=float)
        r = scale * self.radius(theta)
        return np.stack([self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)], axis=-1)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d = pts - np.asarray(self.center)
        rho = np.hypot(d[:, 0], d[:, 1])
        return rho < self.radius(np.arctan2(d[:, 1], d[:, 0]))

    def circumradius(self, n=4096) -> float:
        p = self.point(np.linspace(0.0, TWO_PI, n, endpoint=False))
        return float(np.max(np.hypot(p[:, 0], p[:, 1])))

    def perimeter(self, n=4096) -> float:
        p = self.point(np.linspace(0.0, TWO_PI, n + 1))
        return float(np.sum(np.hypot(*np.diff(p, axis=0).T)))

    def validate(self, R: float) -> None:
        theta = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
        if np.min(self.radius(theta)) <= 0.0:
            raise GeometryError("obstacle curve is not star-shaped with respect to its center")
        if self.circumradius() >= 0.9 * R:
            raise GeometryError(
                f"obstacle circumradius {self.circumradius():.4g} must stay below 0.9 R = {0.9 * R:.4g}"
            )


@dataclass(frozen=True)
class Vertex:
    x: float
    y: float
    tag: str


@dataclass(frozen=True)
class CurvedEdge:
    theta_start: float
    theta_end: float
    endpoints: tuple[int, int]


@dataclass(frozen=True)
class Cell:
    vertex_ids: tuple[int, int, int]
    kind: str
    region: str
    arc: CurvedEdge | None = None


@dataclass(frozen=True)
class Supersimplex:
    generator_cell_id: int
    vertices: np.ndarray

    @property
    def area(self) -> float:
        return abs(_signed_area(self.vertices[None])[0])

    def contains(self, pts, tol=1e-12) -> np.ndarray:
        return _barycentric_inside(self.vertices, np.atleast_2d(pts), tol)


@dataclass(eq=False)
class Mesh:
    """Triangulation arrays.

    Curved cells are stored as ``(a, b, apex)`` with ``a``, ``b`` on S_R in
    counterclockwise order and ``apex`` the single vertex inside B_R; their arc
    runs from ``arcs[c, 0]`` to ``arcs[c, 1]`` (``arcs[c, 1] - arcs[c, 0]`` in
    ``(0, pi)``, the end may exceed 2 pi).  ``param`` holds the curve parameter of
    boundary vertices (angle on S_R, obstacle parameter on the interface) and
    NaN elsewhere.
    """

    points: np.ndarray
    tags: np.ndarray
    param: np.ndarray
    cells: np.ndarray
    kind: np.ndarray
    region: np.ndarray
    arcs: np.ndarray
    R: float
    kappa: float
    obstacle: ObstacleSpec
    parents: np.ndarray | None = field(default=None, repr=False)
    level: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def curved(self) -> np.ndarray:
        return np.flatnonzero(self.kind == CURVED)

    def vertex(self, i: int) -> Vertex:
        return Vertex(float(self.points[i, 0]), float(self.points[i, 1]), TAG_NAMES[self.tags[i]])

    def cell(self, c: int) -> Cell:
        arc = None
        if self.kind[c] == CURVED:
            arc = CurvedEdge(float(self.arcs[c, 0]), float(self.arcs[c, 1]),
                             (int(self.cells[c, 0]), int(self.cells[c, 1])))
        return Cell(tuple(int(v) for v in self.cells[c]), KIND_NAMES[self.kind[c]],
                    REGION_NAMES[self.region[c]], arc)

    def generator_areas(self) -> np.ndarray:
        return _signed_area(self.points[self.cells])

    def segment_areas(self) -> np.ndarray:
        """Area between chord and arc (zero for straight cells)."""
        out = np.zeros(self.n_cells)
        c = self.curved
        d = self.arcs[c, 1] - self.arcs[c, 0]
        out[c] = 0.5 * self.R**2 * (d - np.sin(d))
        return out

    def cell_areas(self) -> np.ndarray:
        return self.generator_areas() + self.segment_areas()

    def diameters(self) -> np.ndarray:
        p = self.points[self.cells]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.max(np.hypot(e[..., 0], e[..., 1]), axis=1)

    @property
    def h(self) -> float:
        return float(np.max(self.diameters()))

    @property
    def shape_ratio(self) -> float:
        p = self.points[self.cells]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        lengths = np.hypot(e[..., 0], e[..., 1])
        inradius = 2.0 * self.generator_areas() / lengths.sum(axis=1)
        return float(np.max(lengths.max(axis=1) / inradius))

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique sorted edges and, per cell, the edge index of its local edges (01, 12, 20)."""
        loc = self.cells[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
        flat = np.sort(loc.reshape(-1, 2), axis=1)
        uniq, inv = np.unique(flat, axis=0, return_inverse=True)
        return uniq, inv.reshape(-1, 3)

    def boundary_vertices(self) -> np.ndarray:
        """Outer-boundary vertex ids sorted by angle."""
        ids = np.flatnonzero(self.tags == OUTER_BOUNDARY)
        return ids[np.argsort(self.param[ids], kind="stable")]

    def arc_coverage(self) -> float:
        c = self.curved
        return float(np.sum(self.arcs[c, 1] - self.arcs[c, 0]))

    def fitting_error(self) -> float:
        ids = self.tags == OUTER_BOUNDARY
        return float(np.max(np.abs(np.hypot(*self.points[ids].T) - self.R)))

    def interface_fitting_error(self) -> float:
        ids = np.flatnonzero(self.tags == OBSTACLE_BOUNDARY)
        d = self.points[ids] - np.asarray(self.obstacle.center)
        theta = np.arctan2(d[:, 1], d[:, 0])
        return float(np.max(np.abs(np.hypot(d[:, 0], d[:, 1]) - self.obstacle.radius(theta))))

    def check_matching(self) -> bool:
        """Conformity: interior edges shared by exactly two cells, the only
        single-cell edges are the chords of curved cells, Euler characteristic
        of a disk, and positive orientation everywhere."""
        if np.any(self.generator_areas() <= 0):
            return False
        uniq, cell_edges = self.edges()
        count = np.bincount(cell_edges.ravel(), minlength=len(uniq))
        if np.any(count > 2):
            return False
        single = set(np.flatnonzero(count == 1).tolist())
        chords = set(cell_edges[self.curved, 0].tolist())
        if single != chords:
            return False
        used = np.unique(self.cells)
        if len(used) != self.n_vertices:
            return False
        return self.n_vertices - len(uniq) + self.n_cells == 1

    def check_arc_partition(self, tol=1e-12) -> bool:
        c = self.curved
        a = self.arcs[c]
        order = np.argsort(a[:, 0])
        a = a[order]
        gaps = np.roll(a[:, 0], -1) - a[:, 1]
        gaps[-1] += TWO_PI
        return bool(np.all(np.abs(gaps) <= tol) and abs(self.arc_coverage() - TWO_PI) <= tol)

    def supersimplex_of(self, c: int) -> Supersimplex:
        if self.kind[c] != CURVED:
            raise ValueError(f"cell {c} is not a curved boundary cell")
        a, b, apex = self.points[self.cells[c]]
        verts = np.array([apex, apex + 2.0 * (a - apex), apex + 2.0 * (b - apex)])
        return Supersimplex(int(c), verts)

    def arc_points(self, c: int, n: int = 64) -> np.ndarray:
        t = np.linspace(self.arcs[c, 0], self.arcs[c, 1], n)
        return self.R * np.stack([np.cos(t), np.sin(t)], axis=1)

    def refine(self) -> "Mesh":
        return refine(self)


def _signed_area(p: np.ndarray) -> np.ndarray:
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def _barycentric_inside(tri: np.ndarray, pts: np.ndarray, tol: float) -> np.ndarray:
    t = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    lam = np.linalg.solve(t, (pts - tri[0]).T).T
    l0 = 1.0 - lam.sum(axis=1)
    return (lam[:, 0] >= -tol) & (lam[:, 1] >= -tol) & (l0 >= -tol)


def _ring_params(n: int) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


def _zip_rings(inner: np.ndarray, inner_t: np.ndarray, outer: np.ndarray, outer_t: np.ndarray):
    """Triangulate the strip between two closed rings of node ids with
    increasing parameters starting at 0."""
    na, nb = len(inner), len(outer)
    ta = np.append(inner_t, TWO_PI)
    tb = np.append(outer_t, TWO_PI)
    tris = []
    i = j = 0
    while i < na or j < nb:
        if j == nb or (i < na and ta[i + 1] <= tb[j + 1]):
            tris.append((inner[i], inner[(i + 1) % na], outer[j % nb]))
            i += 1
        else:
            tris.append((inner[i % na], outer[(j + 1) % nb], outer[j]))
            j += 1
    return tris


def build_mesh(ctx, obstacle: ObstacleSpec, h_target: float) -> Mesh:
    """Interface-fitted mesh of B_R with target size ``h_target``."""
    R = float(ctx.R)
    obstacle.validate(R)
    if not h_target > 0:
        raise ResolutionError("h_target must be positive")
    n_out = int(math.ceil(TWO_PI * R / h_target))
    if n_out < 16:
        raise ResolutionError(
            f"h_target = {h_target} gives {n_out} boundary segments; at least 16 are required")
    n_obs = max(8, int(math.ceil(obstacle.perimeter() / h_target)))
    r_mean = float(np.mean(obstacle.radius(np.linspace(0, TWO_PI, 256, endpoint=False))))

    pts: list[np.ndarray] = []
    tags: list[np.ndarray] = []
    params: list[np.ndarray] = []
    n_pts = 0

    def add(p, tag, par):
        nonlocal n_pts
        ids = np.arange(n_pts, n_pts + len(p))
        pts.append(p)
        tags.append(np.full(len(p), tag))
        params.append(par)
        n_pts += len(p)
        return ids

    cells: list[tuple] = []
    region: list[int] = []

    # obstacle boundary ring, shared by both regions
    t0 = _ring_params(n_obs)
    ring0 = add(obstacle.point(t0), OBSTACLE_BOUNDARY, t0)

    # obstacle interior rings down to the centre
    L_in = max(1, int(round(r_mean / h_target)))
    prev, prev_t = ring0, t0
    for j in range(1, L_in):
        s = 1.0 - j / L_in
        n = max(3, int(round(n_obs * s)))
        t = _ring_params(n)
        ids = add(obstacle.point(t, scale=s), INTERIOR, np.full(n, np.nan))
        tris = _zip_rings(ids, t, prev, prev_t)
        cells += tris
        region += [OBSTACLE] * len(tris)
        prev, prev_t = ids, t
    centre = add(np.asarray(obstacle.center, dtype=float)[None], INTERIOR, np.array([np.nan]))[0]
    for i in range(len(prev)):
        cells.append((centre, prev[i], prev[(i + 1) % len(prev)]))
        region.append(OBSTACLE)

    # annulus rings blending the obstacle curve into S_R
    gap = R - r_mean
    L_out = max(1, int(round(gap / h_target)))
    prev, prev_t = ring0, t0
    for j in range(1, L_out + 1):
        s = j / L_out
        n = int(round(n_obs + (n_out - n_obs) * min(1.0, s / _RAMP)))
        t = _ring_params(n)
        circle = R * np.stack([np.cos(t), np.sin(t)], axis=1)
        if j == L_out:
            ids = add(circle, OUTER_BOUNDARY, t)
        else:
            ids = add((1.0 - s) * obstacle.point(t) + s * circle, INTERIOR, np.full(n, np.nan))
        tris = _zip_rings(prev, prev_t, ids, t)
        cells += tris
        region += [ANNULUS] * len(tris)
        prev, prev_t = ids, t

    points = np.concatenate(pts)
    mesh = _finalize(points, np.concatenate(tags), np.concatenate(params),
                     np.asarray(cells, dtype=np.int64), np.asarray(region, dtype=np.int8),
                     R, float(ctx.kappa), obstacle)
    if np.any(mesh.generator_areas() <= 0):
        raise ResolutionError("h_target too coarse for this obstacle: inverted cells")
    return mesh


def _finalize(points, tags, param, cells, region, R, kappa, obstacle, parents=None, level=0) -> Mesh:
    p = points[cells]
    a = _signed_area(p)
    flip = a < 0
    cells = cells.copy()
    cells[flip] = cells[flip][:, [0, 2, 1]]
    on_circle = tags[cells] == OUTER_BOUNDARY
    n_on = on_circle.sum(axis=1)
    if np.any(n_on == 3):
        raise ResolutionError("a cell has all three vertices on S_R")
    kind = np.zeros(len(cells), dtype=np.int8)
    arcs = np.full((len(cells), 2), np.nan)
    for c in np.flatnonzero(n_on == 2):
        # rotate so the interior vertex is last; ccw order then puts a before b on the circle
        k = int(np.flatnonzero(~on_circle[c])[0])
        v = np.roll(cells[c], 2 - k)
        ta, tb = param[v[0]], param[v[1]]
        if tb <= ta:
            tb += TWO_PI
        if not 0.0 < tb - ta < math.pi:
            raise ResolutionError("boundary cell arc spans more than pi")
        # only consecutive boundary nodes form an arc; a chord between
        # non-neighbours would hide other boundary vertices
        cells[c] = v
        kind[c] = CURVED
        arcs[c] = (ta, tb)
    return Mesh(points, tags, param, cells, kind, region, arcs, R, kappa, obstacle, parents, level)


def refine(mesh: Mesh) -> Mesh:
    """Red refinement; midpoints of arc chords and interface edges are moved onto their curves."""
    uniq, cell_edges = mesh.edges()
    nv = mesh.n_vertices
    ne = len(uniq)
    p0, p1 = mesh.points[uniq[:, 0]], mesh.points[uniq[:, 1]]
    mid = 0.5 * (p0 + p1)
    tags = np.full(ne, INTERIOR)
    param = np.full(ne, np.nan)

    arc_edges = cell_edges[mesh.curved, 0]
    c = mesh.curved
    theta_mid = 0.5 * (mesh.arcs[c, 0] + mesh.arcs[c, 1])
    mid[arc_edges] = mesh.R * np.stack([np.cos(theta_mid), np.sin(theta_mid)], axis=1)
    tags[arc_edges] = OUTER_BOUNDARY
    param[arc_edges] = np.mod(theta_mid, TWO_PI)

    # interface edges: one obstacle and one annulus neighbour
    reg_count = np.zeros((ne, 2), dtype=int)
    for r in (OBSTACLE, ANNULUS):
        sel = cell_edges[mesh.region == r].ravel()
        reg_count[:, r] = np.bincount(sel, minlength=ne)
    iface = np.flatnonzero((reg_count[:, 0] == 1) & (reg_count[:, 1] == 1))
    ta = mesh.param[uniq[iface, 0]]
    tb = mesh.param[uniq[iface, 1]]
    lo, hi = np.minimum(ta, tb), np.maximum(ta, tb)
    wrap = hi - lo > math.pi
    tm = np.where(wrap, 0.5 * (lo + hi + TWO_PI), 0.5 * (lo + hi))
    tm = np.mod(tm, TWO_PI)
    mid[iface] = mesh.obstacle.point(tm)
    tags[iface] = OBSTACLE_BOUNDARY
    param[iface] = tm

    points = np.concatenate([mesh.points, mid])
    all_tags = np.concatenate([mesh.tags, tags])
    all_param = np.concatenate([mesh.param, param])
    m = nv + cell_edges  # midpoint ids of edges 01, 12, 20
    v = mesh.cells
    children = np.concatenate([
        np.stack([v[:, 0], m[:, 0], m[:, 2]], axis=1),
        np.stack([m[:, 0], v[:, 1], m[:, 1]], axis=1),
        np.stack([m[:, 2], m[:, 1], v[:, 2]], axis=1),
        np.stack([m[:, 0], m[:, 1], m[:, 2]], axis=1),
    ])
    region = np.tile(mesh.region, 4)
    parents = np.concatenate([np.stack([np.arange(nv), np.arange(nv)], axis=1), uniq])
    out = _finalize(points, all_tags, all_param, children, region, mesh.R, mesh.kappa,
                    mesh.obstacle, parents, mesh.level + 1)
    if np.any(out.generator_areas() <= 0):
        raise GeometryError("refinement produced an inverted cell")
    return out


def supersimplex_of(mesh: Mesh, cell_id: int) -> Supersimplex:
    return mesh.supersimplex_of(cell_id)


def refinement_hierarchy(ctx, obstacle: ObstacleSpec, h_target: float, levels: int) -> list[Mesh]:
    meshes = [build_mesh(ctx, obstacle, h_target)]
    for _ in range(levels - 1):
        meshes.append(refine(meshes[-1]))
    return meshes


def write_mesh(mesh: Mesh, path) -> None:
    """Line-based dump: header, ``id x y tag`` lines, ``id v0 v1 v2 kind region [theta0 theta1]``."""
    with open(path, "w") as fh:
        fh.write(f"#vertices {mesh.n_vertices} #cells {mesh.n_cells} {float(mesh.R)!r} {float(mesh.kappa)!r}\n")
        for i, (x, y) in enumerate(mesh.points):
            fh.write(f"{i} {float(x)!r} {float(y)!r} {TAG_NAMES[mesh.tags[i]]}\n")
        for c, (a, b, d) in enumerate(mesh.cells):
            line = f"{c} {a} {b} {d} {KIND_NAMES[mesh.kind[c]]} {REGION_NAMES[mesh.region[c]]}"
            if mesh.kind[c] == CURVED:
                line += f" {float(mesh.arcs[c, 0])!r} {float(mesh.arcs[c, 1])!r}"
            fh.write(line + "\n")


def read_mesh(path, obstacle: ObstacleSpec | None = None) -> Mesh:
    with open(path) as fh:
        header = fh.readline().split()
        nv, nc = int(header[1]), int(header[3])
        R, kappa = float(header[4]), float(header[5])
        points = np.empty((nv, 2))
        tags = np.empty(nv, dtype=int)
        for _ in range(nv):
            i, x, y, tag = fh.readline().split()
            points[int(i)] = float(x), float(y)
            tags[int(i)] = TAG_NAMES.index(tag)
        cells = np.empty((nc, 3), dtype=np.int64)
        kind = np.empty(nc, dtype=np.int8)
        region = np.empty(nc, dtype=np.int8)
        arcs = np.full((nc, 2), np.nan)
        for _ in range(nc):
            parts = fh.readline().split()
            c = int(parts[0])
            cells[c] = [int(v) for v in parts[1:4]]
            kind[c] = KIND_NAMES.index(parts[4])
            region[c] = REGION_NAMES.index(parts[5])
            if kind[c] == CURVED:
                arcs[c] = float(parts[6]), float(parts[7])
    param = np.full(nv, np.nan)
    on = tags == OUTER_BOUNDARY
    param[on] = np.mod(np.arctan2(points[on, 1], points[on, 0]), TWO_PI)
    if obstacle is None:
        obstacle = ObstacleSpec.disk(0.0)
    return Mesh(points, tags, param, cells, kind, region, arcs, R, kappa, obstacle)


def mesh_summary(mesh: Mesh) -> dict:
    return {
        "n_vertices": mesh.n_vertices,
        "n_cells": mesh.n_cells,
        "n_curved": int(len(mesh.curved)),
        "h": mesh.h,
        "shape_ratio": mesh.shape_ratio,
    }


__all__: Sequence[str] = [
    "ObstacleSpec", "Mesh", "Vertex", "Cell", "CurvedEdge", "Supersimplex",
    "GeometryError", "ResolutionError", "build_mesh", "refine", "supersimplex_of",
    "refinement_hierarchy", "write_mesh", "read_mesh",
]
