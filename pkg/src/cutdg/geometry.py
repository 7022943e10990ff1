"""Ramp cut-cell meshes: clip a Cartesian grid against a ramp half-plane.

The domain is an axis-aligned square with the region strictly below the ramp
line y = slope*(x - x0) removed for x > x0.  Every background cell is clipped
exactly; all positive-area cells are kept (no merging, arbitrarily small cut
cells survive), and faces are deduplicated with consistent adjacency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CELL_KINDS = ("cartesian", "cut3", "cut4", "cut5")
FACE_KINDS = ("interior", "boundary_square", "boundary_ramp")

K_CARTESIAN, K_CUT3, K_CUT4, K_CUT5 = range(4)
F_INTERIOR, F_SQUARE, F_RAMP = range(3)


class DegenerateGeometry(ValueError):
    """The ramp exits the square through an unsupported side."""


class InvalidStabilization(ValueError):
    """A stabilization candidate violates the flow assumptions."""


@dataclass(frozen=True)
class RampDomain:
    """Square domain with a ramp of angle `gamma` cut out, starting at (x0, 0).

    `slope` defaults to tan(gamma); tests may pin it exactly (tan(pi/4) != 1
    in floating point) since all geometry is built from the slope.
    """

    gamma: float
    x0: float
    square: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 0.0), (1.0, 1.0))
    slope: float | None = None

    def __post_init__(self):
        if not 0.0 < self.gamma < 0.5 * math.pi:
            raise ValueError(f"ramp angle must lie in (0, pi/2), got {self.gamma}")
        (xlo, ylo), (xhi, yhi) = self.square
        if not (xlo <= self.x0 <= xhi):
            raise ValueError(f"ramp start x0={self.x0} not on the bottom edge")
        if self.slope is None:
            object.__setattr__(self, "slope", math.tan(self.gamma))

    @property
    def side(self) -> float:
        return self.square[1][0] - self.square[0][0]

    def line_y(self, x):
        """Height of the ramp line at abscissa x."""
        return self.slope * (np.asarray(x) - self.x0)

    def signed_distance(self, pts) -> np.ndarray:
        """Distance to the ramp line, positive on the retained side.

        Equals cos(g)*y - sin(g)*(x - x0) up to the normalization of slope.
        """
        p = np.asarray(pts, dtype=float)
        c = 1.0 / math.hypot(1.0, self.slope)
        return c * (p[..., 1] - self.slope * (p[..., 0] - self.x0))

    def area(self) -> float:
        """|Omega| = |square| - area of the removed triangle."""
        (xlo, ylo), (xhi, yhi) = self.square
        w = xhi - self.x0
        return (xhi - xlo) * (yhi - ylo) - 0.5 * self.slope * w * w

    def tangent(self) -> np.ndarray:
        t = np.array([1.0, self.slope])
        return t / np.linalg.norm(t)

    def ramp_normal(self) -> np.ndarray:
        """Unit normal of the ramp line pointing into the retained domain."""
        n = np.array([-self.slope, 1.0])
        return n / np.linalg.norm(n)


@dataclass
class Cell:
    id: int
    vertices: np.ndarray  # (k, 2), counter-clockwise
    area: float
    kind: str
    background_index: tuple[int, int]


@dataclass
class Face:
    id: int
    endpoints: np.ndarray  # (2, 2)
    length: float
    normal: np.ndarray  # unit, outward for cell_left
    cell_left: int
    cell_right: int | None
    kind: str


@dataclass
class StabilizedCellRecord:
    """Bookkeeping for one DoD-stabilized triangular cut cell."""

    cell: int
    e_in: int
    e_out: int
    e_bdy: int
    E_in: int
    E_out: int
    alpha: float


def _polygon_area(vertices: np.ndarray) -> float:
    # shoelace in coordinates relative to the first vertex (cancellation-safe
    # for sliver cells whose extent is ~1e-10 of the coordinate magnitude)
    v = np.asarray(vertices, dtype=float)
    x = v[:, 0] - v[0, 0]
    y = v[:, 1] - v[0, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _is_convex_ccw(vertices: np.ndarray, tol: float) -> bool:
    v = np.asarray(vertices, dtype=float)
    d = np.roll(v, -1, axis=0) - v
    cross = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
    return bool(np.all(cross >= -tol))


def _clip_marked(corners, etas, ramp: RampDomain, eps: float):
    """Sutherland-Hodgman clip of one square cell against eta >= 0.

    Intersections with grid lines are computed canonically from the line
    equation so adjacent cells produce bit-identical shared vertices.
    Returns (vertices, on_line_flags); flags mark vertices on the ramp line.
    """
    out: list[tuple[float, float]] = []
    flags: list[bool] = []
    k = len(corners)
    for i in range(k):
        px, py = corners[i]
        qx, qy = corners[(i + 1) % k]
        ep, eq = etas[i], etas[(i + 1) % k]
        if ep < 0.0 < eq or eq < 0.0 < ep:
            if px == qx:  # vertical grid edge
                ix, iy = px, ramp.slope * (px - ramp.x0)
            else:  # horizontal grid edge
                ix, iy = ramp.x0 + py / ramp.slope, py
            out.append((ix, iy))
            flags.append(True)
        if eq >= 0.0:
            out.append((qx, qy))
            flags.append(eq == 0.0)
    # drop duplicate and collinear vertices
    changed = True
    while changed and len(out) >= 3:
        changed = False
        m = len(out)
        for i in range(m):
            ax, ay = out[i - 1]
            bx, by = out[i]
            if max(abs(bx - ax), abs(by - ay)) <= eps:
                flags[i - 1] = flags[i - 1] or flags[i]
                del out[i], flags[i]
                changed = True
                break
            cx, cy = out[(i + 1) % m]
            cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx)
            span = max(abs(bx - ax), abs(by - ay), abs(cx - bx), abs(cy - by))
            if abs(cross) <= eps * span:
                del out[i], flags[i]
                changed = True
                break
    return out, flags


def clip_cell(square_cell, ramp: RampDomain) -> np.ndarray:
    """Clip an axis-aligned square cell against the retained half-plane.

    Returns the counter-clockwise intersection polygon (collinear duplicates
    removed), or an empty (0, 2) array if the cell lies below the ramp.
    """
    corners = [tuple(map(float, p)) for p in np.asarray(square_cell, dtype=float)]
    h = max(abs(corners[1][0] - corners[0][0]), abs(corners[1][1] - corners[0][1]))
    eps = 1e-12 * h
    etas = [float(ramp.signed_distance(p)) for p in corners]
    etas = [0.0 if abs(e) <= eps else e for e in etas]
    if min(etas) >= 0.0:
        return np.asarray(corners, dtype=float)
    if max(etas) <= 0.0:
        return np.empty((0, 2))
    out, _ = _clip_marked(corners, etas, ramp, eps)
    if len(out) < 3:
        return np.empty((0, 2))
    poly = np.asarray(out, dtype=float)
    if _polygon_area(poly) <= 0.0:
        return np.empty((0, 2))
    return poly


class CutCellMesh:
    """Immutable cut-cell mesh with cell/face entities and numpy mirrors.

    The numpy arrays (`areas`, `kind_codes`, `f_*`) are views used by the
    vectorized assembly; the `cells`/`faces` lists hold the full records.
    Once built the mesh is never mutated and may be shared across threads.
    """

    def __init__(self, domain: RampDomain, n: int, cells, faces, cell_faces):
        self.domain = domain
        self.n = n
        self.h = domain.side / n
        self.cells: list[Cell] = cells
        self.faces: list[Face] = faces
        self.cell_faces: list[list[tuple[int, int]]] = cell_faces

        self.areas = np.array([c.area for c in cells])
        self.kind_codes = np.array([CELL_KINDS.index(c.kind) for c in cells], dtype=np.int8)
        nf = len(faces)
        self.f_endpoints = np.stack([f.endpoints for f in faces]) if nf else np.empty((0, 2, 2))
        self.f_length = np.array([f.length for f in faces])
        self.f_normal = np.stack([f.normal for f in faces]) if nf else np.empty((0, 2))
        self.f_left = np.array([f.cell_left for f in faces], dtype=np.int64)
        self.f_right = np.array(
            [f.cell_right if f.cell_right is not None else -1 for f in faces], dtype=np.int64
        )
        self.f_kind = np.array([FACE_KINDS.index(f.kind) for f in faces], dtype=np.int8)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def total_area(self) -> float:
        return float(self.areas.sum())

    def outward_sign(self, cell_id: int, face_id: int) -> int:
        """+1 if the stored face normal is outward for `cell_id`, else -1."""
        return 1 if self.faces[face_id].cell_left == cell_id else -1


def build_mesh(ramp: RampDomain, n: int) -> CutCellMesh:
    """Clip an n x n background grid against the ramp and assemble faces.

    Raises DegenerateGeometry if the ramp does not exit through the right
    edge of the square, and ValueError for n < 4.
    """
    if n < 4:
        raise ValueError(f"need at least 4 cells per side, got n={n}")
    (xlo, ylo), (xhi, yhi) = ramp.square
    exit_y = ramp.slope * (xhi - ramp.x0)
    if exit_y > (yhi - ylo) * (1.0 + 1e-12):
        raise DegenerateGeometry(
            f"ramp exits through the top (y={exit_y:.6g} at x={xhi}); "
            "only bottom-to-right ramps are supported"
        )
    h = (xhi - xlo) / n
    eps = 1e-12 * h
    xs = xlo + np.arange(n + 1) * (xhi - xlo) / n
    ys = ylo + np.arange(n + 1) * (yhi - ylo) / n

    # corner distances to the ramp line, snapped to zero within eps
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    eta = ramp.signed_distance(np.stack([gx, gy], axis=-1))
    eta[np.abs(eta) <= eps] = 0.0

    cells: list[Cell] = []
    polys_flags: list[list[bool]] = []
    for j in range(n):
        for i in range(n):
            e00, e10, e11, e01 = eta[i, j], eta[i + 1, j], eta[i + 1, j + 1], eta[i, j + 1]
            corner_etas = (e00, e10, e11, e01)
            if max(corner_etas) <= 0.0:
                continue
            corners = [(xs[i], ys[j]), (xs[i + 1], ys[j]), (xs[i + 1], ys[j + 1]), (xs[i], ys[j + 1])]
            if min(corner_etas) >= 0.0:
                poly = corners
                flags = [e == 0.0 for e in corner_etas]
            else:
                poly, flags = _clip_marked(corners, corner_etas, ramp, eps)
                if len(poly) < 3:
                    continue
            verts = np.asarray(poly, dtype=float)
            area = _polygon_area(verts)
            if area <= 0.0:
                continue
            nv = len(verts)
            if nv == 3:
                kind = "cut3"
            elif nv == 5:
                kind = "cut5"
            elif nv == 4:
                kind = "cartesian" if abs(area - h * h) <= 1e-12 * h * h else "cut4"
            else:
                raise AssertionError(f"half-plane clip of a square produced {nv} vertices")
            if not _is_convex_ccw(verts, tol=eps * h):
                raise AssertionError(f"cell ({i},{j}) polygon is not convex CCW")
            cells.append(Cell(len(cells), verts, area, kind, (i, j)))
            polys_flags.append(list(flags))

    # face dedup: canonical vertex keys quantized well below the snap scale
    inv = 4.0 / eps
    def pkey(x, y):
        return (int(round(x * inv)), int(round(y * inv)))

    registry: dict[tuple, list] = {}
    for c, flags in zip(cells, polys_flags):
        v = c.vertices
        k = len(v)
        for a in range(k):
            b = (a + 1) % k
            ka, kb = pkey(*v[a]), pkey(*v[b])
            key = (ka, kb) if ka <= kb else (kb, ka)
            on_ramp = flags[a] and flags[b]
            registry.setdefault(key, []).append((c.id, v[a].copy(), v[b].copy(), on_ramp))

    faces: list[Face] = []
    cell_faces: list[list[tuple[int, int]]] = [[] for _ in cells]
    for key, entries in registry.items():
        if len(entries) > 2:
            raise AssertionError("face shared by more than two cells")
        entries.sort(key=lambda e: e[0])  # normal owned by the lower-id cell
        cid, a, b, on_ramp = entries[0]
        d = b - a
        length = float(np.hypot(*d))
        normal = np.array([d[1], -d[0]]) / length  # outward for a CCW polygon
        if len(entries) == 2:
            if on_ramp or entries[1][3]:
                raise AssertionError("interior face tagged as ramp")
            right = entries[1][0]
            kind = "interior"
        else:
            right = None
            kind = "boundary_ramp" if on_ramp else "boundary_square"
        fid = len(faces)
        faces.append(Face(fid, np.stack([a, b]), length, normal, cid, right, kind))
        cell_faces[cid].append((fid, 1))
        if right is not None:
            cell_faces[right].append((fid, -1))

    mesh = CutCellMesh(ramp, n, cells, faces, cell_faces)
    rel_gap = abs(mesh.total_area() - ramp.area()) / ramp.area()
    if rel_gap > 1e-12:
        raise AssertionError(f"mesh does not partition the domain (relative gap {rel_gap:.3e})")
    return mesh


def identify_stabilized(mesh: CutCellMesh, table, tau: float) -> list[StabilizedCellRecord]:
    """Select triangular cut cells with max(|e_in|, |e_out|) strictly < h/2.

    `table` provides per-face integrals flux_in (w.r.t. the stored normal)
    and abs_flux; the capacity is alpha = min(|E| / (tau h int_{e_in}|b.n|), 1).
    """
    if tau <= 0.0:
        raise ValueError(f"capacity parameter tau must be positive, got {tau}")
    records: list[StabilizedCellRecord] = []
    half_h = 0.5 * mesh.h
    for c in mesh.cells:
        if c.kind != "cut3":
            continue
        legs = []
        e_bdy = None
        for fid, orient in mesh.cell_faces[c.id]:
            if mesh.f_kind[fid] == F_RAMP:
                e_bdy = fid
            else:
                legs.append((fid, orient))
        if e_bdy is None or len(legs) != 2:
            raise AssertionError(f"cut3 cell {c.id} does not have two legs and a ramp face")
        if max(mesh.f_length[f] for f, _ in legs) >= half_h:
            continue
        signed = [(float(table.flux_in[f]) * o, f) for f, o in legs]
        ins = [f for s, f in signed if s < 0.0]
        outs = [f for s, f in signed if s > 0.0]
        if len(ins) != 1 or len(outs) != 1:
            raise InvalidStabilization(
                f"cell {c.id}: legs are not one inflow / one outflow face"
            )
        e_in, e_out = ins[0], outs[0]
        if mesh.f_right[e_in] < 0 or mesh.f_right[e_out] < 0:
            raise InvalidStabilization(
                f"cell {c.id}: stabilized in/out face touches the physical boundary"
            )
        denom = float(table.abs_flux[e_in])
        if denom <= 0.0:
            raise InvalidStabilization(
                f"cell {c.id}: velocity flux vanishes on the inflow face"
            )
        alpha = min(c.area / (tau * mesh.h * denom), 1.0)
        neighbor = lambda f: int(mesh.f_left[f] if mesh.f_right[f] == c.id else mesh.f_right[f])
        records.append(
            StabilizedCellRecord(c.id, e_in, e_out, e_bdy, neighbor(e_in), neighbor(e_out), alpha)
        )

    stab_cells = {r.cell for r in records}
    used_faces: set[int] = set()
    for r in records:
        if r.E_in in stab_cells or r.E_out in stab_cells:
            raise InvalidStabilization(
                f"cell {r.cell}: in/out neighbor is itself stabilized"
            )
        for f in (r.e_in, r.e_out):
            if f in used_faces:
                raise InvalidStabilization(f"face {f} shared by two stabilized records")
            used_faces.add(f)
    return records
