"""Two-dimensional polytopal meshes.

A mesh is given by vertices, faces (straight edges joining two vertices) and
cells (closed polygons listed by their faces), each cell carrying a centre
``x_K`` with respect to which it must be strictly star-shaped.  All derived
geometry (measures, centroids, outward normals, orthogonal distances) lives in
flat numpy arrays; per cell-face quantities are stored in CSR order so that
``mesh.cell_slice(K)`` indexes the faces of cell ``K``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    InvalidResolution,
    MeshError,
    NonClosedCell,
    NotStarShaped,
    OrphanFace,
    ParseError,
)

MESH_KINDS = ("triangular", "rectangular", "hexagonal", "kershaw")

# vertex counts reproducing the cell counts of the glioma experiments
PRESET_RESOLUTIONS = {
    "triangular": {"n": 56, "ny": 32},  # 2 * 56 * 32 = 3584
    "rectangular": {"n": 32},  # 1024
    "hexagonal": {"n": 81},  # 6561
    "kershaw": {"n": 68},  # 4624
}

DEFAULT_KERSHAW_DISTORTION = 0.6


@dataclass(frozen=True)
class Face:
    vertex_ids: tuple[int, int]
    measure: float
    centroid: np.ndarray
    incident_cells: tuple[int, ...]

    @property
    def is_boundary(self) -> bool:
        return len(self.incident_cells) == 1


@dataclass(frozen=True)
class Cell:
    face_ids: np.ndarray
    centre: np.ndarray
    measure: float
    diameter: float
    normals: np.ndarray
    distances: np.ndarray
    vertex_loop: np.ndarray


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class PolytopalMesh:
    """Immutable polytopal mesh with all derived geometry.

    Use :func:`build_polytopal_mesh` to construct one; the constructor does no
    validation of its own.
    """

    def __init__(self, vertices, face_vertices, cell_ptr, cell_face_idx, centres,
                 loops, face_measure, face_centroid, face_cells, cell_measure,
                 cell_diameter, cf_normal, cf_dist):
        self.vertices = _readonly(vertices)
        self.face_vertices = _readonly(face_vertices)
        self.cell_ptr = _readonly(cell_ptr)
        self.cell_face_idx = _readonly(cell_face_idx)
        self.cell_centres = _readonly(centres)
        self.cell_loops = tuple(_readonly(lp) for lp in loops)
        self.face_measure = _readonly(face_measure)
        self.face_centroid = _readonly(face_centroid)
        self.face_cells = _readonly(face_cells)
        self.cell_measure = _readonly(cell_measure)
        self.cell_diameter = _readonly(cell_diameter)
        self.cf_normal = _readonly(cf_normal)
        self.cf_dist = _readonly(cf_dist)
        self.cf_cell = _readonly(np.repeat(np.arange(len(centres)), np.diff(cell_ptr)))
        self.boundary_faces = _readonly(np.flatnonzero(face_cells[:, 1] < 0))
        self.interior_faces = _readonly(np.flatnonzero(face_cells[:, 1] >= 0))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.face_vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cell_centres)

    @property
    def h(self) -> float:
        """Mesh size, the largest cell diameter."""
        return float(self.cell_diameter.max())

    @property
    def faces_per_cell(self) -> np.ndarray:
        return np.diff(self.cell_ptr)

    @property
    def is_simplicial(self) -> bool:
        return bool(np.all(self.faces_per_cell == 3))

    def cell_slice(self, k: int) -> slice:
        return slice(int(self.cell_ptr[k]), int(self.cell_ptr[k + 1]))

    def cell_faces(self, k: int) -> np.ndarray:
        return self.cell_face_idx[self.cell_slice(k)]

    def face(self, i: int) -> Face:
        cells = tuple(int(c) for c in self.face_cells[i] if c >= 0)
        a, b = self.face_vertices[i]
        return Face((int(a), int(b)), float(self.face_measure[i]),
                    self.face_centroid[i], cells)

    def cell(self, k: int) -> Cell:
        s = self.cell_slice(k)
        return Cell(self.cell_face_idx[s], self.cell_centres[k],
                    float(self.cell_measure[k]), float(self.cell_diameter[k]),
                    self.cf_normal[s], self.cf_dist[s], self.cell_loops[k])

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def __repr__(self):
        return (f"PolytopalMesh(cells={self.n_cells}, faces={self.n_faces}, "
                f"vertices={self.n_vertices}, h={self.h:.4g})")


def _vertex_loop(k, faces, face_vertices):
    """Order the vertices of cell ``k`` into a single closed cycle."""
    incident = {}
    for f in faces:
        for v in face_vertices[f]:
            incident.setdefault(int(v), []).append(int(f))
    if len(faces) < 3 or any(len(fs) != 2 for fs in incident.values()):
        raise NonClosedCell(f"cell {k}: faces do not form a closed polygon")
    loop = []
    v0 = int(face_vertices[faces[0]][0])
    v, f = v0, int(faces[0])
    for _ in range(len(faces)):
        loop.append(v)
        a, b = face_vertices[f]
        v = int(b) if int(a) == v else int(a)
        f = incident[v][0] if incident[v][1] == f else incident[v][1]
    if v != v0 or len(set(loop)) != len(faces):
        raise NonClosedCell(f"cell {k}: faces form more than one loop")
    return np.array(loop)


def _polygon_area_centroid(p):
    q = np.roll(p, -1, axis=0)
    cross = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
    area = 0.5 * cross.sum()
    centroid = ((p + q) * cross[:, None]).sum(axis=0) / (6.0 * area)
    return area, centroid


def build_polytopal_mesh(vertices, face_vertex_pairs, cell_face_lists,
                         cell_centres=None, tol: float = 1e-12) -> PolytopalMesh:
    """Build and validate a polytopal mesh.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
    face_vertex_pairs : array_like of int, shape (nf, 2)
    cell_face_lists : sequence of sequences of face indices
    cell_centres : array_like, shape (nc, 2), optional
        Cell centres ``x_K``.  When omitted, polygon area centroids are used.
    tol : float
        Absolute tolerance on the closed-polygon identities (scaled by the
        local face length).

    Raises
    ------
    NonClosedCell, NotStarShaped, OrphanFace, MeshError
    """
    verts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(verts)):
        raise MeshError("vertex coordinates must be finite")
    fv = np.asarray(face_vertex_pairs, dtype=np.int64).reshape(-1, 2)
    nv, nf, nc = len(verts), len(fv), len(cell_face_lists)
    if nc == 0:
        raise MeshError("mesh has no cells")
    if fv.size and (fv.min() < 0 or fv.max() >= nv):
        raise MeshError("face references a vertex index out of range")
    if np.any(fv[:, 0] == fv[:, 1]):
        raise MeshError("face joins a vertex to itself")

    seg = verts[fv[:, 1]] - verts[fv[:, 0]]
    face_measure = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(face_measure <= 0.0):
        raise MeshError("zero-measure face")
    face_centroid = 0.5 * (verts[fv[:, 0]] + verts[fv[:, 1]])

    counts = np.array([len(c) for c in cell_face_lists], dtype=np.int64)
    cell_ptr = np.concatenate([[0], np.cumsum(counts)])
    cell_face_idx = (np.concatenate([np.asarray(c, dtype=np.int64) for c in cell_face_lists])
                     if nc else np.zeros(0, dtype=np.int64))
    if cell_face_idx.min() < 0 or cell_face_idx.max() >= nf:
        raise MeshError("cell references a face index out of range")

    face_cells = -np.ones((nf, 2), dtype=np.int64)
    nref = np.zeros(nf, dtype=np.int64)
    for k in range(nc):
        fs = cell_face_idx[cell_ptr[k]:cell_ptr[k + 1]]
        if len(set(fs.tolist())) != len(fs):
            raise NonClosedCell(f"cell {k}: repeated face")
        for f in fs:
            if nref[f] >= 2:
                raise OrphanFace(f"face {f} is shared by more than two cells")
            face_cells[f, nref[f]] = k
            nref[f] += 1
    if np.any(nref == 0):
        raise OrphanFace(f"face {int(np.flatnonzero(nref == 0)[0])} belongs to no cell")

    loops = []
    cell_measure = np.empty(nc)
    cell_diameter = np.empty(nc)
    centroids = np.empty((nc, 2))
    cf_normal = np.empty((len(cell_face_idx), 2))
    for k in range(nc):
        s = slice(cell_ptr[k], cell_ptr[k + 1])
        faces = cell_face_idx[s]
        loop = _vertex_loop(k, faces, fv)
        area, centroid = _polygon_area_centroid(verts[loop])
        if area < 0:
            loop = loop[::-1]
            area = -area
        if area <= 0:
            raise MeshError(f"cell {k} has zero measure")
        loops.append(loop)
        cell_measure[k] = area
        centroids[k] = centroid
        p = verts[loop]
        cell_diameter[k] = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1).max())
        # orientation of each face as traversed counter-clockwise
        succ = {int(loop[i]): int(loop[(i + 1) % len(loop)]) for i in range(len(loop))}
        for j, f in enumerate(faces):
            a, b = int(fv[f, 0]), int(fv[f, 1])
            t = seg[f] if succ[a] == b else -seg[f]
            cf_normal[s.start + j] = np.array([t[1], -t[0]]) / face_measure[f]

    centres = centroids if cell_centres is None else np.asarray(cell_centres, float).reshape(nc, 2)
    if not np.all(np.isfinite(centres)):
        raise MeshError("cell centres must be finite")
    cf_cell = np.repeat(np.arange(nc), counts)
    cf_dist = np.einsum("ij,ij->i", face_centroid[cell_face_idx] - centres[cf_cell], cf_normal)
    if np.any(cf_dist <= 0.0):
        i = int(np.flatnonzero(cf_dist <= 0.0)[0])
        raise NotStarShaped(f"cell {int(cf_cell[i])} is not strictly star-shaped "
                            f"with respect to its centre (d = {cf_dist[i]:.3g})")

    # closed-polygon identities
    lengths = face_measure[cell_face_idx][:, None]
    closure = np.zeros((nc, 2))
    np.add.at(closure, cf_cell, lengths * cf_normal)
    scale = np.zeros(nc)
    np.add.at(scale, cf_cell, face_measure[cell_face_idx])
    if np.any(np.abs(closure).max(axis=1) > tol * np.maximum(scale, 1.0)):
        raise NonClosedCell("sum of |sigma| n_{K,sigma} does not vanish")
    moment = np.zeros((nc, 2, 2))
    np.add.at(moment, cf_cell,
              (lengths * cf_normal)[:, :, None]
              * (face_centroid[cell_face_idx] - centres[cf_cell])[:, None, :])
    defect = np.abs(moment - cell_measure[:, None, None] * np.eye(2)).max(axis=(1, 2))
    if np.any(defect > 1e3 * tol * np.maximum(cell_measure, 1.0)):
        raise NonClosedCell("geometric moment identity failed")

    interior = nref == 2
    if interior.any():
        # face normals seen from the two sides must be opposite
        pos = {}
        for i, (k, f) in enumerate(zip(cf_cell, cell_face_idx)):
            pos.setdefault(int(f), []).append(i)
        for f in np.flatnonzero(interior):
            i, j = pos[int(f)]
            if np.abs(cf_normal[i] + cf_normal[j]).max() > 1e-12:
                raise MeshError(f"face {f}: incident cells overlap")

    return PolytopalMesh(verts, fv, cell_ptr, cell_face_idx, centres, loops,
                         face_measure, face_centroid, face_cells, cell_measure,
                         cell_diameter, cf_normal, cf_dist)


def mesh_from_polygons(vertices, polygons, cell_centres=None) -> PolytopalMesh:
    """Build a mesh from cells given as vertex loops; faces are deduplicated."""
    face_ids = {}
    faces = []
    cells = []
    for poly in polygons:
        cf = []
        m = len(poly)
        for i in range(m):
            a, b = int(poly[i]), int(poly[(i + 1) % m])
            key = (a, b) if a < b else (b, a)
            if key not in face_ids:
                face_ids[key] = len(faces)
                faces.append((a, b))
            cf.append(face_ids[key])
        cells.append(cf)
    return build_polytopal_mesh(vertices, faces, cells, cell_centres)


# ---------------------------------------------------------------------------
# generators


def _structured_quads(X, Y):
    ny1, nx1 = X.shape
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(nx1 * ny1).reshape(ny1, nx1)
    polys = []
    for j in range(ny1 - 1):
        for i in range(nx1 - 1):
            polys.append([idx[j, i], idx[j, i + 1], idx[j + 1, i + 1], idx[j + 1, i]])
    return verts, polys, idx


def _grid(L, nx, ny):
    x = np.linspace(-L, L, nx + 1)
    y = np.linspace(-L, L, ny + 1)
    return np.meshgrid(x, y)


def rectangular_mesh(L: float, n: int, ny: int | None = None) -> PolytopalMesh:
    ny = n if ny is None else ny
    X, Y = _grid(L, n, ny)
    verts, polys, _ = _structured_quads(X, Y)
    return mesh_from_polygons(verts, polys)


def triangular_mesh(L: float, n: int, ny: int | None = None) -> PolytopalMesh:
    """Split each rectangle of an ``n x ny`` grid along its lower-left to
    upper-right diagonal; 2 * n * ny triangles."""
    ny = n if ny is None else ny
    X, Y = _grid(L, n, ny)
    verts, quads, _ = _structured_quads(X, Y)
    polys = []
    for a, b, c, d in quads:
        polys.append([a, b, c])
        polys.append([a, c, d])
    return mesh_from_polygons(verts, polys)


def kershaw_mesh(L: float, n: int, distortion: float = DEFAULT_KERSHAW_DISTORTION,
                 ny: int | None = None) -> PolytopalMesh:
    """Logically rectangular Kershaw-type z-mesh.

    Vertical grid lines are bent into a four-band zigzag whose amplitude grows
    towards the middle of the domain.  In reference coordinates
    ``(s, t) in [0, 1]^2``::

        x = s + distortion * w(s) * z(t) / 2,   w(s) = 1 - |2 s - 1|,

    where ``z`` is the triangle wave with ``z = +1`` at ``t = 1/4``, ``-1`` at
    ``t = 3/4`` and ``0`` at ``t = 0, 1/2, 1``.  Rows stay horizontal, so every
    cell is a trapezoid whose width varies by the factor ``1 +- distortion``;
    cells stay convex for ``0 <= distortion < 1``.  ``distortion = 0`` gives
    the uniform rectangular grid.
    """
    if not 0.0 <= distortion < 1.0:
        raise InvalidResolution("kershaw distortion must lie in [0, 1)")
    ny = n if ny is None else ny
    s = np.linspace(0.0, 1.0, n + 1)
    t = np.linspace(0.0, 1.0, ny + 1)
    S, T = np.meshgrid(s, t)
    w = 1.0 - np.abs(2.0 * S - 1.0)
    z = np.where(T <= 0.5, 1.0 - np.abs(4.0 * T - 1.0), np.abs(4.0 * T - 3.0) - 1.0)
    Xs = S + 0.5 * distortion * w * z
    X = -L + 2.0 * L * Xs
    Y = -L + 2.0 * L * T
    if distortion == 0.0:
        X, Y = _grid(L, n, ny)
    verts, polys, _ = _structured_quads(X, Y)
    return mesh_from_polygons(verts, polys)


def hexagonal_mesh(L: float, n: int) -> PolytopalMesh:
    """Bounded Voronoi diagram of a staggered ``n x n`` lattice in the square.

    Generators sit at the centres of an ``n x n`` grid with alternate rows
    shifted by a quarter cell left or right, so the interior cells are
    hexagons of area h^2 and every row keeps ``n`` cells.  Cells touching the
    boundary are the hexagons clipped to the square (general polygons).
    """
    from scipy.spatial import Voronoi, cKDTree

    h = 2.0 * L / n
    jj, ii = np.mgrid[0:n, 0:n]
    shift = np.where(jj % 2 == 0, -0.25 * h, 0.25 * h)
    px = -L + (ii + 0.5) * h + shift
    py = -L + (jj + 0.5) * h
    pts = np.column_stack([px.ravel(), py.ravel()])
    # mirror images across the sides and corners bound the diagram by the square
    images = [pts]
    for sx in (-1, 0, 1):
        for sy in (-1, 0, 1):
            if sx == 0 and sy == 0:
                continue
            q = pts.copy()
            if sx:
                q[:, 0] = sx * 2.0 * L - q[:, 0]
            if sy:
                q[:, 1] = sy * 2.0 * L - q[:, 1]
            images.append(q)
    vor = Voronoi(np.vstack(images))
    npts = len(pts)
    regions = [vor.regions[vor.point_region[i]] for i in range(npts)]
    used = np.unique(np.concatenate([np.asarray(r) for r in regions]))
    if np.any(used < 0):
        raise MeshError("unbounded Voronoi region")
    coords = vor.vertices[used].copy()
    coords[np.abs(coords - L) < 1e-9 * L] = L
    coords[np.abs(coords + L) < 1e-9 * L] = -L
    # merge vertices split by co-circular generators
    tree = cKDTree(coords)
    parent = np.arange(len(coords))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in sorted(tree.query_pairs(1e-7 * h)):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(len(coords))])
    uniq, new_id = np.unique(roots, return_inverse=True)
    local = {int(v): int(new_id[i]) for i, v in enumerate(used)}
    verts = coords[uniq]
    polys = []
    for i, reg in enumerate(regions):
        ids = []
        for v in reg:
            m = local[int(v)]
            if m not in ids:
                ids.append(m)
        p = verts[ids]
        ang = np.arctan2(p[:, 1] - pts[i, 1], p[:, 0] - pts[i, 0])
        polys.append([ids[j] for j in np.argsort(ang)])
    return mesh_from_polygons(verts, polys)


def generate_mesh(kind: str, half_width: float, resolution: int,
                  distortion: float | None = None, ny: int | None = None) -> PolytopalMesh:
    """Generate a mesh of ``[-L, L]^2``.

    Cell counts: rectangular ``n * ny``; triangular ``2 * n * ny``; hexagonal
    ``n^2``; kershaw ``n * ny`` (``ny`` defaults to ``n``).
    """
    if kind not in MESH_KINDS:
        raise InvalidResolution(f"unknown mesh kind {kind!r}")
    if half_width <= 0:
        raise InvalidResolution("half_width must be positive")
    if int(resolution) != resolution or resolution < 1 or (ny is not None and ny < 1):
        raise InvalidResolution("resolution must be a positive integer")
    if distortion is not None and kind != "kershaw":
        raise InvalidResolution("distortion applies to kershaw meshes only")
    n = int(resolution)
    if kind == "rectangular":
        return rectangular_mesh(half_width, n, ny)
    if kind == "triangular":
        return triangular_mesh(half_width, n, ny)
    if kind == "kershaw":
        d = DEFAULT_KERSHAW_DISTORTION if distortion is None else distortion
        return kershaw_mesh(half_width, n, d, ny)
    if ny is not None and ny != n:
        raise InvalidResolution("hexagonal meshes are n x n")
    return hexagonal_mesh(half_width, n)


def preset_mesh(kind: str, half_width: float = 20.0) -> PolytopalMesh:
    """The mesh of the given kind used in the glioma experiments."""
    return generate_mesh(kind, half_width, **{"resolution" if k == "n" else k: v
                                              for k, v in PRESET_RESOLUTIONS[kind].items()})


# ---------------------------------------------------------------------------
# text format


def serialize_mesh(mesh: PolytopalMesh) -> str:
    lines = ["POLYMESH 2", f"VERTICES {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"FACES {mesh.n_faces}")
    lines += [f"{a} {b}" for a, b in mesh.face_vertices.tolist()]
    lines.append(f"CELLS {mesh.n_cells}")
    for k in range(mesh.n_cells):
        cx, cy = mesh.cell_centres[k].tolist()
        fs = mesh.cell_faces(k).tolist()
        lines.append(" ".join([repr(cx), repr(cy), str(len(fs))] + [str(f) for f in fs]))
    return "\n".join(lines) + "\n"


def parse_mesh(text: str):
    """Parse the ``POLYMESH 2`` text format.

    Returns ``(vertices, face_vertex_pairs, cell_face_lists, cell_centres)``,
    the arguments of :func:`build_polytopal_mesh`.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((lineno, body.split()))
    it = iter(rows)

    def next_row(what):
        try:
            return next(it)
        except StopIteration:
            raise ParseError(f"unexpected end of file, expected {what}",
                             rows[-1][0] if rows else None) from None

    def section(name):
        lineno, tok = next_row(name)
        if len(tok) != 2 or tok[0] != name:
            raise ParseError(f"expected '{name} <count>'", lineno)
        try:
            count = int(tok[1])
        except ValueError:
            raise ParseError(f"bad count {tok[1]!r}", lineno) from None
        if count < 0:
            raise ParseError("negative count", lineno)
        return count

    lineno, tok = next_row("header")
    if tok != ["POLYMESH", "2"]:
        raise ParseError("expected header 'POLYMESH 2'", lineno)

    nv = section("VERTICES")
    vertices = []
    for _ in range(nv):
        lineno, tok = next_row("vertex")
        if len(tok) != 2:
            raise ParseError("vertex line needs 2 coordinates", lineno)
        try:
            vertices.append([float(tok[0]), float(tok[1])])
        except ValueError:
            raise ParseError("bad vertex coordinate", lineno) from None

    nf = section("FACES")
    faces = []
    for _ in range(nf):
        lineno, tok = next_row("face")
        if len(tok) != 2:
            raise ParseError("face line needs 2 vertex indices", lineno)
        try:
            a, b = int(tok[0]), int(tok[1])
        except ValueError:
            raise ParseError("bad vertex index", lineno) from None
        if not (0 <= a < nv and 0 <= b < nv):
            raise ParseError(f"vertex index out of range (have {nv} vertices)", lineno)
        faces.append((a, b))

    nc = section("CELLS")
    centres, cells = [], []
    for _ in range(nc):
        lineno, tok = next_row("cell")
        try:
            cx, cy, m = float(tok[0]), float(tok[1]), int(tok[2])
            fs = [int(t) for t in tok[3:]]
        except (ValueError, IndexError):
            raise ParseError("cell line must be 'cx cy nf f1 ... f_nf'", lineno) from None
        if m != len(fs):
            raise ParseError(f"cell declares {m} faces but lists {len(fs)}", lineno)
        if any(not 0 <= f < nf for f in fs):
            raise ParseError(f"face index out of range (have {nf} faces)", lineno)
        centres.append([cx, cy])
        cells.append(fs)

    extra = next(it, None)
    if extra is not None:
        raise ParseError("trailing content after CELLS section", extra[0])
    return (np.array(vertices).reshape(-1, 2), np.array(faces, dtype=np.int64).reshape(-1, 2),
            cells, np.array(centres).reshape(-1, 2))


def load_mesh(text: str) -> PolytopalMesh:
    v, f, c, x = parse_mesh(text)
    return build_polytopal_mesh(v, f, c, x)


def read_mesh(path) -> PolytopalMesh:
    with open(path) as fh:
        return load_mesh(fh.read())


def write_mesh(mesh: PolytopalMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_mesh(mesh))


def single_cell_mesh(polygon: Sequence[Sequence[float]], centre=None) -> PolytopalMesh:
    """One-cell mesh from a polygon vertex list (handy for local checks)."""
    p = np.asarray(polygon, dtype=float)
    return mesh_from_polygons(p, [list(range(len(p)))],
                              None if centre is None else [centre])
