"""3D polyhedral meshes: file I/O, structured generators, geometry, validation.

A mesh is described by vertex positions, one oriented vertex loop per face
(counterclockwise when viewed from the tip of the face normal), and per cell
a list of faces with orientation signs (+1 when the face normal points out of
the cell).  All derived geometry (areas, volumes, centroids, convex vertex
weights, per-face edge data) is computed at construction time and the result
is immutable.

The POLYMESH text format::

    POLYMESH 1
    <n_v> <n_f> <n_c>
    x y z                 (n_v lines)
    k v1 ... vk           (n_f lines, 0-based vertex ids, CCW w.r.t. normal)
    m s1 ... sm           (n_c lines, signed 1-based face ids)

`#` starts a comment, blank lines are ignored.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .quadrature import map_tet, map_triangle, tet_rule, triangle_rule

PLANARITY_RTOL = 1e-9
DEGENERATE_AREA_RTOL = 1e-14
DEFAULT_SEED = 12345


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


class MeshFormatError(MeshError):
    """Malformed POLYMESH input."""


@dataclass(frozen=True)
class Vertex:
    id: int
    position: np.ndarray
    on_boundary: bool


@dataclass(frozen=True)
class Face:
    id: int
    vertex_loop: np.ndarray
    normal: np.ndarray
    area: float
    centroid: np.ndarray
    weights: np.ndarray
    adjacent_cells: tuple
    on_boundary: bool


@dataclass(frozen=True)
class Cell:
    id: int
    faces: np.ndarray
    face_signs: np.ndarray
    vertices: np.ndarray
    volume: float
    centroid: np.ndarray
    diameter: float
    weights: np.ndarray


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    proxies: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def _convex_weights(points: np.ndarray, target: np.ndarray, scale: float):
    """Nonnegative weights with sum 1 reproducing `target` as a combination of
    `points`.  Minimizes the deviation from uniform weights subject to the two
    equality constraints; negative entries are repaired by active-set clamping.
    Returns None when no nonnegative solution is found (non-starlike geometry).
    """
    m = len(points)
    mean = points.mean(axis=0)
    if np.linalg.norm(mean - target) <= 1e-13 * max(scale, 1e-300):
        return np.full(m, 1.0 / m)
    active = np.ones(m, dtype=bool)
    d = np.concatenate([[1.0], target])
    for _ in range(m + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            return None
        c_mat = np.vstack([np.ones(idx.size), points[idx].T])
        uniform = np.full(idx.size, 1.0 / idx.size)
        rhs = c_mat @ uniform - d
        nu, *_ = np.linalg.lstsq(c_mat @ c_mat.T, rhs, rcond=None)
        w_active = uniform - c_mat.T @ nu
        residual = np.linalg.norm(c_mat @ w_active - d)
        if residual > 1e-10 * max(scale, 1.0):
            return None
        w = np.zeros(m)
        w[idx] = w_active
        negative = w < -1e-13
        if not negative.any():
            return np.maximum(w, 0.0)
        active &= ~negative
    return None


def _polygon_geometry(pos: np.ndarray):
    """Area, unit normal and centroid of a planar polygon given its loop
    positions, via fan triangulation from the first vertex."""
    p0 = pos[0]
    cross = np.cross(pos[1:-1] - p0, pos[2:] - p0)
    vec_area = 0.5 * cross.sum(axis=0)
    area = np.linalg.norm(vec_area)
    if area == 0.0:
        return 0.0, np.zeros(3), pos.mean(axis=0), None
    normal = vec_area / area
    tri_signed = 0.5 * cross @ normal
    tri_centroids = (p0 + pos[1:-1] + pos[2:]) / 3.0
    centroid = (tri_signed[:, None] * tri_centroids).sum(axis=0) / tri_signed.sum()
    return float(tri_signed.sum()), normal, centroid, tri_signed


class Mesh:
    """Immutable polyhedral mesh with all derived geometry.

    Construction validates basic structure (index ranges, loop/face counts,
    planarity, positive volumes, convex weights); use :func:`validate_mesh`
    for the full invariant report.
    """

    def __init__(self, positions, face_loops, cell_faces, cell_signs):
        self.positions = np.asarray(positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise MeshError("positions must be an (n,3) array")
        self.n_vertices = len(self.positions)
        self.face_loops = [np.asarray(l, dtype=int) for l in face_loops]
        self.n_faces = len(self.face_loops)
        self.cell_faces = [np.asarray(f, dtype=int) for f in cell_faces]
        self.cell_signs = [np.asarray(s, dtype=int) for s in cell_signs]
        self.n_cells = len(self.cell_faces)
        self._check_connectivity()
        self._compute_face_geometry()
        self._build_adjacency()
        self._compute_cell_geometry()
        self.h = float(self.cell_diameter.max()) if self.n_cells else 0.0
        self._quad_cache = {}
        self._face_quad_cache = {}
        for arr in (self.positions, self.face_normal, self.face_area,
                    self.face_centroid, self.cell_volume, self.cell_centroid,
                    self.cell_diameter, self.vertex_on_boundary,
                    self.face_on_boundary):
            arr.flags.writeable = False
        for group in (self.face_loops, self.face_weights, self.face_edge_lengths,
                      self.face_edge_midpoints, self.face_edge_normals,
                      self.cell_faces, self.cell_signs, self.cell_vertices,
                      self.cell_weights):
            for arr in group:
                arr.flags.writeable = False

    # -- construction ------------------------------------------------------

    def _check_connectivity(self):
        for fid, loop in enumerate(self.face_loops):
            if len(loop) < 3:
                raise MeshError(f"face {fid} has fewer than 3 vertices")
            if loop.min() < 0 or loop.max() >= self.n_vertices:
                raise MeshError(f"dangling index: face {fid} references a missing vertex")
            if len(np.unique(loop)) != len(loop):
                raise MeshError(f"face {fid} repeats a vertex in its loop")
        for cid, (faces, signs) in enumerate(zip(self.cell_faces, self.cell_signs)):
            if len(faces) < 4:
                raise MeshError(f"cell {cid} has fewer than 4 faces")
            if len(faces) != len(signs):
                raise MeshError(f"cell {cid} has mismatched face/sign lists")
            if faces.min() < 0 or faces.max() >= self.n_faces:
                raise MeshError(f"dangling index: cell {cid} references a missing face")
            if not np.all(np.abs(signs) == 1):
                raise MeshError(f"cell {cid} has an orientation sign not in {{-1,+1}}")
            if len(np.unique(faces)) != len(faces):
                raise MeshError(f"cell {cid} repeats a face")

    def _compute_face_geometry(self):
        n_f = self.n_faces
        self.face_normal = np.zeros((n_f, 3))
        self.face_area = np.zeros(n_f)
        self.face_centroid = np.zeros((n_f, 3))
        self.face_weights = []
        self.face_edge_lengths = []
        self.face_edge_midpoints = []
        self.face_edge_normals = []
        self._face_tri_signed = []
        for fid, loop in enumerate(self.face_loops):
            pos = self.positions[loop]
            diam = _max_pairwise_distance(pos)
            area, normal, centroid, tri_signed = _polygon_geometry(pos)
            if area < DEGENERATE_AREA_RTOL * diam**2 or tri_signed is None:
                raise MeshError(f"degenerate face {fid} (vanishing area)")
            offset = np.abs((pos - centroid) @ normal).max()
            if offset > PLANARITY_RTOL * diam:
                raise MeshError(
                    f"face {fid} is non-planar (deviation {offset:.3e} exceeds "
                    f"tolerance {PLANARITY_RTOL * diam:.3e})"
                )
            self.face_normal[fid] = normal
            self.face_area[fid] = area
            self.face_centroid[fid] = centroid
            self._face_tri_signed.append(tri_signed)
            weights = _convex_weights(pos, centroid, diam)
            if weights is None:
                raise MeshError(
                    f"face {fid}: centroid is not a nonnegative combination of "
                    "its vertices"
                )
            self.face_weights.append(weights)
            nxt = np.roll(pos, -1, axis=0)
            tangents = nxt - pos
            lengths = np.linalg.norm(tangents, axis=1)
            if lengths.min() <= 0.0:
                raise MeshError(f"face {fid} has a zero-length edge")
            self.face_edge_lengths.append(lengths)
            self.face_edge_midpoints.append(0.5 * (pos + nxt))
            self.face_edge_normals.append(
                np.cross(tangents / lengths[:, None], normal)
            )

    def _build_adjacency(self):
        adj = [[] for _ in range(self.n_faces)]
        for cid, (faces, signs) in enumerate(zip(self.cell_faces, self.cell_signs)):
            for fid, sign in zip(faces, signs):
                adj[fid].append((cid, int(sign)))
        for fid, entries in enumerate(adj):
            if len(entries) == 0:
                raise MeshError(f"face {fid} is not referenced by any cell")
            if len(entries) > 2:
                raise MeshError(f"face {fid} is shared by more than two cells")
        self.face_cells = adj
        self.face_on_boundary = np.array([len(a) == 1 for a in adj])
        vb = np.zeros(self.n_vertices, dtype=bool)
        for fid in np.flatnonzero(self.face_on_boundary):
            vb[self.face_loops[fid]] = True
        self.vertex_on_boundary = vb

    def _compute_cell_geometry(self):
        n_c = self.n_cells
        self.cell_volume = np.zeros(n_c)
        self.cell_centroid = np.zeros((n_c, 3))
        self.cell_diameter = np.zeros(n_c)
        self.cell_vertices = []
        self.cell_weights = []
        for cid in range(n_c):
            verts = np.unique(
                np.concatenate([self.face_loops[f] for f in self.cell_faces[cid]])
            )
            self.cell_vertices.append(verts)
            pos = self.positions[verts]
            self.cell_diameter[cid] = _max_pairwise_distance(pos)
            apex = pos.mean(axis=0)
            vol = 0.0
            moment = np.zeros(3)
            for fid, sign in zip(self.cell_faces[cid], self.cell_signs[cid]):
                tris = self._oriented_face_triangles(fid, sign)
                d0 = tris[:, 0] - apex
                d1 = tris[:, 1] - apex
                d2 = tris[:, 2] - apex
                v6 = np.einsum("ij,ij->i", np.cross(d0, d1), d2)
                vol += v6.sum() / 6.0
                tet_centroids = (apex + tris.sum(axis=1)) / 4.0
                moment += (v6[:, None] / 6.0 * tet_centroids).sum(axis=0)
            if not vol > 0.0:
                raise MeshError(
                    f"cell {cid}: signed faces do not enclose positive volume"
                )
            self.cell_volume[cid] = vol
            self.cell_centroid[cid] = moment / vol
            weights = _convex_weights(pos, self.cell_centroid[cid],
                                      self.cell_diameter[cid])
            if weights is None:
                raise MeshError(
                    f"cell {cid}: centroid is not a nonnegative combination of "
                    "its vertices (non-starlike cell)"
                )
            self.cell_weights.append(weights)

    def _oriented_face_triangles(self, fid: int, sign: int) -> np.ndarray:
        """Fan triangles of a face, ordered so their normal is the outward
        normal of the adjacent cell with orientation `sign`."""
        loop = self.face_loops[fid]
        pos = self.positions[loop if sign > 0 else loop[::-1]]
        m = len(pos)
        tris = np.empty((m - 2, 3, 3))
        tris[:, 0] = pos[0]
        tris[:, 1] = pos[1:-1]
        tris[:, 2] = pos[2:]
        return tris

    # -- accessors ----------------------------------------------------------

    def vertex(self, vid: int) -> Vertex:
        return Vertex(vid, self.positions[vid], bool(self.vertex_on_boundary[vid]))

    def face(self, fid: int) -> Face:
        return Face(
            fid,
            self.face_loops[fid],
            self.face_normal[fid],
            float(self.face_area[fid]),
            self.face_centroid[fid],
            self.face_weights[fid],
            tuple(c for c, _ in self.face_cells[fid]),
            bool(self.face_on_boundary[fid]),
        )

    def cell(self, cid: int) -> Cell:
        return Cell(
            cid,
            self.cell_faces[cid],
            self.cell_signs[cid],
            self.cell_vertices[cid],
            float(self.cell_volume[cid]),
            self.cell_centroid[cid],
            float(self.cell_diameter[cid]),
            self.cell_weights[cid],
        )

    def cell_outward_normal(self, cid: int, fid: int) -> np.ndarray:
        sign = self.cell_sign_of(cid, fid)
        return sign * self.face_normal[fid]

    def cell_sign_of(self, cid: int, fid: int) -> int:
        pos = np.flatnonzero(self.cell_faces[cid] == fid)
        if pos.size != 1:
            raise MeshError(f"face {fid} not on cell {cid}")
        return int(self.cell_signs[cid][pos[0]])

    def boundary_outward_normal(self, fid: int) -> np.ndarray:
        if not self.face_on_boundary[fid]:
            raise MeshError(f"face {fid} is not a boundary face")
        cid, sign = self.face_cells[fid][0]
        return sign * self.face_normal[fid]

    # -- quadrature ---------------------------------------------------------

    def face_quadrature(self, fid: int, degree: int):
        """Points and absolute weights integrating over face `fid`."""
        key = (fid, degree)
        cached = self._face_quad_cache.get(key)
        if cached is not None:
            return cached
        ref_pts, ref_w = triangle_rule(degree)
        loop = self.face_loops[fid]
        pos = self.positions[loop]
        signed = self._face_tri_signed[fid]
        pts = []
        wts = []
        for t in range(len(loop) - 2):
            pts.append(map_triangle(ref_pts, pos[0], pos[t + 1], pos[t + 2]))
            wts.append(ref_w * signed[t])
        result = (np.vstack(pts), np.concatenate(wts))
        self._face_quad_cache[key] = result
        return result

    def cell_quadrature(self, cid: int, degree: int):
        """Points and absolute weights integrating over cell `cid`, using the
        decomposition into sub-tets (face fan triangle + cell centroid)."""
        key = (cid, degree)
        cached = self._quad_cache.get(key)
        if cached is not None:
            return cached
        ref_pts, ref_w = tet_rule(degree)
        apex = self.cell_centroid[cid]
        pts = []
        wts = []
        for fid, sign in zip(self.cell_faces[cid], self.cell_signs[cid]):
            for tri in self._oriented_face_triangles(fid, sign):
                verts = np.vstack([tri, apex])
                v6 = np.dot(np.cross(tri[1] - apex, tri[2] - apex), tri[0] - apex)
                pts.append(map_tet(ref_pts, verts))
                wts.append(ref_w * (v6 / 6.0))
        result = (np.vstack(pts), np.concatenate(wts))
        self._quad_cache[key] = result
        return result


def _max_pairwise_distance(pos: np.ndarray) -> float:
    diff = pos[:, None, :] - pos[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=2)).max())


def compute_geometry(positions, face_loops, cell_faces, cell_signs) -> Mesh:
    """Build a fully connected Mesh with all derived geometric fields."""
    return Mesh(positions, face_loops, cell_faces, cell_signs)


# -- POLYMESH format ---------------------------------------------------------


def _meaningful_lines(stream: TextIO):
    for raw in stream:
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def parse_polymesh(source) -> Mesh:
    """Parse the POLYMESH text format from a string, path-free stream, or
    iterable of lines."""
    if isinstance(source, str):
        stream = io.StringIO(source)
    else:
        stream = source
    lines = _meaningful_lines(stream)

    def next_line(what):
        try:
            return next(lines)
        except StopIteration:
            raise MeshFormatError(f"unexpected end of input while reading {what}")

    header = next_line("header").split()
    if header != ["POLYMESH", "1"]:
        raise MeshFormatError("malformed header: expected 'POLYMESH 1'")
    counts = next_line("counts").split()
    if len(counts) != 3:
        raise MeshFormatError("malformed counts line: expected '<n_v> <n_f> <n_c>'")
    try:
        n_v, n_f, n_c = (int(c) for c in counts)
    except ValueError:
        raise MeshFormatError("malformed counts line: non-integer count")
    if n_v < 0 or n_f < 0 or n_c < 0:
        raise MeshFormatError("malformed counts line: negative count")

    positions = np.empty((n_v, 3))
    for i in range(n_v):
        parts = next_line(f"vertex {i}").split()
        if len(parts) != 3:
            raise MeshFormatError(f"vertex {i}: expected 3 coordinates")
        try:
            positions[i] = [float(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"vertex {i}: malformed coordinate")

    face_loops = []
    for i in range(n_f):
        parts = next_line(f"face {i}").split()
        try:
            ints = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"face {i}: malformed index")
        if not ints or ints[0] != len(ints) - 1:
            raise MeshFormatError(f"face {i}: count does not match vertex list")
        if ints[0] < 3:
            raise MeshError(f"face {i} has fewer than 3 vertices")
        loop = np.array(ints[1:], dtype=int)
        if loop.min() < 0 or loop.max() >= n_v:
            raise MeshError(f"dangling index: face {i} references a missing vertex")
        face_loops.append(loop)

    cell_faces = []
    cell_signs = []
    for i in range(n_c):
        parts = next_line(f"cell {i}").split()
        try:
            ints = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"cell {i}: malformed index")
        if not ints or ints[0] != len(ints) - 1:
            raise MeshFormatError(f"cell {i}: count does not match face list")
        if ints[0] < 4:
            raise MeshError(f"cell {i} has fewer than 4 faces")
        signed = np.array(ints[1:], dtype=int)
        if np.any(signed == 0):
            raise MeshFormatError(f"cell {i}: face ids are signed and 1-based")
        faces = np.abs(signed) - 1
        if faces.max() >= n_f:
            raise MeshError(f"dangling index: cell {i} references a missing face")
        cell_faces.append(faces)
        cell_signs.append(np.sign(signed))

    leftover = next(lines, None)
    if leftover is not None:
        raise MeshFormatError(f"trailing content after cell list: {leftover!r}")
    return compute_geometry(positions, face_loops, cell_faces, cell_signs)


def write_polymesh(mesh: Mesh, stream: TextIO | None = None) -> str:
    """Serialize a mesh to the POLYMESH format (round-trip exact)."""
    out = io.StringIO()
    out.write("POLYMESH 1\n")
    out.write(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_cells}\n")
    for p in mesh.positions:
        out.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
    for loop in mesh.face_loops:
        out.write(" ".join([str(len(loop))] + [str(v) for v in loop]) + "\n")
    for faces, signs in zip(mesh.cell_faces, mesh.cell_signs):
        ids = [str(int(s) * (int(f) + 1)) for f, s in zip(faces, signs)]
        out.write(" ".join([str(len(faces))] + ids) + "\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text


# -- structured generators ----------------------------------------------------


def generate_structured_mesh(kind: str, n: int, perturb: float = 0.0,
                             seed: int = DEFAULT_SEED) -> Mesh:
    """Structured mesh of the unit cube (0,1)^3.

    kind='hex': n^3 cube cells.  kind='tet': each cube split into 6
    tetrahedra sharing the main diagonal, so neighbor faces match.  For tet
    meshes, perturb>0 jitters every interior vertex componentwise by a
    uniform offset in (-d, d) with d = perturb/(2n), using the given seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= perturb < 1.0:
        raise ValueError("perturb must be in [0,1)")
    if kind == "hex":
        if perturb > 0.0:
            raise ValueError("perturb is only supported for tet meshes "
                             "(hex faces must stay planar)")
        return _generate_hex(n)
    if kind == "tet":
        return _generate_tet(n, perturb, seed)
    raise ValueError(f"unknown mesh kind {kind!r}")


def _grid_positions(n: int) -> np.ndarray:
    side = np.linspace(0.0, 1.0, n + 1)
    z, y, x = np.meshgrid(side, side, side, indexing="ij")
    return np.column_stack([x.ravel(), y.ravel(), z.ravel()])


def _grid_index(n: int, i, j, k):
    return i + (n + 1) * (j + (n + 1) * k)


def _generate_hex(n: int) -> Mesh:
    positions = _grid_positions(n)
    face_loops = []
    fx = np.empty((n + 1, n, n), dtype=int)
    fy = np.empty((n, n + 1, n), dtype=int)
    fz = np.empty((n, n, n + 1), dtype=int)
    for i in range(n + 1):
        for j in range(n):
            for k in range(n):
                fx[i, j, k] = len(face_loops)
                face_loops.append([
                    _grid_index(n, i, j, k), _grid_index(n, i, j + 1, k),
                    _grid_index(n, i, j + 1, k + 1), _grid_index(n, i, j, k + 1),
                ])
    for j in range(n + 1):
        for i in range(n):
            for k in range(n):
                fy[i, j, k] = len(face_loops)
                face_loops.append([
                    _grid_index(n, i, j, k), _grid_index(n, i, j, k + 1),
                    _grid_index(n, i + 1, j, k + 1), _grid_index(n, i + 1, j, k),
                ])
    for k in range(n + 1):
        for i in range(n):
            for j in range(n):
                fz[i, j, k] = len(face_loops)
                face_loops.append([
                    _grid_index(n, i, j, k), _grid_index(n, i + 1, j, k),
                    _grid_index(n, i + 1, j + 1, k), _grid_index(n, i, j + 1, k),
                ])
    cell_faces = []
    cell_signs = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                cell_faces.append([
                    fx[i, j, k], fx[i + 1, j, k],
                    fy[i, j, k], fy[i, j + 1, k],
                    fz[i, j, k], fz[i, j, k + 1],
                ])
                cell_signs.append([-1, 1, -1, 1, -1, 1])
    return compute_geometry(positions, face_loops, cell_faces, cell_signs)


_KUHN_PERMUTATIONS = (
    (0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0),
)


def _generate_tet(n: int, perturb: float, seed: int) -> Mesh:
    positions = _grid_positions(n)
    if perturb > 0.0:
        rng = np.random.default_rng(seed)
        interior = np.all((positions > 0.0) & (positions < 1.0), axis=1)
        delta = perturb * (1.0 / n) / 2.0
        offsets = rng.uniform(-delta, delta, size=(int(interior.sum()), 3))
        positions = positions.copy()
        positions[interior] += offsets

    tets = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                base = np.array([i, j, k])
                for perm in _KUHN_PERMUTATIONS:
                    corners = [base.copy()]
                    cur = base.copy()
                    for axis in perm:
                        cur = cur.copy()
                        cur[axis] += 1
                        corners.append(cur)
                    tets.append([_grid_index(n, *c) for c in corners])

    face_ids: dict = {}
    face_loops = []
    cell_faces = []
    cell_signs = []
    for tet in tets:
        faces = []
        signs = []
        for local in ((1, 2, 3, 0), (0, 2, 3, 1), (0, 1, 3, 2), (0, 1, 2, 3)):
            tri = [tet[local[0]], tet[local[1]], tet[local[2]]]
            opposite = tet[local[3]]
            a, b, c = positions[tri]
            outward = np.dot(np.cross(b - a, c - a), positions[opposite] - a) < 0
            loop = tri if outward else [tri[0], tri[2], tri[1]]
            key = frozenset(tri)
            fid = face_ids.get(key)
            if fid is None:
                fid = len(face_loops)
                face_ids[key] = fid
                face_loops.append(loop)
                signs.append(1)
            else:
                signs.append(-1)
            faces.append(fid)
        cell_faces.append(faces)
        cell_signs.append(signs)
    return compute_geometry(positions, face_loops, cell_faces, cell_signs)


# -- validation ---------------------------------------------------------------


def validate_mesh(mesh: Mesh) -> ValidationReport:
    """Check every mesh invariant; report violations and regularity proxies
    (min/max of h_K^3/|K| and of face-area/h_K^2)."""
    report = ValidationReport()
    v = report.violations
    h = mesh.h

    referenced = np.zeros(mesh.n_faces, dtype=bool)
    for cid in range(mesh.n_cells):
        referenced[mesh.cell_faces[cid]] = True
    for fid in np.flatnonzero(~referenced):
        v.append(f"face {fid} not referenced by any cell")

    for fid in range(mesh.n_faces):
        entries = mesh.face_cells[fid]
        if mesh.face_on_boundary[fid] != (len(entries) == 1):
            v.append(f"face {fid}: boundary flag inconsistent with adjacency")
        if len(entries) == 2 and entries[0][1] * entries[1][1] != -1:
            v.append(f"face {fid}: interior face without opposite orientation signs")
        normal = mesh.face_normal[fid]
        if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
            v.append(f"face {fid}: normal is not unit length")
        loop_pos = mesh.positions[mesh.face_loops[fid]]
        diam = _max_pairwise_distance(loop_pos)
        if np.abs((loop_pos - mesh.face_centroid[fid]) @ normal).max() > PLANARITY_RTOL * diam:
            v.append(f"face {fid}: loop vertices are not coplanar")
        w = mesh.face_weights[fid]
        if w.min() < -1e-14 or abs(w.sum() - 1.0) > 1e-12:
            v.append(f"face {fid}: invalid convex weights")
        recon = w @ loop_pos
        if np.linalg.norm(recon - mesh.face_centroid[fid]) > 1e-12 * max(diam, 1.0):
            v.append(f"face {fid}: weights do not reproduce the centroid")
        edge_sum = mesh.face_edge_lengths[fid] @ mesh.face_edge_normals[fid]
        if np.linalg.norm(edge_sum) > 1e-12 * max(h, 1.0):
            v.append(f"face {fid}: closed-polygon identity violated")

    vb = np.zeros(mesh.n_vertices, dtype=bool)
    for fid in np.flatnonzero(mesh.face_on_boundary):
        vb[mesh.face_loops[fid]] = True
    if not np.array_equal(vb, mesh.vertex_on_boundary):
        bad = np.flatnonzero(vb != mesh.vertex_on_boundary)
        v.append(f"vertex {bad[0]}: boundary flag inconsistent")

    proxy_cell = []
    proxy_face = []
    for cid in range(mesh.n_cells):
        hk = mesh.cell_diameter[cid]
        vol = mesh.cell_volume[cid]
        if not vol > 0.0:
            v.append(f"cell {cid}: non-positive volume")
            continue
        proxy_cell.append(hk**3 / vol)
        surface = np.zeros(3)
        for fid, sign in zip(mesh.cell_faces[cid], mesh.cell_signs[cid]):
            surface += mesh.face_area[fid] * sign * mesh.face_normal[fid]
            proxy_face.append(mesh.face_area[fid] / hk**2)
        if np.linalg.norm(surface) > 1e-12 * hk**2:
            v.append(f"cell {cid}: closed-surface identity violated")
        pos = mesh.positions[mesh.cell_vertices[cid]]
        if abs(_max_pairwise_distance(pos) - hk) > 1e-12 * max(hk, 1.0):
            v.append(f"cell {cid}: stored diameter mismatch")
        w = mesh.cell_weights[cid]
        if w.min() < -1e-14 or abs(w.sum() - 1.0) > 1e-12:
            v.append(f"cell {cid}: invalid convex weights")
        recon = w @ pos
        if np.linalg.norm(recon - mesh.cell_centroid[cid]) > 1e-12 * max(hk, 1.0):
            v.append(f"cell {cid}: weights do not reproduce the centroid")

    if proxy_cell:
        report.proxies["cell_regularity_min"] = float(np.min(proxy_cell))
        report.proxies["cell_regularity_max"] = float(np.max(proxy_cell))
    if proxy_face:
        report.proxies["face_regularity_min"] = float(np.min(proxy_face))
        report.proxies["face_regularity_max"] = float(np.max(proxy_face))
    return report
