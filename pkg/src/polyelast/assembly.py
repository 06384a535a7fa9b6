"""Global system assembly: stiffness, stabilization, loads, Dirichlet lifting.

The bilinear form of the scheme is, cell by cell,

    |K| * (2*mu * strain(u):strain(v) + lambda * div(u)*div(v)) + mu1 * S_K(u,v)

and the volume load acts through the piecewise-constant displacement
reconstruction, so each cell vertex receives its convex weight times the cell
integral of the force and bubbles receive no volume load.  Dirichlet values
are imposed by lifting: constrained DOFs are filled from the boundary data
(vertex point values, interpolator bubble moments) and eliminated from the
reduced system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .mesh import Mesh
from .space import (
    DofMap,
    MaterialParams,
    cell_gradient_operator,
    cell_mean_operator,
    divergence_operator,
    face_bubble_moments,
    stabilization_local,
    strain_operator,
)


class AssemblyError(Exception):
    """Ill-posed or inconsistent assembly input."""


@dataclass
class BoundaryConditions:
    """Per-face boundary tags plus the associated data.

    `dirichlet_faces` is a boolean mask over all faces selecting the Dirichlet
    part of the boundary; the remaining boundary faces are Neumann.
    `dirichlet_data` maps points (n,3) to displacements (n,3) (None = zero);
    `neumann_data` maps (points, outward_unit_normal) to tractions (None =
    traction-free).
    """

    dirichlet_faces: np.ndarray
    dirichlet_data: Callable | None = None
    neumann_data: Callable | None = None

    @classmethod
    def all_dirichlet(cls, mesh: Mesh, data: Callable | None = None):
        return cls(mesh.face_on_boundary.copy(), dirichlet_data=data)

    @classmethod
    def from_predicate(cls, mesh: Mesh, dirichlet_predicate: Callable[[int], bool],
                       dirichlet_data: Callable | None = None,
                       neumann_data: Callable | None = None):
        """Tag each boundary face Dirichlet iff the predicate holds for it."""
        mask = np.zeros(mesh.n_faces, dtype=bool)
        for fid in np.flatnonzero(mesh.face_on_boundary):
            mask[fid] = bool(dirichlet_predicate(fid))
        return cls(mask, dirichlet_data, neumann_data)

    def check(self, mesh: Mesh):
        mask = np.asarray(self.dirichlet_faces, dtype=bool)
        if mask.shape != (mesh.n_faces,):
            raise AssemblyError("dirichlet_faces mask has the wrong length")
        if np.any(mask & ~mesh.face_on_boundary):
            raise AssemblyError("Dirichlet tag on an interior face")

    def neumann_face_ids(self, mesh: Mesh) -> np.ndarray:
        return np.flatnonzero(mesh.face_on_boundary & ~self.dirichlet_faces)


@dataclass
class SparseSystem:
    """Reduced SPD system with its lifting.

    `matrix` is the free-free block in CSR form, `load` the reduced right-hand
    side, `lifting` the full-length vector holding the Dirichlet DOF values.
    `full_matrix` keeps the unconstrained operator for energy checks and for
    recovering reduced right-hand sides.
    """

    matrix: sp.csr_matrix
    load: np.ndarray
    lifting: np.ndarray
    free_indices: np.ndarray
    constrained_indices: np.ndarray
    dofmap: DofMap
    full_matrix: sp.csr_matrix
    full_load: np.ndarray

    @property
    def n_free(self) -> int:
        return len(self.free_indices)


def local_matrix(mesh: Mesh, cid: int, material: MaterialParams,
                 dofmap: DofMap) -> np.ndarray:
    """Local stiffness + stabilization matrix over the cell DOFs."""
    grad_op = cell_gradient_operator(mesh, cid)
    strain_op = strain_operator(grad_op)
    div_row = divergence_operator(grad_op)
    vol = mesh.cell_volume[cid]
    mat = vol * (2.0 * material.mu * strain_op.T @ strain_op
                 + material.lam * np.outer(div_row, div_row))
    mat += material.stabilization_scale * stabilization_local(mesh, cid, dofmap)
    return mat


def local_load(mesh: Mesh, cid: int, body_force: Callable | None,
               quad_degree: int = 4) -> np.ndarray:
    """Local volume load: each vertex receives its convex weight times the
    cell integral of the force; bubbles receive zero."""
    n_loc = 3 * len(mesh.cell_vertices[cid]) + len(mesh.cell_faces[cid])
    if body_force is None:
        return np.zeros(n_loc)
    pts, wts = mesh.cell_quadrature(cid, quad_degree)
    cell_force = wts @ np.asarray(body_force(pts), dtype=float)
    return cell_mean_operator(mesh, cid).T @ cell_force


def local_system(mesh: Mesh, cid: int, material: MaterialParams, dofmap: DofMap,
                 body_force: Callable | None, quad_degree: int = 4):
    """Local (matrix, load) pair over the cell DOFs."""
    return (local_matrix(mesh, cid, material, dofmap),
            local_load(mesh, cid, body_force, quad_degree))


def neumann_load(mesh: Mesh, fid: int, traction: Callable, dofmap: DofMap,
                 quad_degree: int = 4):
    """Surface-load contributions of one Neumann face.

    Vertex DOFs receive the face integral of the traction against the affine
    face reconstruction; the face bubble receives the integral of the normal
    traction component.  Returns (global dof indices, values).
    """
    if not mesh.face_on_boundary[fid]:
        raise AssemblyError(f"face {fid} is not a boundary face")
    loop = mesh.face_loops[fid]
    normal = mesh.face_normal[fid]
    outward = mesh.boundary_outward_normal(fid)
    pts, wts = mesh.face_quadrature(fid, quad_degree)
    g = np.asarray(traction(pts, outward), dtype=float)
    g_total = wts @ g
    # int g . (grad_sigma v)(x - centroid) = G : grad_sigma v with
    # G = int g tensor (x - centroid)
    g_moment = (g * wts[:, None]).T @ (pts - mesh.face_centroid[fid])
    area = mesh.face_area[fid]
    m = len(loop)
    vertex_loads = np.outer(mesh.face_weights[fid], g_total)
    edge_n = mesh.face_edge_normals[fid]
    edge_l = mesh.face_edge_lengths[fid]
    for e in range(m):
        contrib = (edge_l[e] / (2.0 * area)) * (g_moment @ edge_n[e])
        vertex_loads[e] += contrib
        vertex_loads[(e + 1) % m] += contrib
    dofs = np.concatenate([(3 * loop[:, None] + np.arange(3)).ravel(),
                           [dofmap.bubble_index(fid)]])
    values = np.concatenate([vertex_loads.ravel(), [(g @ normal) @ wts]])
    return dofs, values


def assemble_matrix(mesh: Mesh, dofmap: DofMap,
                    material: MaterialParams) -> sp.csr_matrix:
    """Unconstrained global matrix, accumulated in ascending cell order."""
    rows = []
    cols = []
    vals = []
    for cid in range(mesh.n_cells):
        dofs = dofmap.cell_dofs(cid)
        mat = local_matrix(mesh, cid, material, dofmap)
        grid = np.meshgrid(dofs, dofs, indexing="ij")
        rows.append(grid[0].ravel())
        cols.append(grid[1].ravel())
        vals.append(mat.ravel())
    n = dofmap.vector_size
    coo = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return coo.tocsr()


def assemble_load(mesh: Mesh, dofmap: DofMap, bcs: BoundaryConditions,
                  body_force: Callable | None, quad_degree: int = 4) -> np.ndarray:
    """Unconstrained load vector: volume force plus Neumann surface loads."""
    load = np.zeros(dofmap.vector_size)
    if body_force is not None:
        for cid in range(mesh.n_cells):
            load[dofmap.cell_dofs(cid)] += local_load(mesh, cid, body_force,
                                                      quad_degree)
    if bcs.neumann_data is not None:
        for fid in bcs.neumann_face_ids(mesh):
            dofs, values = neumann_load(mesh, fid, bcs.neumann_data, dofmap,
                                        quad_degree)
            load[dofs] += values
    return load


def dirichlet_lifting(mesh: Mesh, dofmap: DofMap,
                      bcs: BoundaryConditions) -> np.ndarray:
    """Full-length vector with the Dirichlet DOF values (zero elsewhere):
    vertex DOFs take the data point values, Dirichlet-face bubbles take the
    interpolator bubble moments of the data."""
    lifting = np.zeros(dofmap.vector_size)
    if bcs.dirichlet_data is None:
        return lifting
    vertex_values = np.asarray(bcs.dirichlet_data(mesh.positions), dtype=float)
    for vid in np.flatnonzero(dofmap.dirichlet_vertices):
        lifting[dofmap.vertex_slice(vid)] = vertex_values[vid]
    if dofmap.bubbles_enabled:
        face_ids = np.flatnonzero(dofmap.dirichlet_faces)
        moments = face_bubble_moments(mesh, bcs.dirichlet_data, face_ids,
                                      vertex_values)
        for fid, val in zip(face_ids, moments):
            lifting[dofmap.bubble_index(fid)] = val
    return lifting


def _check_dirichlet_coverage(mesh: Mesh, dofmap: DofMap):
    """Every connected component of the mesh must contain a Dirichlet vertex,
    otherwise the reduced system is singular."""
    rows = []
    cols = []
    for cid in range(mesh.n_cells):
        verts = mesh.cell_vertices[cid]
        rows.extend(verts[:-1])
        cols.extend(verts[1:])
    graph = sp.coo_matrix(
        (np.ones(len(rows)), (rows, cols)),
        shape=(mesh.n_vertices, mesh.n_vertices),
    )
    n_comp, labels = connected_components(graph, directed=False)
    constrained = dofmap.dirichlet_vertices
    for comp in range(n_comp):
        if not constrained[labels == comp].any():
            raise AssemblyError(
                f"no Dirichlet vertex in connected component {comp}: "
                "the reduced system is singular"
            )


def reduce_system(full_matrix: sp.csr_matrix, full_load: np.ndarray,
                  lifting: np.ndarray, dofmap: DofMap) -> SparseSystem:
    """Eliminate constrained DOFs by lifting."""
    free = dofmap.free_indices
    reduced = full_matrix[free][:, free].tocsr()
    rhs = full_load[free] - (full_matrix @ lifting)[free]
    return SparseSystem(
        matrix=reduced,
        load=rhs,
        lifting=lifting,
        free_indices=free,
        constrained_indices=dofmap.constrained_indices,
        dofmap=dofmap,
        full_matrix=full_matrix,
        full_load=full_load,
    )


def assemble(mesh: Mesh, dofmap: DofMap, material: MaterialParams,
             bcs: BoundaryConditions, body_force: Callable | None = None,
             quad_degree: int = 4) -> SparseSystem:
    """Assemble the reduced linear system of the scheme."""
    bcs.check(mesh)
    if not np.array_equal(dofmap.dirichlet_faces, np.asarray(bcs.dirichlet_faces,
                                                             dtype=bool)):
        raise AssemblyError("DofMap and BoundaryConditions disagree on the "
                            "Dirichlet faces")
    _check_dirichlet_coverage(mesh, dofmap)
    full_matrix = assemble_matrix(mesh, dofmap, material)
    full_load = assemble_load(mesh, dofmap, bcs, body_force, quad_degree)
    lifting = dirichlet_lifting(mesh, dofmap, bcs)
    if not np.isfinite(lifting).all() or not np.isfinite(full_load).all():
        raise AssemblyError("non-finite value in boundary data or load")
    return reduce_system(full_matrix, full_load, lifting, dofmap)
