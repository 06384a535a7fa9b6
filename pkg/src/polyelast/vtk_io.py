"""Legacy-ASCII VTK output with polyhedral cells (face-stream, cell type 42)."""

from __future__ import annotations

import io

import numpy as np

from .mesh import Mesh

VTK_POLYHEDRON = 42


def vtk_unstructured_grid(mesh: Mesh,
                          point_vectors: dict[str, np.ndarray] | None = None,
                          cell_scalars: dict[str, np.ndarray] | None = None,
                          title: str = "polyelast output") -> str:
    """Serialize a mesh plus fields as a legacy VTK unstructured grid.

    Every cell is written as a VTK_POLYHEDRON with face-stream connectivity:
    the entry for a cell is  [n_ints, n_faces, n_pts_0, ids..., n_pts_1, ...].
    """
    out = io.StringIO()
    out.write("# vtk DataFile Version 2.0\n")
    out.write(f"{title}\n")
    out.write("ASCII\n")
    out.write("DATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {mesh.n_vertices} double\n")
    for p in mesh.positions:
        out.write(f"{p[0]:.16g} {p[1]:.16g} {p[2]:.16g}\n")

    streams = []
    total = 0
    for cid in range(mesh.n_cells):
        stream = [len(mesh.cell_faces[cid])]
        for fid in mesh.cell_faces[cid]:
            loop = mesh.face_loops[fid]
            stream.append(len(loop))
            stream.extend(int(v) for v in loop)
        streams.append(stream)
        total += len(stream) + 1
    out.write(f"CELLS {mesh.n_cells} {total}\n")
    for stream in streams:
        out.write(" ".join(str(v) for v in [len(stream)] + stream) + "\n")
    out.write(f"CELL_TYPES {mesh.n_cells}\n")
    for _ in range(mesh.n_cells):
        out.write(f"{VTK_POLYHEDRON}\n")

    if point_vectors:
        out.write(f"POINT_DATA {mesh.n_vertices}\n")
        for name, data in point_vectors.items():
            data = np.asarray(data, dtype=float)
            if data.shape != (mesh.n_vertices, 3):
                raise ValueError(f"point vector field {name!r} has wrong shape")
            out.write(f"VECTORS {name} double\n")
            for row in data:
                out.write(f"{row[0]:.16g} {row[1]:.16g} {row[2]:.16g}\n")
    if cell_scalars:
        out.write(f"CELL_DATA {mesh.n_cells}\n")
        for name, data in cell_scalars.items():
            data = np.asarray(data, dtype=float)
            if data.shape != (mesh.n_cells,):
                raise ValueError(f"cell scalar field {name!r} has wrong shape")
            out.write(f"SCALARS {name} double 1\n")
            out.write("LOOKUP_TABLE default\n")
            for v in data:
                out.write(f"{v:.16g}\n")
    return out.getvalue()


def write_vtk(path: str, mesh: Mesh,
              point_vectors: dict[str, np.ndarray] | None = None,
              cell_scalars: dict[str, np.ndarray] | None = None,
              title: str = "polyelast output") -> None:
    text = vtk_unstructured_grid(mesh, point_vectors, cell_scalars, title)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
