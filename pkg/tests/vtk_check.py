"""Validating reader for legacy ASCII VTK unstructured grids with polyhedral
face-stream cells.  Written independently of the production writer so the
format tests have a second implementation to check against."""

import numpy as np


def parse_legacy_vtk(text):
    lines = text.splitlines()
    assert lines[0].startswith("# vtk DataFile Version")
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    idx = 4
    tag, n_pts, dtype = lines[idx].split()
    assert tag == "POINTS" and dtype in ("double", "float")
    n_pts = int(n_pts)
    idx += 1
    points = np.array([[float(v) for v in lines[idx + i].split()]
                       for i in range(n_pts)])
    assert points.shape == (n_pts, 3)
    idx += n_pts
    tag, n_cells, total = lines[idx].split()
    assert tag == "CELLS"
    n_cells, total = int(n_cells), int(total)
    idx += 1
    consumed = 0
    cells = []
    for c in range(n_cells):
        ints = [int(v) for v in lines[idx + c].split()]
        size, stream = ints[0], ints[1:]
        assert size == len(stream)
        consumed += size + 1
        n_faces = stream[0]
        pos = 1
        faces = []
        for _ in range(n_faces):
            n_loop = stream[pos]
            loop = stream[pos + 1: pos + 1 + n_loop]
            assert len(loop) == n_loop
            assert all(0 <= v < n_pts for v in loop)
            faces.append(loop)
            pos += 1 + n_loop
        assert pos == len(stream)
        cells.append(faces)
    assert consumed == total
    idx += n_cells
    assert lines[idx] == f"CELL_TYPES {n_cells}"
    idx += 1
    types = [int(lines[idx + i]) for i in range(n_cells)]
    idx += n_cells
    data = {"points": points, "cells": cells, "types": types}
    while idx < len(lines):
        head = lines[idx].split()
        if head[0] == "POINT_DATA":
            assert int(head[1]) == n_pts
            idx += 1
        elif head[0] == "CELL_DATA":
            assert int(head[1]) == n_cells
            idx += 1
        elif head[0] == "VECTORS":
            name = head[1]
            rows = np.array([[float(v) for v in lines[idx + 1 + i].split()]
                             for i in range(n_pts)])
            data[name] = rows
            idx += 1 + n_pts
        elif head[0] == "SCALARS":
            name = head[1]
            assert lines[idx + 1].startswith("LOOKUP_TABLE")
            vals = np.array([float(lines[idx + 2 + i]) for i in range(n_cells)])
            data[name] = vals
            idx += 2 + n_cells
        else:
            raise AssertionError(f"unexpected section {lines[idx]!r}")
    return data
