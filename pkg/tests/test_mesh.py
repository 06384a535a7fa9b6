import math

import numpy as np
import pytest

from polyelast.mesh import (
    MeshError,
    MeshFormatError,
    generate_structured_mesh,
    parse_polymesh,
    validate_mesh,
    write_polymesh,
)

UNIT_CUBE = """\
POLYMESH 1
8 6 1
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
4 0 3 2 1
4 4 5 6 7
4 0 1 5 4
4 3 7 6 2
4 0 4 7 3
4 1 2 6 5
6 1 2 3 4 5 6
"""


def test_parse_unit_cube():
    mesh = parse_polymesh(UNIT_CUBE)
    assert mesh.n_vertices == 8
    assert mesh.n_faces == 6
    assert mesh.n_cells == 1
    assert mesh.cell_volume[0] == pytest.approx(1.0, abs=1e-14)
    assert mesh.cell_diameter[0] == pytest.approx(math.sqrt(3.0))
    assert mesh.cell_centroid[0] == pytest.approx([0.5, 0.5, 0.5])
    assert mesh.h == pytest.approx(math.sqrt(3.0))
    # comments and blank lines are ignored
    noisy = "# header comment\n" + UNIT_CUBE.replace(
        "0 0 0", "0 0 0  # origin\n\n"
    )
    mesh2 = parse_polymesh(noisy)
    assert mesh2.n_cells == 1


def test_parse_dangling_index():
    bad = UNIT_CUBE.replace("4 1 2 6 5", "4 1 2 6 9")
    with pytest.raises(MeshError, match="dangling index"):
        parse_polymesh(bad)


def test_parse_malformed_header_and_counts():
    with pytest.raises(MeshFormatError, match="header"):
        parse_polymesh("POLYMESH 2\n1 1 1\n")
    with pytest.raises(MeshFormatError):
        parse_polymesh("POLYMESH 1\n8 6\n")
    with pytest.raises(MeshFormatError, match="end of input"):
        parse_polymesh("POLYMESH 1\n8 6 1\n0 0 0\n")


def test_parse_face_with_too_few_vertices():
    bad = UNIT_CUBE.replace("4 0 3 2 1", "2 0 3")
    with pytest.raises(MeshError, match="fewer than 3"):
        parse_polymesh(bad)


def test_parse_cell_with_too_few_faces():
    bad = UNIT_CUBE.replace("6 1 2 3 4 5 6", "3 1 2 3")
    with pytest.raises(MeshError, match="fewer than 4"):
        parse_polymesh(bad)


def test_parse_nonplanar_face_rejected():
    bad = UNIT_CUBE.replace("1 1 1\n", "1 1 1.1\n", 1)
    with pytest.raises(MeshError, match="non-planar"):
        parse_polymesh(bad)


def test_parse_negative_volume_cell():
    # all faces flipped: signed faces enclose negative volume
    bad = UNIT_CUBE.replace("6 1 2 3 4 5 6", "6 -1 -2 -3 -4 -5 -6")
    with pytest.raises(MeshError, match="positive volume"):
        parse_polymesh(bad)


def test_parse_2x2x2_hex_counts():
    text = write_polymesh(generate_structured_mesh("hex", 2))
    mesh = parse_polymesh(text)
    assert mesh.n_cells == 8
    assert mesh.n_faces == 36
    assert mesh.n_vertices == 27
    assert mesh.h == pytest.approx(math.sqrt(3.0) / 2.0)


def test_face_geometry_unit_square():
    mesh = generate_structured_mesh("hex", 1)
    # top face of the unit cube: loop (0,0,1),(1,0,1),(1,1,1),(0,1,1)
    top = [f for f in range(mesh.n_faces)
           if np.allclose(mesh.face_centroid[f], [0.5, 0.5, 1.0])]
    assert len(top) == 1
    fid = top[0]
    assert mesh.face_normal[fid] == pytest.approx([0.0, 0.0, 1.0])
    assert mesh.face_area[fid] == pytest.approx(1.0)
    assert mesh.face_weights[fid] == pytest.approx([0.25] * 4)
    # first edge runs along +x: in-plane outward normal is -y
    first_mid = mesh.face_edge_midpoints[fid][0]
    assert first_mid == pytest.approx([0.5, 0.0, 1.0])
    assert mesh.face_edge_normals[fid][0] == pytest.approx([0.0, -1.0, 0.0])


def test_closed_surface_identity_unit_cube():
    mesh = generate_structured_mesh("hex", 1)
    total = np.zeros(3)
    for fid, sign in zip(mesh.cell_faces[0], mesh.cell_signs[0]):
        total += mesh.face_area[fid] * sign * mesh.face_normal[fid]
    assert np.linalg.norm(total) == pytest.approx(0.0, abs=1e-14)


def test_generate_hex_1_is_single_cube():
    mesh = generate_structured_mesh("hex", 1)
    assert mesh.n_cells == 1
    assert mesh.cell_volume[0] == pytest.approx(1.0)


def test_generate_tet_1_kuhn_split():
    mesh = generate_structured_mesh("tet", 1)
    assert mesh.n_cells == 6
    assert mesh.cell_volume.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(mesh.cell_volume > 0)
    assert validate_mesh(mesh).ok


def test_generate_tet_2_perturbed():
    mesh = generate_structured_mesh("tet", 2, perturb=0.3)
    assert mesh.n_cells == 48
    assert np.all(mesh.cell_volume > 0)
    report = validate_mesh(mesh)
    assert report.ok, report.violations
    assert np.isfinite(report.proxies["cell_regularity_max"])
    assert mesh.cell_volume.sum() == pytest.approx(1.0, abs=1e-12)


def test_generate_perturbed_is_seed_deterministic():
    a = generate_structured_mesh("tet", 2, perturb=0.3, seed=7)
    b = generate_structured_mesh("tet", 2, perturb=0.3, seed=7)
    c = generate_structured_mesh("tet", 2, perturb=0.3, seed=8)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)


def test_generate_hex_rejects_perturb():
    with pytest.raises(ValueError, match="tet"):
        generate_structured_mesh("hex", 2, perturb=0.1)


@pytest.mark.parametrize("kind,n", [("hex", 2), ("hex", 3), ("tet", 2), ("tet", 3)])
def test_volume_additivity(kind, n):
    mesh = generate_structured_mesh(kind, n)
    assert mesh.cell_volume.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kind,n,perturb", [("hex", 2, 0.0), ("tet", 2, 0.0), ("tet", 3, 0.3)])
def test_validate_structured_meshes(kind, n, perturb):
    mesh = generate_structured_mesh(kind, n, perturb=perturb)
    report = validate_mesh(mesh)
    assert report.ok, report.violations


def test_validate_detects_flipped_orientation():
    bad = UNIT_CUBE.replace("6 1 2 3 4 5 6", "6 1 2 3 4 5 -6")
    mesh = parse_polymesh(bad)
    report = validate_mesh(mesh)
    assert not report.ok
    assert any("closed-surface" in msg and "cell 0" in msg for msg in report.violations)


def test_weights_reproduce_centroids_on_perturbed_mesh():
    mesh = generate_structured_mesh("tet", 2, perturb=0.3)
    for fid in range(mesh.n_faces):
        w = mesh.face_weights[fid]
        pos = mesh.positions[mesh.face_loops[fid]]
        assert w.sum() == pytest.approx(1.0, abs=1e-13)
        assert np.all(w >= 0)
        assert w @ pos == pytest.approx(mesh.face_centroid[fid], abs=1e-13)
    for cid in range(mesh.n_cells):
        w = mesh.cell_weights[cid]
        pos = mesh.positions[mesh.cell_vertices[cid]]
        assert w.sum() == pytest.approx(1.0, abs=1e-13)
        assert np.all(w >= 0)
        assert w @ pos == pytest.approx(mesh.cell_centroid[cid], abs=1e-13)


def test_closed_polygon_identity_all_faces():
    mesh = generate_structured_mesh("tet", 2, perturb=0.3)
    for fid in range(mesh.n_faces):
        s = mesh.face_edge_lengths[fid] @ mesh.face_edge_normals[fid]
        assert np.linalg.norm(s) <= 1e-12 * mesh.h


def test_polymesh_round_trip_geometry():
    mesh = generate_structured_mesh("tet", 2, perturb=0.3)
    text = write_polymesh(mesh)
    again = parse_polymesh(text)
    assert np.array_equal(mesh.positions, again.positions)
    assert mesh.cell_volume == pytest.approx(again.cell_volume, abs=1e-14)
    assert np.allclose(mesh.face_normal, again.face_normal, atol=1e-14)
    assert np.allclose(mesh.cell_centroid, again.cell_centroid, atol=1e-14)
    # byte-identical second generation
    assert write_polymesh(again) == text


def test_boundary_flags():
    mesh = generate_structured_mesh("hex", 2)
    # boundary faces: 6 sides x 4 faces
    assert int(mesh.face_on_boundary.sum()) == 24
    # the single interior vertex of the 3x3x3 grid
    assert int((~mesh.vertex_on_boundary).sum()) == 1
    inner = np.flatnonzero(~mesh.vertex_on_boundary)[0]
    assert mesh.positions[inner] == pytest.approx([0.5, 0.5, 0.5])


def test_cell_quadrature_matches_volume_and_moments():
    mesh = generate_structured_mesh("tet", 2, perturb=0.3)
    for cid in range(0, mesh.n_cells, 7):
        pts, wts = mesh.cell_quadrature(cid, 4)
        assert wts.sum() == pytest.approx(mesh.cell_volume[cid], rel=1e-13)
        moment = (wts[:, None] * pts).sum(axis=0) / wts.sum()
        assert moment == pytest.approx(mesh.cell_centroid[cid], abs=1e-13)


def test_face_quadrature_matches_area_and_centroid():
    mesh = generate_structured_mesh("hex", 2)
    for fid in range(0, mesh.n_faces, 5):
        pts, wts = mesh.face_quadrature(fid, 4)
        assert wts.sum() == pytest.approx(mesh.face_area[fid], rel=1e-13)
        moment = (wts[:, None] * pts).sum(axis=0) / wts.sum()
        assert moment == pytest.approx(mesh.face_centroid[fid], abs=1e-13)


def test_generate_rejects_bad_parameters():
    with pytest.raises(ValueError):
        generate_structured_mesh("tet", 0)
    with pytest.raises(ValueError):
        generate_structured_mesh("tet", 2, perturb=1.0)
    with pytest.raises(ValueError):
        generate_structured_mesh("pyramid", 2)


def test_convex_weights_clamping_path():
    from polyelast.mesh import _convex_weights

    square = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                       [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    # a target near one corner forces the active-set repair: the weight of the
    # opposite corner is clamped to zero and the rest re-solved
    w = _convex_weights(square, np.array([0.05, 0.05, 0.0]), 1.0)
    assert w == pytest.approx([0.9, 0.05, 0.0, 0.05], abs=1e-12)
    assert w @ square == pytest.approx([0.05, 0.05, 0.0], abs=1e-13)
    # a target outside the convex hull has no nonnegative representation
    assert _convex_weights(square, np.array([2.0, 0.0, 0.0]), 1.0) is None
    # symmetric target short-circuits to uniform weights
    w_mid = _convex_weights(square, np.array([0.5, 0.5, 0.0]), 1.0)
    assert np.array_equal(w_mid, np.full(4, 0.25))
