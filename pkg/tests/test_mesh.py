import numpy as np
import pytest

from conftest import make_cube
from hazmap.errors import StructuralError
from hazmap.io_utils import save_json
from hazmap.mesh import TriangleMesh, closest_surface_point, load_obj, mesh_volume, save_obj
from hazmap.synth import icosphere


def test_cube_volume_is_one(cube):
    assert mesh_volume(cube) == pytest.approx(1.0, abs=1e-12)


def test_reversed_winding_negates_volume():
    rev = make_cube(reverse=True)
    # reversed winding is still manifold, just inward-oriented
    assert mesh_volume(rev) == pytest.approx(-1.0, abs=1e-12)


def test_icosphere_volume_approaches_sphere_from_below():
    r = 1.3
    target = 4.0 / 3.0 * np.pi * r**3
    vols = [mesh_volume(icosphere(k, radius=r)) for k in (1, 2, 3, 4)]
    assert all(v < target for v in vols)
    assert np.all(np.diff(vols) > 0)
    assert vols[-1] == pytest.approx(target, rel=3e-3)


def test_face_index_out_of_range_rejected():
    with pytest.raises(StructuralError):
        TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 5]]))


def test_open_mesh_is_not_watertight():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    f = np.array([[0, 1, 2]])
    mesh = TriangleMesh(v, f)
    assert not mesh.watertight
    with pytest.raises(StructuralError):
        mesh_volume(mesh)


def test_inconsistent_winding_is_not_watertight(cube):
    faces = cube.faces.copy()
    faces[0] = faces[0, ::-1]
    assert not TriangleMesh(cube.vertices, faces).watertight


def test_edges_cube(cube):
    et = cube.edges
    assert len(et.vertex_pairs) == 18  # 12 quad edges + 6 diagonals
    assert et.manifold
    assert np.all(et.faces >= 0)


def test_obj_roundtrip(tmp_path, cube):
    path = tmp_path / "cube.obj"
    save_obj(path, cube)
    back = load_obj(path)
    np.testing.assert_array_equal(back.faces, cube.faces)
    np.testing.assert_allclose(back.vertices, cube.vertices, atol=0)


def test_obj_ignores_other_records_with_warning(tmp_path):
    path = tmp_path / "tri.obj"
    path.write_text("vn 0 0 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nusemtl foo\nf 1/1 2/2 3/3\n")
    with pytest.warns(UserWarning, match="ignored OBJ record"):
        mesh = load_obj(path)
    assert mesh.n_vertices == 3 and mesh.n_faces == 1


def test_obj_rejects_polygons(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(StructuralError):
        load_obj(path)


def test_obj_scale_sidecar(tmp_path, cube):
    path = tmp_path / "cube.obj"
    save_obj(path, cube)
    save_json(tmp_path / "cube.json", {"scale": 2.0})
    back = load_obj(path)
    np.testing.assert_allclose(back.vertices, 2.0 * cube.vertices)


def test_obj_negative_indices(tmp_path):
    path = tmp_path / "rel.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
    mesh = load_obj(path)
    np.testing.assert_array_equal(mesh.faces, [[0, 1, 2]])


def test_closest_surface_point(cube):
    p, face = closest_surface_point(cube, [2.0, 0.1, 0.2])
    np.testing.assert_allclose(p, [0.5, 0.1, 0.2], atol=1e-12)
    n = cube.face_normals()[face]
    np.testing.assert_allclose(n, [1.0, 0.0, 0.0], atol=1e-12)


def test_face_normals_point_outward(cube):
    n = cube.face_normals()
    centers = cube.vertices[cube.faces].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", n, centers) > 0)
