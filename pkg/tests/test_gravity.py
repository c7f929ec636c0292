import numpy as np
import pytest

from conftest import make_cube
from hazmap.errors import DegenerateFrameError, DomainError, StructuralError
from hazmap.gravity import (
    GravityParams,
    PolyhedronGravity,
    build_local_frame,
    frame_from_gravity,
    polyhedron_gravity,
)
from hazmap.mesh import TriangleMesh, mesh_volume
from hazmap.synth import SceneSpec, generate_scene
from oracles import cube_gravity_quadrature

PARAMS = GravityParams(density=2000.0)


@pytest.fixture(scope="module")
def cube_model():
    return PolyhedronGravity(make_cube())


def test_mirror_symmetry(cube_model):
    p = np.array([1.4, 0.8, 0.3])
    mirror = p * np.array([1.0, -1.0, 1.0])
    a1, _ = cube_model.acceleration(PARAMS, p)
    a2, _ = cube_model.acceleration(PARAMS, mirror)
    assert np.linalg.norm(a1) == pytest.approx(np.linalg.norm(a2), rel=1e-12)
    np.testing.assert_allclose(a2, a1 * np.array([1.0, -1.0, 1.0]), rtol=1e-12)


def test_quadrature_oracle_at_spec_point(cube_model):
    p = np.array([[2.0, 0.0, 0.0]])
    exact, _ = cube_model.acceleration(PARAMS, p)
    approx = cube_gravity_quadrature(p, 56, PARAMS.density, PARAMS.gravitational_constant)
    rel = np.linalg.norm(approx - exact) / np.linalg.norm(exact)
    assert rel < 1e-4
    # attraction points back toward the cube
    assert exact[0, 0] < 0


def test_point_mass_asymptotic(cube_model):
    mesh = cube_model.mesh
    volume = mesh_volume(mesh)
    r = 100.0 * mesh.bounding_radius()
    for direction in ([1.0, 0.0, 0.0], [0.3, -0.5, 0.9]):
        d = np.asarray(direction) / np.linalg.norm(direction)
        a, _ = cube_model.acceleration(PARAMS, d * r)
        expected = PARAMS.gravitational_constant * PARAMS.density * volume / r**2
        assert np.linalg.norm(a) == pytest.approx(expected, rel=1e-3)
        # direction toward the mass
        assert np.dot(a, d) < 0


def test_density_linearity(cube_model):
    p = np.array([1.1, 0.4, -0.2])
    a1, _ = cube_model.acceleration(GravityParams(density=1500.0), p)
    a2, _ = cube_model.acceleration(GravityParams(density=3000.0), p)
    np.testing.assert_array_equal(a2, 2.0 * a1)


def test_rotation_equivariance(cube_model):
    ang = 0.7
    rot = np.array(
        [
            [np.cos(ang), -np.sin(ang), 0.0],
            [np.sin(ang), np.cos(ang), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    mesh = cube_model.mesh
    rotated = PolyhedronGravity(mesh.transformed(rotation=rot))
    p = np.array([1.3, -0.4, 0.6])
    a, _ = cube_model.acceleration(PARAMS, p)
    ar, _ = rotated.acceleration(PARAMS, rot @ p)
    np.testing.assert_allclose(ar, rot @ a, rtol=1e-12, atol=1e-24)


def test_curl_free_on_grid(cube_model):
    step = 1e-3 * cube_model.mesh.bounding_radius()
    rng = np.random.default_rng(3)
    dirs = rng.standard_normal((10, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    centers = dirs * rng.uniform(1.8, 3.0, 10)[:, None]
    for c in centers:
        probes = []
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = step
            probes.extend([c + e, c - e])
        acc, _ = cube_model.acceleration(PARAMS, np.asarray(probes))
        d = [(acc[2 * k] - acc[2 * k + 1]) / (2 * step) for k in range(3)]  # dg/dx_k
        curl = np.array(
            [d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]]
        )
        g0, _ = cube_model.acceleration(PARAMS, c)
        assert np.linalg.norm(curl) < 1e-6 * np.linalg.norm(g0)


def test_solid_angle_flags_interior(cube_model):
    _, omega = cube_model.acceleration(PARAMS, np.array([1.5, 0.0, 0.0]))
    assert abs(omega) < 1e-8
    with pytest.raises(DomainError):
        cube_model.acceleration(PARAMS, np.array([0.1, 0.0, 0.0]))
    _, omega_in = cube_model.acceleration(
        PARAMS, np.array([[0.1, 0.0, 0.0]]), check_interior=False
    )
    assert abs(omega_in[0]) == pytest.approx(4.0 * np.pi, rel=1e-9)


def test_non_watertight_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    mesh = TriangleMesh(v, np.array([[0, 1, 2]]))
    with pytest.raises(StructuralError):
        polyhedron_gravity(mesh, PARAMS, [0.0, 0.0, 1.0])


def test_frame_axis_rule():
    f = frame_from_gravity(np.zeros(3), np.array([0.0, 0.0, -9.8]))
    np.testing.assert_allclose(f.z_axis, [0.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(f.rotation[0], [1.0, 0.0, 0.0], atol=1e-15)

    f = frame_from_gravity(np.zeros(3), np.array([-9.8, 0.0, 0.0]))
    np.testing.assert_allclose(f.z_axis, [1.0, 0.0, 0.0], atol=1e-15)
    # x axis falls back to +y projected, frame right-handed
    assert abs(np.dot(f.rotation[0], f.z_axis)) < 1e-15
    assert np.linalg.det(f.rotation) == pytest.approx(1.0, abs=1e-12)

    with pytest.raises(DegenerateFrameError):
        frame_from_gravity(np.zeros(3), np.zeros(3))


def test_local_frame_on_synthetic_body():
    spec = SceneSpec(seed=11, base_radius=2.0, fractal_amplitude=0.02, subdivisions=4)
    mesh = generate_scene(spec)
    params = GravityParams(density=spec.density)
    model = PolyhedronGravity(mesh)
    from hazmap.mesh import closest_surface_point

    rng = np.random.default_rng(5)
    for _ in range(3):
        probe = rng.standard_normal(3)
        probe *= 3.0 / np.linalg.norm(probe)
        frame = build_local_frame(mesh, params, probe, gravity_model=model)
        r = frame.rotation
        np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
        # re-evaluate gravity at the construction point: z must oppose it
        origin, face = closest_surface_point(mesh, probe)
        np.testing.assert_allclose(origin, frame.origin, atol=0)
        eps = 1e-3 * mesh.mean_edge_length()
        g, _ = model.acceleration(params, origin + eps * mesh.face_normals()[face])
        cosang = np.dot(frame.z_axis, -g / np.linalg.norm(g))
        assert np.arccos(np.clip(cosang, -1.0, 1.0)) < 1e-9


def test_frame_z_antiparallel_to_construction_gravity():
    # z antiparallel to the gravity used during construction to < 1e-9 rad
    cube = make_cube()
    model = PolyhedronGravity(cube)
    probe = [0.0, 0.0, 0.7]  # snaps to (0, 0, 0.5) on the top face
    frame = build_local_frame(cube, PARAMS, probe, gravity_model=model)
    np.testing.assert_allclose(frame.origin, [0.0, 0.0, 0.5], atol=1e-12)
    eps = 1e-3 * cube.mean_edge_length()
    g, _ = model.acceleration(PARAMS, frame.origin + eps * np.array([0.0, 0.0, 1.0]))
    cosang = np.dot(frame.z_axis, -g / np.linalg.norm(g))
    assert np.arccos(np.clip(cosang, -1.0, 1.0)) < 1e-9
