import numpy as np
import pytest

from conftest import boulder_field_dem, make_dem
from hazmap.camera import (
    CameraFrame,
    cast_camera_rays,
    compute_image_meta,
    load_labels,
    project_labels,
    save_labels,
    shadow_from_intensity,
)
from hazmap.dem import dem_to_mesh
from hazmap.errors import StructuralError, UndefinedMetaError
from hazmap.hazard import INVALID, SAFE, SafetyConfig, evaluate_dem
from hazmap.synth import SceneSpec, generate_scene, look_at_camera


def nadir_camera(height=2.0, n=48, fx=200.0, sun=(0.0, 0.0, 1.0)):
    """Camera straight above the local origin looking down -z."""
    return look_at_camera(
        eye=[0.0, 0.0, height],
        target=[0.0, 0.0, 0.0],
        fx=fx,
        fy=fx,
        width=n,
        height=n,
        sun_direction=None if sun is None else np.asarray(sun, float),
        up_hint=(0.0, 1.0, 0.0),
    )


@pytest.fixture(scope="module")
def flat_scene():
    dem = make_dem(np.zeros((64, 64)))
    mesh = dem_to_mesh(dem)
    hazard = evaluate_dem(dem, SafetyConfig())
    return dem, mesh, hazard


def test_nadir_flat_scene_all_safe_all_lit(flat_scene):
    dem, mesh, hazard = flat_scene
    cam = nadir_camera()
    out = project_labels(hazard, dem, cam, mesh)
    hit = out.labels != INVALID
    assert hit.mean() > 0.9
    assert np.all(out.labels[hit] == SAFE)
    assert np.all(out.shadow[hit] == 0)
    assert out.meta.visibility_ratio == 1.0
    assert out.meta.viewing_angle == pytest.approx(0.0, abs=1e-9)


def test_all_unsafe_map_projects_unsafe(flat_scene):
    dem, mesh, hazard = flat_scene
    forced = np.where(hazard.safe == SAFE, np.uint8(0), hazard.safe).astype(np.uint8)
    hz = type(hazard)(
        slope=hazard.slope, roughness=hazard.roughness, safe=forced,
        config=hazard.config, cell_size=hazard.cell_size, grid_origin=hazard.grid_origin,
    )
    cam = nadir_camera()
    out = project_labels(hz, dem, cam, mesh)
    hit = out.labels != INVALID
    assert np.all(out.labels[hit] == 0)


def test_gsd_exact_on_fronto_parallel_plane(flat_scene):
    dem, mesh, _ = flat_scene
    d, f = 2.0, 200.0
    cam = nadir_camera(height=d, fx=f)
    hits = cast_camera_rays(mesh, cam)
    meta = compute_image_meta(dem, cam, hits)
    assert meta.gsd == pytest.approx(d / f, rel=1e-12)


def test_doubling_focal_length_halves_gsd(flat_scene):
    dem, mesh, _ = flat_scene
    m1 = compute_image_meta(dem, nadir_camera(fx=150.0), cast_camera_rays(mesh, nadir_camera(fx=150.0)))
    m2 = compute_image_meta(dem, nadir_camera(fx=300.0), cast_camera_rays(mesh, nadir_camera(fx=300.0)))
    assert m1.gsd == pytest.approx(2.0 * m2.gsd, rel=1e-12)


def test_oblique_viewing_angle(flat_scene):
    dem, mesh, hazard = flat_scene
    cam = look_at_camera(
        eye=[1.5, 0.0, 1.5], target=[0.0, 0.0, 0.0], fx=200.0, fy=200.0,
        width=32, height=32, up_hint=(0.0, 1.0, 0.0),
    )
    out = project_labels(hazard, dem, cam, mesh)
    assert out.meta.viewing_angle == pytest.approx(45.0, abs=1e-6)


def test_visibility_ratio_counts_lit_fraction(flat_scene):
    dem, mesh, hazard = flat_scene
    # sun from +x at 45 deg over a flat plane: fully lit (no occluders)
    cam = nadir_camera(sun=(1.0, 0.0, 1.0))
    out = project_labels(hazard, dem, cam, mesh)
    assert out.meta.visibility_ratio == 1.0
    # sun below the horizon: nothing lit
    cam_dark = nadir_camera(sun=(0.0, 0.0, -1.0))
    out_dark = project_labels(hazard, dem, cam_dark, mesh)
    assert out_dark.meta.visibility_ratio == 0.0
    hit = out_dark.labels != INVALID
    assert np.all(out_dark.shadow[hit] == 1)


def test_projection_oracle_brute_vs_bvh():
    spec = SceneSpec(seed=13, base_radius=2.0, fractal_amplitude=0.03,
                     boulder_count=15, boulder_size_range=(0.1, 0.4),
                     subdivisions=4, sun_direction=(1.0, 0.3, 0.2))
    mesh = generate_scene(spec)
    dem = boulder_field_dem(1)
    hazard = evaluate_dem(dem, SafetyConfig())
    site = mesh.vertices[np.argmax(mesh.vertices[:, 0])]
    cam = look_at_camera(site * 2.0, site, fx=120.0, fy=120.0, width=32, height=32,
                         sun_direction=np.array(spec.sun_direction))
    fast = project_labels(hazard, dem, cam, mesh, method="bvh")
    slow = project_labels(hazard, dem, cam, mesh, method="brute")
    np.testing.assert_array_equal(fast.labels, slow.labels)
    np.testing.assert_array_equal(fast.shadow, slow.shadow)


def test_shape_mismatch_rejected(flat_scene):
    dem, mesh, hazard = flat_scene
    small = make_dem(np.zeros((8, 8)))
    with pytest.raises(StructuralError):
        project_labels(hazard, small, nadir_camera(), mesh)


def test_camera_inside_body_all_invalid():
    spec = SceneSpec(seed=2, base_radius=2.0, subdivisions=3)
    mesh = generate_scene(spec)
    dem = boulder_field_dem(2, h=16, w=16)
    hazard = evaluate_dem(dem, SafetyConfig())
    # camera far away pointing away from the body: every ray misses
    cam = look_at_camera([10.0, 0.0, 0.0], [20.0, 0.0, 0.0], fx=100.0, fy=100.0,
                         width=16, height=16)
    with pytest.warns(UserWarning, match="all invalid"):
        out = project_labels(hazard, dem, cam, mesh)
    assert np.all(out.labels == INVALID)
    assert out.meta is None


def test_meta_undefined_without_hits():
    dem = make_dem(np.zeros((8, 8)))
    mesh = dem_to_mesh(dem)
    cam = look_at_camera([0.0, 0.0, 2.0], [0.0, 0.0, 4.0], fx=50.0, fy=50.0,
                         width=8, height=8)
    hits = cast_camera_rays(mesh, cam)
    with pytest.raises(UndefinedMetaError):
        compute_image_meta(dem, cam, hits)


def test_camera_json_roundtrip(tmp_path):
    cam = nadir_camera()
    back = CameraFrame.from_dict(cam.to_dict())
    np.testing.assert_allclose(back.rotation, cam.rotation, atol=0)
    np.testing.assert_allclose(back.translation, cam.translation, atol=0)
    assert back.fx == cam.fx and back.width == cam.width
    np.testing.assert_allclose(back.sun_direction, cam.sun_direction, atol=0)


def test_labels_roundtrip(tmp_path, flat_scene):
    dem, mesh, hazard = flat_scene
    cam = nadir_camera()
    out = project_labels(hazard, dem, cam, mesh)
    save_labels(tmp_path / "x", out, cam)
    back, cam_back = load_labels(tmp_path / "x")
    np.testing.assert_array_equal(back.labels, out.labels)
    np.testing.assert_array_equal(back.shadow, out.shadow)
    assert back.meta.gsd == pytest.approx(out.meta.gsd, rel=1e-12)
    np.testing.assert_allclose(cam_back.rotation, cam.rotation, atol=0)


def test_shadow_from_intensity_threshold():
    img = np.linspace(0.0, 1.0, 100).reshape(10, 10)
    mask = shadow_from_intensity(img, fraction=0.05)
    # 99th percentile ~0.99; cutoff ~0.0495: first 5 pixels are shadow
    assert mask.sum() == 5
    assert mask.ravel()[:5].all()


def test_invalid_camera_rejected():
    with pytest.raises(StructuralError):
        CameraFrame(fx=-1.0, fy=1.0, cx=0, cy=0, width=4, height=4,
                    rotation=np.eye(3), translation=np.zeros(3))
    with pytest.raises(StructuralError):
        CameraFrame(fx=1.0, fy=1.0, cx=0, cy=0, width=4, height=4,
                    rotation=np.eye(3) * 2.0, translation=np.zeros(3))
