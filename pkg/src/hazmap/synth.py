"""Deterministic synthetic small-body scenes and Lambertian image rendering.

Terrain is an icosphere displaced radially by fractal value noise plus
half-embedded ellipsoidal boulder caps, so meshes stay watertight. All
randomness flows through a splitmix-style counter-based hash of the scene
seed, making scenes bit-exact reproducible across platforms and languages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import CameraFrame, HitRecords, cast_camera_rays
from .errors import StructuralError
from .mesh import TriangleMesh
from .raycast import TriangleRaycaster

# splitmix64 finalizer constants (Steele, Lea & Flood's generator)
_GAMMA = np.uint64(0x9E3779B97F4B7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = float(2.0**-53)


def _mix64(z: np.ndarray) -> np.ndarray:
    # wrapping multiplies are the point; silence the overflow warning
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def hash64(seed: int, *components) -> np.ndarray:
    """Counter-based keyed hash: mix the seed, then absorb each component."""
    h = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GAMMA)
    for c in components:
        arr = np.asarray(c)
        if arr.dtype != np.uint64:
            arr = arr.astype(np.int64).view(np.uint64)
        with np.errstate(over="ignore"):
            h = _mix64((h ^ arr) * _GAMMA + _GAMMA)
    return h


def uniform01(seed: int, *components) -> np.ndarray:
    """Uniform doubles in [0, 1) from the top 53 bits of the hash."""
    return (hash64(seed, *components) >> _S11) * _INV53


def icosphere(subdivisions: int, radius: float = 1.0) -> TriangleMesh:
    """Subdivided icosahedron with vertices on the sphere of given radius."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    for _ in range(subdivisions):
        n_v = len(verts)
        a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
        he = np.concatenate(
            [np.column_stack([a, b]), np.column_stack([b, c]), np.column_stack([c, a])]
        )
        lo = np.minimum(he[:, 0], he[:, 1])
        hi = np.maximum(he[:, 0], he[:, 1])
        keys = lo * n_v + hi
        uniq, inverse = np.unique(keys, return_inverse=True)
        ua = uniq // n_v
        ub = uniq % n_v
        mid = verts[ua] + verts[ub]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        mids = n_v + inverse.reshape(3, -1)  # per-face midpoint ids: ab, bc, ca
        mab, mbc, mca = mids[0], mids[1], mids[2]
        verts = np.vstack([verts, mid])
        faces = np.concatenate(
            [
                np.column_stack([a, mab, mca]),
                np.column_stack([b, mbc, mab]),
                np.column_stack([c, mca, mbc]),
                np.column_stack([mab, mbc, mca]),
            ]
        )
    return TriangleMesh(verts * radius, faces)


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of a deterministic synthetic scene."""

    seed: int
    base_radius: float = 2.0
    fractal_amplitude: float = 0.04     # m, amplitude of the first octave
    fractal_exponent: float = 1.0       # per-octave amplitude falloff, 2^-exponent
    fractal_octaves: int = 6
    fractal_base_freq: float = 4.0      # lattice cells across the unit sphere
    boulder_count: int = 0
    boulder_size_range: tuple[float, float] = (0.1, 0.5)   # m, diameters
    boulder_axis_ratio_range: tuple[float, float] = (0.5, 1.0)
    sun_direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    density: float = 2000.0             # kg/m^3
    subdivisions: int = 6

    def __post_init__(self):
        if self.base_radius <= 0 or self.density <= 0:
            raise StructuralError("base_radius and density must be positive")
        if self.fractal_amplitude < 0 or self.fractal_octaves < 1:
            raise StructuralError("bad fractal parameters")
        if self.boulder_count < 0:
            raise StructuralError("boulder_count must be >= 0")
        lo, hi = self.boulder_size_range
        if not (0 < lo <= hi):
            raise StructuralError("boulder_size_range must be positive and ordered")
        lo, hi = self.boulder_axis_ratio_range
        if not (0 < lo <= hi):
            raise StructuralError("boulder_axis_ratio_range must be positive and ordered")
        if self.subdivisions < 0 or self.subdivisions > 8:
            raise StructuralError("subdivisions out of range")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "base_radius": self.base_radius,
            "fractal_amplitude": self.fractal_amplitude,
            "fractal_exponent": self.fractal_exponent,
            "fractal_octaves": self.fractal_octaves,
            "fractal_base_freq": self.fractal_base_freq,
            "boulder_count": self.boulder_count,
            "boulder_size_range": list(self.boulder_size_range),
            "boulder_axis_ratio_range": list(self.boulder_axis_ratio_range),
            "sun_direction": list(self.sun_direction),
            "density": self.density,
            "subdivisions": self.subdivisions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        for key in ("boulder_size_range", "boulder_axis_ratio_range", "sun_direction"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def _value_noise(points: np.ndarray, seed: int, octave: int) -> np.ndarray:
    """Trilinear value noise in [-1, 1] on the integer lattice."""
    i0 = np.floor(points).astype(np.int64)
    f = points - i0
    w = f * f * (3.0 - 2.0 * f)  # smoothstep
    out = np.zeros(len(points))
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                corner = uniform01(
                    seed, octave, i0[:, 0] + dx, i0[:, 1] + dy, i0[:, 2] + dz
                ) * 2.0 - 1.0
                wx = w[:, 0] if dx else 1.0 - w[:, 0]
                wy = w[:, 1] if dy else 1.0 - w[:, 1]
                wz = w[:, 2] if dz else 1.0 - w[:, 2]
                out += corner * wx * wy * wz
    return out


def _fractal_displacement(dirs: np.ndarray, spec: SceneSpec) -> np.ndarray:
    if spec.fractal_amplitude == 0.0:
        return np.zeros(len(dirs))
    total = np.zeros(len(dirs))
    amp = spec.fractal_amplitude
    freq = spec.fractal_base_freq
    for octave in range(spec.fractal_octaves):
        total += amp * _value_noise(dirs * freq, spec.seed, octave)
        freq *= 2.0
        amp *= 2.0 ** (-spec.fractal_exponent)
    return total


def _boulder_field(dirs: np.ndarray, spec: SceneSpec) -> np.ndarray:
    """Max over boulders of the half-embedded ellipsoid cap height."""
    bump = np.zeros(len(dirs))
    for b in range(spec.boulder_count):
        u1, u2, u3, u4, u5, u6 = (
            float(uniform01(spec.seed, 1000 + b, k)) for k in range(6)
        )
        cz = 2.0 * u1 - 1.0
        phi = 2.0 * math.pi * u2
        rr = math.sqrt(max(0.0, 1.0 - cz * cz))
        center = np.array([rr * math.cos(phi), rr * math.sin(phi), cz])
        smin, smax = spec.boulder_size_range
        size = smin + u3 * (smax - smin)
        rmin, rmax = spec.boulder_axis_ratio_range
        ratio_b = rmin + u4 * (rmax - rmin)
        ratio_h = rmin + u5 * (rmax - rmin)
        psi = 2.0 * math.pi * u6

        # tangent frame at the boulder center, spun by psi
        ref = np.array([0.0, 0.0, 1.0]) if abs(center[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        t1 = np.cross(center, ref)
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(center, t1)
        c, s = math.cos(psi), math.sin(psi)
        e1 = c * t1 + s * t2
        e2 = -s * t1 + c * t2

        a = size / 2.0
        bb = a * ratio_b
        h = a * ratio_h
        rel = (dirs - center) * spec.base_radius
        dx = rel @ e1
        dy = rel @ e2
        q = 1.0 - (dx / a) ** 2 - (dy / bb) ** 2
        np.maximum(bump, h * np.sqrt(np.maximum(q, 0.0)), out=bump)
    return bump


def generate_scene(spec: SceneSpec) -> TriangleMesh:
    """Watertight displaced icosphere with boulders; bit-exact in the seed."""
    base = icosphere(spec.subdivisions, radius=1.0)
    dirs = base.vertices
    radius = spec.base_radius + _fractal_displacement(dirs, spec)
    if spec.boulder_count > 0:
        radius = radius + _boulder_field(dirs, spec)
    return TriangleMesh(dirs * radius[:, None], base.faces)


def render_image(
    mesh: TriangleMesh,
    camera: CameraFrame,
    sun,
    caster: TriangleRaycaster | None = None,
    method: str = "bvh",
) -> tuple[np.ndarray, HitRecords]:
    """Lambertian grayscale render: max(0, n.s) where the sun is visible.

    Pixels whose view ray misses and pixels whose sun ray is occluded are 0.
    Uses the same occlusion test as label projection, so the zero-intensity
    set over hits equals the projected shadow mask exactly.
    """
    sun = np.asarray(sun, dtype=np.float64).reshape(3)
    sun = sun / np.linalg.norm(sun)
    cam = CameraFrame(
        fx=camera.fx, fy=camera.fy, cx=camera.cx, cy=camera.cy,
        width=camera.width, height=camera.height,
        rotation=camera.rotation, translation=camera.translation,
        sun_direction=sun,
    )
    hits = cast_camera_rays(mesh, cam, caster=caster, method=method)
    normals = mesh.face_normals()
    shade = np.zeros(len(hits.t))
    hit = hits.hit
    ndots = np.einsum("ij,j->i", normals[hits.tri[hit]], sun)
    shade[hit] = np.where(hits.lit[hit], np.maximum(ndots, 0.0), 0.0)
    return shade.reshape(camera.height, camera.width), hits


def look_at_camera(
    eye,
    target,
    fx: float,
    fy: float,
    width: int,
    height: int,
    sun_direction=None,
    up_hint=(0.0, 0.0, 1.0),
) -> CameraFrame:
    """Camera at eye with boresight through target (x right, y down)."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    z = target - eye
    z = z / np.linalg.norm(z)
    up = np.asarray(up_hint, dtype=np.float64)
    x = np.cross(z, up)
    if np.linalg.norm(x) < 1e-9:
        x = np.cross(z, np.array([1.0, 0.0, 0.0]))
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    rot = np.vstack([x, y, z])
    return CameraFrame(
        fx=fx, fy=fy, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height,
        rotation=rot, translation=-rot @ eye,
        sun_direction=sun_direction,
    )


def make_orbit_cameras(
    site: np.ndarray,
    up: np.ndarray,
    count: int,
    distance: float,
    cone_deg: float,
    fx: float,
    width: int,
    height: int,
    sun_direction=None,
    seed: int = 0,
) -> list[CameraFrame]:
    """Deterministic ring of cameras on a cone around the site's up axis."""
    site = np.asarray(site, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    up = up / np.linalg.norm(up)
    ref = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(ref, up)) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    t1 = np.cross(up, ref)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(up, t1)
    cams = []
    for k in range(count):
        ang = 2.0 * math.pi * (k + float(uniform01(seed, 77, k))) / count
        tilt = math.radians(cone_deg) * float(uniform01(seed, 78, k))
        axis = math.cos(ang) * t1 + math.sin(ang) * t2
        eye = site + distance * (math.cos(tilt) * up + math.sin(tilt) * axis)
        cams.append(
            look_at_camera(
                eye, site, fx=fx, fy=fx, width=width, height=height,
                sun_direction=sun_direction, up_hint=t1,
            )
        )
    return cams
