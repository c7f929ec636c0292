"""Pinhole projection of hazard verdicts into per-pixel image labels.

Labels are produced by inverse mapping: each pixel ray is cast against the
terrain mesh, the hit point is moved into the DEM frame, and the safety
verdict of the nearest cell is copied. Shadows use the same sun-ray occlusion
test as the synthetic renderer, so the two agree bit-exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dem import Dem
from .errors import StructuralError, UndefinedMetaError
from .hazard import HazardMap, INVALID
from .io_utils import load_json, load_npy, save_json, save_npy
from .mesh import TriangleMesh
from .raycast import TriangleRaycaster


@dataclass
class CameraFrame:
    """Distortion-free pinhole camera with a body-fixed pose.

    ``rotation``/``translation`` map body-fixed points into camera
    coordinates (x right, y down, z along the boresight):
    x_cam = R x_body + t.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray     # (3, 3)
    translation: np.ndarray  # (3,)
    sun_direction: np.ndarray | None = None  # unit vector toward the sun, body-fixed

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise StructuralError("focal lengths must be positive")
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-9):
            raise StructuralError("camera rotation is not orthonormal")
        if self.sun_direction is not None:
            s = np.asarray(self.sun_direction, dtype=np.float64).reshape(3)
            self.sun_direction = s / np.linalg.norm(s)

    @property
    def center(self) -> np.ndarray:
        """Camera center in the body frame."""
        return -self.rotation.T @ self.translation

    @property
    def boresight(self) -> np.ndarray:
        """Camera +z direction in the body frame."""
        return self.rotation[2]

    def pixel_rays(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-pixel (origin, unit direction) in the body frame, row-major."""
        u, v = np.meshgrid(np.arange(self.width), np.arange(self.height))
        d = np.column_stack(
            [
                (u.ravel() - self.cx) / self.fx,
                (v.ravel() - self.cy) / self.fy,
                np.ones(u.size),
            ]
        )
        d_body = d @ self.rotation  # R^T d
        d_body /= np.linalg.norm(d_body, axis=1, keepdims=True)
        origins = np.tile(self.center, (len(d_body), 1))
        return origins, d_body

    def to_dict(self) -> dict:
        d = {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "rotation": [float(x) for x in self.rotation.ravel()],
            "translation": [float(x) for x in self.translation],
        }
        if self.sun_direction is not None:
            d["sun_direction"] = [float(x) for x in self.sun_direction]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CameraFrame":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
            rotation=np.asarray(d["rotation"], dtype=np.float64).reshape(3, 3),
            translation=np.asarray(d["translation"], dtype=np.float64),
            sun_direction=(
                np.asarray(d["sun_direction"], dtype=np.float64)
                if "sun_direction" in d
                else None
            ),
        )


@dataclass
class ImageMeta:
    gsd: float              # m/px, mean over hitting pixels
    imaging_depth: float    # m, mean ray distance
    viewing_angle: float    # deg between DEM -z and the boresight
    visibility_ratio: float  # lit hitting pixels / hitting pixels

    def to_dict(self) -> dict:
        return {
            "gsd": self.gsd,
            "imaging_depth": self.imaging_depth,
            "viewing_angle": self.viewing_angle,
            "visibility_ratio": self.visibility_ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImageMeta":
        return cls(
            gsd=float(d["gsd"]),
            imaging_depth=float(d["imaging_depth"]),
            viewing_angle=float(d["viewing_angle"]),
            visibility_ratio=float(d["visibility_ratio"]),
        )


@dataclass
class HitRecords:
    """Per-pixel ray-cast results, flattened row-major."""

    hit: np.ndarray       # (N,) bool
    t: np.ndarray         # (N,) ray distance, inf on miss
    tri: np.ndarray       # (N,) triangle index, -1 on miss
    points: np.ndarray    # (N, 3) body-frame hit points (junk on miss)
    cam_z: np.ndarray     # (N,) camera-frame z depth (junk on miss)
    lit: np.ndarray       # (N,) bool, sun visible (all True without a sun)


@dataclass
class PixelLabelMap:
    labels: np.ndarray  # (H, W) uint8 {0=unsafe, 1=safe, 255=invalid}
    shadow: np.ndarray  # (H, W) uint8 {0=lit, 1=shadow}
    meta: ImageMeta | None


def sun_visibility(
    caster: TriangleRaycaster,
    points: np.ndarray,
    tri: np.ndarray,
    normals: np.ndarray,
    sun_direction: np.ndarray,
    offset: float,
    method: str = "bvh",
) -> np.ndarray:
    """Shared occlusion test: a surface point is lit iff its outward normal
    faces the sun and the sun ray escapes the mesh.

    The ray starts ``offset`` meters along the sun direction to clear the
    surface; the originating triangle is excluded explicitly.
    """
    n = len(points)
    facing = (normals @ sun_direction) > 0.0
    lit = np.zeros(n, dtype=bool)
    if facing.any():
        idx = np.nonzero(facing)[0]
        origins = points[idx] + offset * sun_direction
        dirs = np.tile(sun_direction, (len(idx), 1))
        blocked = caster.occluded(origins, dirs, t_min=0.0, skip=tri[idx], method=method)
        lit[idx] = ~blocked
    return lit


def cast_camera_rays(
    mesh: TriangleMesh,
    camera: CameraFrame,
    caster: TriangleRaycaster | None = None,
    method: str = "bvh",
) -> HitRecords:
    """Cast all pixel rays and, when a sun is present, resolve illumination."""
    caster = caster if caster is not None else TriangleRaycaster(mesh)
    origins, dirs = camera.pixel_rays()
    t, tri = caster.intersect(origins, dirs, t_min=0.0, method=method)
    hit = np.isfinite(t)
    points = origins + np.where(hit, t, 0.0)[:, None] * dirs
    cam_z = (points - camera.center) @ camera.boresight
    lit = np.ones(len(t), dtype=bool)
    if camera.sun_direction is not None and hit.any():
        normals = mesh.face_normals()
        fn = np.zeros((len(t), 3))
        fn[hit] = normals[tri[hit]]
        offset = 1e-6 * max(mesh.bounding_radius(), 1.0)
        lit_hit = sun_visibility(
            caster,
            points[hit],
            tri[hit],
            fn[hit],
            camera.sun_direction,
            offset,
            method=method,
        )
        lit[hit] = lit_hit
    return HitRecords(hit=hit, t=t, tri=tri, points=points, cam_z=cam_z, lit=lit)


def compute_image_meta(dem: Dem, camera: CameraFrame, hits: HitRecords) -> ImageMeta:
    """Aggregate GSD, depth, viewing angle, and visibility from hit records."""
    hit = hits.hit
    n_hit = int(hit.sum())
    if n_hit == 0:
        raise UndefinedMetaError("no pixel ray hit terrain")
    depth = hits.cam_z[hit]
    gsd = float(np.mean(depth * (1.0 / camera.fx + 1.0 / camera.fy) / 2.0))
    imaging_depth = float(np.mean(hits.t[hit]))
    cosang = float(np.clip(np.dot(-dem.frame.z_axis, camera.boresight), -1.0, 1.0))
    viewing_angle = float(np.degrees(np.arccos(cosang)))
    visibility = float(hits.lit[hit].sum() / n_hit)
    return ImageMeta(
        gsd=gsd,
        imaging_depth=imaging_depth,
        viewing_angle=viewing_angle,
        visibility_ratio=visibility,
    )


def project_labels(
    hazard: HazardMap,
    dem: Dem,
    camera: CameraFrame,
    mesh: TriangleMesh,
    caster: TriangleRaycaster | None = None,
    method: str = "bvh",
) -> PixelLabelMap:
    """Per-pixel safety labels by ray casting and nearest-cell verdict lookup."""
    if hazard.shape != dem.shape:
        raise StructuralError("hazard map and DEM shapes differ")
    hits = cast_camera_rays(mesh, camera, caster=caster, method=method)
    n = len(hits.t)
    labels = np.full(n, INVALID, dtype=np.uint8)
    shadow = np.zeros(n, dtype=np.uint8)

    if hits.hit.any():
        local = dem.frame.to_local(hits.points[hits.hit])
        jj = np.rint((local[:, 0] - dem.grid_origin[0]) / dem.cell_size).astype(np.int64)
        ii = np.rint((local[:, 1] - dem.grid_origin[1]) / dem.cell_size).astype(np.int64)
        h, w = dem.shape
        inside = (ii >= 0) & (ii < h) & (jj >= 0) & (jj < w)
        vals = np.full(inside.shape, INVALID, dtype=np.uint8)
        vals[inside] = hazard.safe[ii[inside], jj[inside]]
        labels[hits.hit] = vals
        shadow[hits.hit] = (~hits.lit[hits.hit]).astype(np.uint8)
        meta = compute_image_meta(dem, camera, hits)
    else:
        warnings.warn("no pixel ray hit the mesh; label map is all invalid")
        meta = None

    return PixelLabelMap(
        labels=labels.reshape(camera.height, camera.width),
        shadow=shadow.reshape(camera.height, camera.width),
        meta=meta,
    )


def shadow_from_intensity(image: np.ndarray, fraction: float = 0.05) -> np.ndarray:
    """Shadow mask for real imagery without a sun vector: pixels darker than
    ``fraction`` of the 99th-percentile intensity."""
    ref = float(np.percentile(image, 99.0))
    return (image < fraction * ref).astype(np.uint8)


def save_labels(prefix: str | Path, label_map: PixelLabelMap, camera: CameraFrame) -> None:
    """Write <prefix>_labels.npy, <prefix>_shadow.npy, <prefix>_meta.json."""
    prefix = Path(prefix)
    save_npy(prefix.parent / f"{prefix.name}_labels.npy", label_map.labels)
    save_npy(prefix.parent / f"{prefix.name}_shadow.npy", label_map.shadow)
    save_json(
        prefix.parent / f"{prefix.name}_meta.json",
        {
            "camera": camera.to_dict(),
            "image_meta": None if label_map.meta is None else label_map.meta.to_dict(),
        },
    )


def load_labels(prefix: str | Path) -> tuple[PixelLabelMap, CameraFrame]:
    prefix = Path(prefix)
    labels = load_npy(prefix.parent / f"{prefix.name}_labels.npy", dtype=np.uint8, ndim=2)
    shadow = load_npy(prefix.parent / f"{prefix.name}_shadow.npy", dtype=np.uint8, ndim=2)
    meta = load_json(prefix.parent / f"{prefix.name}_meta.json")
    camera = CameraFrame.from_dict(meta["camera"])
    image_meta = (
        ImageMeta.from_dict(meta["image_meta"]) if meta["image_meta"] is not None else None
    )
    return PixelLabelMap(labels=labels, shadow=shadow, meta=image_meta), camera
