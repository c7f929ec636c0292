"""Gravity-aligned digital elevation maps rasterized from a terrain mesh.

A Dem is a 2.5-D raster in a LocalFrame: ``elevations[i, j]`` is the height
along local +z at cell center ``(x, y) = grid_origin + (j, i) * cell_size``.
Cells whose vertical ray misses the mesh carry the nodata flag.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import StructuralError
from .gravity import LocalFrame
from .io_utils import load_json, load_npy, save_json, save_npy
from .mesh import TriangleMesh
from .raycast import TriangleRaycaster


@dataclass
class Dem:
    elevations: np.ndarray   # (H, W) float64, meters along local +z
    nodata: np.ndarray       # (H, W) bool, True = no terrain under this cell
    cell_size: float         # meters per cell
    frame: LocalFrame
    grid_origin: tuple[float, float]  # local (x, y) of cell (0, 0) center

    def __post_init__(self):
        self.elevations = np.asarray(self.elevations, dtype=np.float64)
        self.nodata = np.asarray(self.nodata, dtype=bool)
        if self.elevations.ndim != 2 or self.elevations.shape != self.nodata.shape:
            raise StructuralError("elevations and nodata must be matching 2-d grids")
        if self.cell_size <= 0:
            raise StructuralError("cell_size must be positive")
        if not np.all(np.isfinite(self.elevations[~self.nodata])):
            raise StructuralError("elevations must be finite outside nodata")

    @property
    def shape(self) -> tuple[int, int]:
        return self.elevations.shape

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (
            self.grid_origin[0] + j * self.cell_size,
            self.grid_origin[1] + i * self.cell_size,
        )


def rasterize_dem(
    mesh: TriangleMesh,
    frame: LocalFrame,
    cell_size: float,
    width: int,
    height: int,
    method: str = "bvh",
) -> Dem:
    """Rasterize by casting a vertical (local -z) ray per cell center.

    The elevation is the highest mesh intersection under the cell, which is
    well defined even over overhangs. The grid is centered on frame.origin.
    """
    if cell_size <= 0:
        raise StructuralError("cell_size must be positive")
    if width < 1 or height < 1:
        raise StructuralError("grid must be at least 1x1")
    frame.validate()

    local = TriangleMesh(frame.to_local(mesh.vertices), mesh.faces)

    x0 = -(width - 1) / 2.0 * cell_size
    y0 = -(height - 1) / 2.0 * cell_size
    z_top = float(local.vertices[:, 2].max()) + 1.0

    jj, ii = np.meshgrid(np.arange(width), np.arange(height))
    xs = x0 + jj.ravel() * cell_size
    ys = y0 + ii.ravel() * cell_size
    origins = np.column_stack([xs, ys, np.full(xs.shape, z_top)])
    dirs = np.tile(np.array([0.0, 0.0, -1.0]), (len(xs), 1))

    caster = TriangleRaycaster(local)
    t, _ = caster.intersect(origins, dirs, method=method)

    hit = np.isfinite(t)
    elev = np.zeros(len(xs), dtype=np.float64)
    elev[hit] = z_top - t[hit]
    dem = Dem(
        elevations=elev.reshape(height, width),
        nodata=~hit.reshape(height, width),
        cell_size=float(cell_size),
        frame=frame,
        grid_origin=(float(x0), float(y0)),
    )
    if not hit.any():
        warnings.warn("mesh footprint does not overlap the DEM grid; all nodata")
    return dem


def bilinear_sample(dem: Dem, x: float, y: float) -> tuple[float, bool]:
    """Bilinear elevation at local (x, y); returns (value, ok).

    ok is False when the point is outside the hull of cell centers or any of
    the four surrounding cells is nodata; the caller decides what invalid
    samples mean.
    """
    h, w = dem.shape
    fx = (x - dem.grid_origin[0]) / dem.cell_size
    fy = (y - dem.grid_origin[1]) / dem.cell_size
    if fx < 0.0 or fy < 0.0 or fx > w - 1 or fy > h - 1:
        return (np.nan, False)
    j0 = min(int(np.floor(fx)), w - 2) if w > 1 else 0
    i0 = min(int(np.floor(fy)), h - 2) if h > 1 else 0
    tx = fx - j0
    ty = fy - i0
    j1 = min(j0 + 1, w - 1)
    i1 = min(i0 + 1, h - 1)
    if dem.nodata[i0, j0] or dem.nodata[i0, j1] or dem.nodata[i1, j0] or dem.nodata[i1, j1]:
        return (np.nan, False)
    e = dem.elevations
    top = (1.0 - tx) * e[i0, j0] + tx * e[i0, j1]
    bot = (1.0 - tx) * e[i1, j0] + tx * e[i1, j1]
    return (float((1.0 - ty) * top + ty * bot), True)


def dem_to_mesh(dem: Dem) -> TriangleMesh:
    """Triangulate the height field (two triangles per fully valid quad).

    Vertices are in local-frame coordinates; used for re-rasterization checks
    and for visual inspection of DEM content.
    """
    h, w = dem.shape
    xs = dem.grid_origin[0] + np.arange(w) * dem.cell_size
    ys = dem.grid_origin[1] + np.arange(h) * dem.cell_size
    xx, yy = np.meshgrid(xs, ys)
    verts = np.column_stack([xx.ravel(), yy.ravel(), dem.elevations.ravel()])

    vid = np.arange(h * w).reshape(h, w)
    ok = ~dem.nodata
    quad_ok = ok[:-1, :-1] & ok[:-1, 1:] & ok[1:, :-1] & ok[1:, 1:]
    qi, qj = np.nonzero(quad_ok)
    a = vid[qi, qj]
    b = vid[qi, qj + 1]
    c = vid[qi + 1, qj]
    d = vid[qi + 1, qj + 1]
    # CCW seen from +z (up)
    faces = np.concatenate(
        [np.column_stack([a, b, d]), np.column_stack([a, d, c])]
    )
    return TriangleMesh(verts, faces)


def save_dem(prefix: str | Path, dem: Dem) -> None:
    """Write <prefix>_elev.npy (float32), <prefix>_nodata.npy (uint8), <prefix>_dem.json."""
    prefix = Path(prefix)
    save_npy(prefix.parent / f"{prefix.name}_elev.npy", dem.elevations.astype(np.float32))
    save_npy(prefix.parent / f"{prefix.name}_nodata.npy", dem.nodata.astype(np.uint8))
    save_json(
        prefix.parent / f"{prefix.name}_dem.json",
        {
            "cell_size": dem.cell_size,
            "grid_origin": [dem.grid_origin[0], dem.grid_origin[1]],
            "frame_rotation": [float(v) for v in dem.frame.rotation.ravel()],
            "frame_origin": [float(v) for v in dem.frame.origin],
        },
    )


def load_dem(prefix: str | Path) -> Dem:
    prefix = Path(prefix)
    elev = load_npy(prefix.parent / f"{prefix.name}_elev.npy", dtype=np.float32, ndim=2)
    nodata = load_npy(prefix.parent / f"{prefix.name}_nodata.npy", dtype=np.uint8, ndim=2)
    meta = load_json(prefix.parent / f"{prefix.name}_dem.json")
    frame = LocalFrame(
        origin=np.asarray(meta["frame_origin"], dtype=np.float64),
        rotation=np.asarray(meta["frame_rotation"], dtype=np.float64).reshape(3, 3),
    )
    return Dem(
        elevations=elev.astype(np.float64),
        nodata=nodata.astype(bool),
        cell_size=float(meta["cell_size"]),
        frame=frame,
        grid_origin=(float(meta["grid_origin"][0]), float(meta["grid_origin"][1])),
    )
