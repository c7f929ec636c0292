"""Worst-case landing-plane slope/roughness hazards over a DEM.

For every cell and every sampled lander orientation, four pad elevations are
bilinear-sampled on the perimeter circle, the resting plane is chosen as the
maximum-tilt stable pad triple (a triple is stable when the fourth pad does
not poke above its plane), and roughness is the largest perpendicular height
of footprint terrain above that plane. Slope and roughness are maxima over
orientations; thresholding yields the safe/unsafe/invalid verdict per cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .dem import Dem, bilinear_sample
from .errors import StructuralError
from .io_utils import load_json, load_npy, save_json, save_npy

SAFE = 1
UNSAFE = 0
INVALID = 255

_STABLE_TOL = 1e-12  # meters; fourth pad may sit this far above a stable plane


@dataclass(frozen=True)
class SafetyConfig:
    lander_diameter: float = 0.35       # m
    slope_threshold: float = 30.0       # deg
    roughness_threshold: float = 0.035  # m
    orientation_samples: int = 30       # over [0, 90) deg; 4-pad symmetry
    pad_count: int = 4

    def __post_init__(self):
        if self.lander_diameter <= 0:
            raise StructuralError("lander_diameter must be positive")
        if self.slope_threshold <= 0 or self.roughness_threshold <= 0:
            raise StructuralError("thresholds must be positive")
        if self.orientation_samples < 1:
            raise StructuralError("orientation_samples must be >= 1")
        if self.pad_count != 4:
            raise StructuralError("only the 4-pad lander geometry is supported")

    def to_dict(self) -> dict:
        return {
            "lander_diameter": self.lander_diameter,
            "slope_threshold": self.slope_threshold,
            "roughness_threshold": self.roughness_threshold,
            "orientation_samples": self.orientation_samples,
            "pad_count": self.pad_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SafetyConfig":
        return cls(**d)


@dataclass
class HazardMap:
    slope: np.ndarray      # (H, W) float64 deg, worst case (NaN where unknown)
    roughness: np.ndarray  # (H, W) float64 m, worst case (NaN where unknown)
    safe: np.ndarray       # (H, W) uint8 codes {UNSAFE, SAFE, INVALID}
    config: SafetyConfig
    cell_size: float
    grid_origin: tuple[float, float]

    @property
    def shape(self) -> tuple[int, int]:
        return self.safe.shape


def _orientation_angles(n: int) -> np.ndarray:
    return np.arange(n) * (math.pi / 2.0) / n


def _pad_tables(config: SafetyConfig, cell: float):
    """Per-orientation pad offsets and their grid-aligned bilinear splits.

    Pad offsets relative to a cell center have the same fractional grid
    position for every cell, so the integer base offset and the bilinear
    fractions can be precomputed once per orientation.
    """
    r = config.lander_diameter / 2.0
    theta = _orientation_angles(config.orientation_samples)
    phi = theta[:, None] + np.arange(4)[None, :] * (math.pi / 2.0)
    ox = r * np.cos(phi)
    oy = r * np.sin(phi)
    fj = ox / cell
    fi = oy / cell
    bj = np.floor(fj).astype(np.int64)
    bi = np.floor(fi).astype(np.int64)
    tx = fj - bj
    ty = fi - bi
    return bi, bj, tx, ty, ox, oy


def _disc_offsets(config: SafetyConfig, cell: float):
    """Integer offsets of cell centers within the footprint disc."""
    r = config.lander_diameter / 2.0
    reach = int(math.floor(r / cell + 1e-9))
    d = np.arange(-reach, reach + 1)
    di, dj = np.meshgrid(d, d, indexing="ij")
    keep = (di * di + dj * dj) * cell * cell <= r * r + 1e-12
    di = di[keep].astype(np.int64)
    dj = dj[keep].astype(np.int64)
    return di, dj, dj * cell, di * cell


def edge_margin_cells(config: SafetyConfig, cell: float) -> int:
    """Cells whose center is within the lander radius of the grid edge are invalid."""
    return int(math.ceil(config.lander_diameter / 2.0 / cell - 1e-9))


def evaluate_dem(dem: Dem, config: SafetyConfig) -> HazardMap:
    """Apply the per-cell sweep to the whole grid and threshold the verdicts."""
    bi, bj, tx, ty, ox, oy = _pad_tables(config, dem.cell_size)
    disc_di, disc_dj, disc_dx, disc_dy = _disc_offsets(config, dem.cell_size)
    margin = edge_margin_cells(config, dem.cell_size)
    valid = np.ascontiguousarray(~dem.nodata)
    slope, rough, state = _kernels.alhat_kernel(
        np.ascontiguousarray(dem.elevations),
        valid,
        dem.cell_size,
        margin,
        bi, bj,
        np.ascontiguousarray(tx), np.ascontiguousarray(ty),
        np.ascontiguousarray(ox), np.ascontiguousarray(oy),
        disc_di, disc_dj,
        np.ascontiguousarray(disc_dx, dtype=np.float64),
        np.ascontiguousarray(disc_dy, dtype=np.float64),
        _STABLE_TOL,
    )
    safe = np.full(dem.shape, INVALID, dtype=np.uint8)
    ok = state == 1
    unsafe = (slope > config.slope_threshold) | (rough > config.roughness_threshold)
    safe[ok & ~unsafe] = SAFE
    safe[ok & unsafe] = UNSAFE
    return HazardMap(
        slope=slope,
        roughness=rough,
        safe=safe,
        config=config,
        cell_size=dem.cell_size,
        grid_origin=dem.grid_origin,
    )


def evaluate_cell(dem: Dem, cell: tuple[int, int], config: SafetyConfig):
    """Reference per-cell evaluation in plain numpy.

    Returns (slope deg, roughness m, valid). Mirrors the grid kernel through
    the public bilinear sampler; used as the cross-check path in tests and
    for inspecting single cells.
    """
    i, j = cell
    h, w = dem.shape
    if not (0 <= i < h and 0 <= j < w):
        raise StructuralError("cell outside grid")
    margin = edge_margin_cells(config, dem.cell_size)
    if i < margin or j < margin or i >= h - margin or j >= w - margin:
        return (math.nan, math.nan, False)
    cx, cy = dem.cell_center(i, j)
    r = config.lander_diameter / 2.0
    ok = True

    disc_di, disc_dj, disc_dx, disc_dy = _disc_offsets(config, dem.cell_size)
    fz = []
    fxy = []
    for di, dj, dx, dy in zip(disc_di, disc_dj, disc_dx, disc_dy):
        ii, jj = i + di, j + dj
        if ii < 0 or jj < 0 or ii >= h or jj >= w or dem.nodata[ii, jj]:
            ok = False
            continue
        fz.append(dem.elevations[ii, jj])
        fxy.append((dx, dy))
    fz = np.asarray(fz)
    fxy = np.asarray(fxy).reshape(-1, 2)

    slope_max = -1.0
    rough_max = -1.0
    any_orientation = False
    for theta in _orientation_angles(config.orientation_samples):
        phi = theta + np.arange(4) * (math.pi / 2.0)
        px = cx + r * np.cos(phi)
        py = cy + r * np.sin(phi)
        pz = np.empty(4)
        pads_ok = True
        for k in range(4):
            z, good = bilinear_sample(dem, px[k], py[k])
            if not good:
                pads_ok = False
                break
            pz[k] = z
        if not pads_ok:
            ok = False
            continue
        any_orientation = True
        plane = _resting_plane(px - cx, py - cy, pz)
        if plane is None:
            continue
        tilt, a, b, c = plane
        slope_max = max(slope_max, tilt)
        if len(fz):
            dzs = fz - (a * fxy[:, 0] + b * fxy[:, 1] + c)
            hi = max(0.0, float(dzs.max()))
        else:
            hi = 0.0
        rough_max = max(rough_max, hi / math.sqrt(1.0 + a * a + b * b))
    if not any_orientation:
        return (math.nan, math.nan, False)
    return (math.degrees(slope_max), rough_max, ok)


def _resting_plane(ox, oy, pz):
    """Max-tilt stable pad triple; returns (tilt rad, a, b, c) of z = ax+by+c."""
    dd = (pz[0] + pz[2]) - (pz[1] + pz[3])
    best = None
    for omit in range(4):
        stable = (dd <= _STABLE_TOL) if omit in (0, 2) else (-dd <= _STABLE_TOL)
        if not stable:
            continue
        ks = [(omit + 1) % 4, (omit + 2) % 4, (omit + 3) % 4]
        p = np.array([[ox[k], oy[k], pz[k]] for k in ks])
        n = np.cross(p[1] - p[0], p[2] - p[0])
        if n[2] < 0:
            n = -n
        if n[2] == 0.0:
            continue
        tilt = math.atan2(math.hypot(n[0], n[1]), n[2])
        if best is None or tilt > best[0]:
            a = -n[0] / n[2]
            b = -n[1] / n[2]
            c = p[0, 2] - a * p[0, 0] - b * p[0, 1]
            best = (tilt, a, b, c)
    return best


def roughness_only_map(hazard: HazardMap) -> HazardMap:
    """Re-threshold ignoring slope; the relaxed predicate never shrinks the safe set."""
    safe = np.full(hazard.shape, INVALID, dtype=np.uint8)
    known = hazard.safe != INVALID
    unsafe = hazard.roughness > hazard.config.roughness_threshold
    safe[known & ~unsafe] = SAFE
    safe[known & unsafe] = UNSAFE
    return HazardMap(
        slope=hazard.slope.copy(),
        roughness=hazard.roughness.copy(),
        safe=safe,
        config=hazard.config,
        cell_size=hazard.cell_size,
        grid_origin=hazard.grid_origin,
    )


def save_hazard(prefix: str | Path, hazard: HazardMap) -> None:
    """Write <prefix>_slope.npy, <prefix>_rough.npy, <prefix>_safe.npy, <prefix>_hazard.json."""
    prefix = Path(prefix)
    save_npy(prefix.parent / f"{prefix.name}_slope.npy", hazard.slope.astype(np.float32))
    save_npy(prefix.parent / f"{prefix.name}_rough.npy", hazard.roughness.astype(np.float32))
    save_npy(prefix.parent / f"{prefix.name}_safe.npy", hazard.safe)
    save_json(
        prefix.parent / f"{prefix.name}_hazard.json",
        {
            "config": hazard.config.to_dict(),
            "cell_size": hazard.cell_size,
            "grid_origin": [hazard.grid_origin[0], hazard.grid_origin[1]],
        },
    )


def load_hazard(prefix: str | Path) -> HazardMap:
    prefix = Path(prefix)
    slope = load_npy(prefix.parent / f"{prefix.name}_slope.npy", dtype=np.float32, ndim=2)
    rough = load_npy(prefix.parent / f"{prefix.name}_rough.npy", dtype=np.float32, ndim=2)
    safe = load_npy(prefix.parent / f"{prefix.name}_safe.npy", dtype=np.uint8, ndim=2)
    meta = load_json(prefix.parent / f"{prefix.name}_hazard.json")
    return HazardMap(
        slope=slope.astype(np.float64),
        roughness=rough.astype(np.float64),
        safe=safe,
        config=SafetyConfig.from_dict(meta["config"]),
        cell_size=float(meta["cell_size"]),
        grid_origin=(float(meta["grid_origin"][0]), float(meta["grid_origin"][1])),
    )
