import numpy as np
import pytest

from hazmap.dem import Dem
from hazmap.gravity import LocalFrame
from hazmap.mesh import TriangleMesh


def make_cube(side: float = 1.0, center=(0.0, 0.0, 0.0), reverse: bool = False) -> TriangleMesh:
    """Axis-aligned cube with outward (or reversed) winding."""
    h = side / 2.0
    cx, cy, cz = center
    v = np.array(
        [[x, y, z] for x in (-h, h) for y in (-h, h) for z in (-h, h)], dtype=np.float64
    ) + np.array([cx, cy, cz])

    def quad(a, b, c, d):
        return [(a, b, c), (a, c, d)]

    f = []
    f += quad(0, 1, 3, 2)  # -x
    f += quad(4, 6, 7, 5)  # +x
    f += quad(0, 4, 5, 1)  # -y
    f += quad(2, 3, 7, 6)  # +y
    f += quad(0, 2, 6, 4)  # -z
    f += quad(1, 5, 7, 3)  # +z
    faces = np.array(f, dtype=np.int64)
    if reverse:
        faces = faces[:, ::-1]
    return TriangleMesh(v, faces)


def identity_frame() -> LocalFrame:
    return LocalFrame(origin=np.zeros(3), rotation=np.eye(3))


def make_dem(elevations, cell_size: float = 0.05, nodata=None) -> Dem:
    elev = np.asarray(elevations, dtype=np.float64)
    if nodata is None:
        nodata = np.zeros(elev.shape, dtype=bool)
    return Dem(
        elevations=elev,
        nodata=nodata,
        cell_size=cell_size,
        frame=identity_frame(),
        grid_origin=(
            -(elev.shape[1] - 1) / 2.0 * cell_size,
            -(elev.shape[0] - 1) / 2.0 * cell_size,
        ),
    )


def fractal_surface(seed: int, h: int, w: int, cell: float, amplitude: float, beta: float = 2.2):
    """Smooth random surface via spectral shaping; deterministic in the seed."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((h, w))
    ky = np.fft.fftfreq(h)[:, None]
    kx = np.fft.fftfreq(w)[None, :]
    k = np.sqrt(kx * kx + ky * ky)
    k[0, 0] = 1.0
    shaped = np.fft.ifft2(np.fft.fft2(noise) * k ** (-beta / 2.0)).real
    shaped[...] -= shaped.mean()
    rms = np.sqrt(np.mean(shaped**2))
    return shaped * (amplitude / rms)


def fractal_dem(seed: int, h: int = 64, w: int = 64, cell: float = 0.05,
                amplitude: float = 0.02, beta: float = 2.2) -> Dem:
    return make_dem(fractal_surface(seed, h, w, cell, amplitude, beta), cell_size=cell)


def boulder_field_dem(seed: int, h: int = 64, w: int = 64, cell: float = 0.05) -> Dem:
    """Rolling terrain with a random tilt plus sparse decisive boulders.

    Bump heights are drawn away from the 3.5 cm roughness threshold (either
    clearly benign or clearly hazardous), as in a regolith boulder field.
    """
    rng = np.random.default_rng(seed + 10_000)
    base = fractal_surface(seed, h, w, cell, amplitude=0.006, beta=3.5)
    ys = np.arange(h)[:, None] * cell
    xs = np.arange(w)[None, :] * cell
    tilt = np.tan(np.radians(rng.uniform(0.0, 22.0)))
    az = rng.uniform(0.0, 2.0 * np.pi)
    surf = base + tilt * (np.cos(az) * xs + np.sin(az) * ys)
    bumps = np.zeros_like(surf)
    for _ in range(rng.poisson(20)):
        cx = rng.uniform(0, w * cell)
        cy = rng.uniform(0, h * cell)
        r = rng.uniform(0.08, 0.22)
        hh = rng.uniform(0.06, 0.15) if rng.uniform() < 0.5 else rng.uniform(0.004, 0.012)
        d2 = (xs - cx) ** 2 + (ys - cy) ** 2
        bumps = np.maximum(bumps, hh * np.exp(-d2 / (2 * (r / 3.0) ** 2)))
    return make_dem(surf + bumps, cell_size=cell)


@pytest.fixture
def cube() -> TriangleMesh:
    return make_cube()
