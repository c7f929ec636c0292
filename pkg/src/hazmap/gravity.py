"""Constant-density polyhedron gravity and the gravity-aligned local frame.

The field is evaluated with the closed-form edge/face summation for a
homogeneous polyhedron: per-face dyads weighted by the signed solid angle of
the face, plus per-edge dyads weighted by a log potential term. The result
is exact (to floating point) everywhere strictly outside a watertight mesh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateFrameError, DomainError, StructuralError
from .mesh import TriangleMesh, closest_surface_point

# CODATA 2018 Newtonian constant of gravitation, m^3 kg^-1 s^-2
GRAVITATIONAL_CONSTANT = 6.67430e-11

# |sum of solid angles| above this marks the query point as interior
_INTERIOR_OMEGA = 2.0 * np.pi


@dataclass(frozen=True)
class GravityParams:
    """Constant density model parameters."""

    density: float  # kg/m^3
    gravitational_constant: float = GRAVITATIONAL_CONSTANT

    def __post_init__(self):
        if self.density <= 0:
            raise StructuralError("density must be positive")
        if self.gravitational_constant <= 0:
            raise StructuralError("gravitational constant must be positive")


class PolyhedronGravity:
    """Per-mesh precomputation of the edge and face dyads.

    Immutable after construction; evaluation is pure, so one instance can be
    shared across threads and queried densely (oracles, grids).
    """

    def __init__(self, mesh: TriangleMesh):
        mesh.require_watertight("polyhedron gravity")
        self.mesh = mesh
        v = mesh.vertices
        f = mesh.faces
        normals = mesh.face_normals()
        self._fv0 = np.ascontiguousarray(v[f[:, 0]])
        self._fv1 = np.ascontiguousarray(v[f[:, 1]])
        self._fv2 = np.ascontiguousarray(v[f[:, 2]])
        self._fnorm = np.ascontiguousarray(normals)

        # E_e = n_A (e_A x n_A)^T + n_B (e_B x n_B)^T accumulated over the
        # two half-edges (opposite directions) of each unique edge
        edges = mesh.edges
        pairs = edges.vertex_pairs
        n_e = len(pairs)
        n_v = mesh.n_vertices
        emat = np.zeros((n_e, 3, 3), dtype=np.float64)

        edge_keys = np.minimum(pairs[:, 0], pairs[:, 1]) * n_v + np.maximum(
            pairs[:, 0], pairs[:, 1]
        )
        key_order = np.argsort(edge_keys)
        sorted_keys = edge_keys[key_order]

        for col in range(3):
            a = f[:, col]
            b = f[:, (col + 1) % 3]
            evec = v[b] - v[a]
            ehat = evec / np.linalg.norm(evec, axis=1, keepdims=True)
            edge_out = np.cross(ehat, normals)
            contrib = normals[:, :, None] * edge_out[:, None, :]
            keys = np.minimum(a, b) * n_v + np.maximum(a, b)
            slots = key_order[np.searchsorted(sorted_keys, keys)]
            np.add.at(emat, slots, contrib)

        self._e0 = np.ascontiguousarray(v[pairs[:, 0]])
        self._e1 = np.ascontiguousarray(v[pairs[:, 1]])
        self._emat = np.ascontiguousarray(emat)

    def acceleration(self, params: GravityParams, points, check_interior: bool = True):
        """Gravitational acceleration (m/s^2) at one point or a batch.

        Raises DomainError when any query point lies inside the body (solid
        angle sum near 4*pi) and check_interior is set.
        """
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        pts = np.ascontiguousarray(pts.reshape(-1, 3))
        g_rho = params.gravitational_constant * params.density
        acc, omega = _kernels.gravity_kernel(
            self._fv0, self._fv1, self._fv2, self._fnorm,
            self._e0, self._e1, self._emat, pts, g_rho,
        )
        if check_interior and np.any(np.abs(omega) > _INTERIOR_OMEGA):
            bad = int(np.argmax(np.abs(omega)))
            raise DomainError(
                f"query point {pts[bad]} is inside or on the body "
                f"(|solid angle sum| = {abs(omega[bad]):.3f})"
            )
        return (acc[0], float(omega[0])) if single else (acc, omega)


def polyhedron_gravity(mesh: TriangleMesh, params: GravityParams, point) -> np.ndarray:
    """One-shot exterior acceleration; prefer PolyhedronGravity for dense use."""
    acc, _ = PolyhedronGravity(mesh).acceleration(params, point)
    return acc


@dataclass
class LocalFrame:
    """Right-handed surface frame with +z opposite the local gravity vector.

    ``rotation`` maps body-fixed vectors into the local frame; its rows are
    the local axes expressed in body coordinates.
    """

    origin: np.ndarray    # (3,) body-fixed, on the surface
    rotation: np.ndarray  # (3, 3) body -> local

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)

    @property
    def z_axis(self) -> np.ndarray:
        return self.rotation[2]

    def validate(self, tol: float = 1e-12) -> None:
        r = self.rotation
        if not np.allclose(r @ r.T, np.eye(3), atol=tol):
            raise StructuralError("frame rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise StructuralError("frame rotation is left-handed")

    def to_local(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return (p - self.origin) @ self.rotation.T

    def to_body(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation + self.origin


def frame_from_gravity(origin, gravity_vector) -> LocalFrame:
    """Axis construction rule: +z opposite gravity, +x the body +x projected
    perpendicular to z (body +y when that projection degenerates), +y = z x x."""
    g = np.asarray(gravity_vector, dtype=np.float64).reshape(3)
    g_norm = np.linalg.norm(g)
    if g_norm < 1e-300:
        raise DegenerateFrameError("gravity vector vanishes at the surface point")
    z = -g / g_norm
    x = np.array([1.0, 0.0, 0.0])
    x = x - np.dot(x, z) * z
    if np.linalg.norm(x) < 1e-6:
        x = np.array([0.0, 1.0, 0.0])
        x = x - np.dot(x, z) * z
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    frame = LocalFrame(origin=origin, rotation=np.vstack([x, y, z]))
    frame.validate()
    return frame


def build_local_frame(
    mesh: TriangleMesh,
    params: GravityParams,
    surface_point,
    surface_epsilon: float | None = None,
    gravity_model: PolyhedronGravity | None = None,
) -> LocalFrame:
    """Construct the gravity-aligned frame at a point on the mesh surface.

    The query point is snapped to the nearest surface point and gravity is
    evaluated just outside the surface (nudged along the local face normal by
    ``surface_epsilon``, default 1e-3 x mean edge length).
    """
    model = gravity_model if gravity_model is not None else PolyhedronGravity(mesh)
    if surface_epsilon is None:
        surface_epsilon = 1e-3 * mesh.mean_edge_length()
    origin, face = closest_surface_point(mesh, surface_point)
    normal = mesh.face_normals()[face]
    eval_point = origin + surface_epsilon * normal
    g, _ = model.acceleration(params, eval_point)
    return frame_from_gravity(origin, g)
