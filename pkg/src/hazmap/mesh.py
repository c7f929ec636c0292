"""Triangle meshes: representation, derived geometry, and Wavefront OBJ I/O.

Meshes live in a body-fixed frame with coordinates in meters. Faces wind
counter-clockwise seen from outside, so normals derived from the winding
point outward and the signed volume of a watertight mesh is positive.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import StructuralError
from .io_utils import atomic_write_bytes, load_json


@dataclass
class EdgeTable:
    """Unique undirected edges with their adjacent faces.

    ``vertex_pairs[e]`` holds the edge endpoints ordered as traversed by
    ``faces[e, 0]``; ``faces[e, 1]`` is -1 for boundary edges.
    """

    vertex_pairs: np.ndarray  # (n_edges, 2) int64
    faces: np.ndarray         # (n_edges, 2) int64
    manifold: bool            # every edge has exactly 2 faces, opposite winding


class TriangleMesh:
    """Indexed triangle mesh (vertices in meters, body-fixed frame)."""

    def __init__(self, vertices, faces):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise StructuralError("vertices must have shape (n, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise StructuralError("faces must have shape (m, 3)")
        if self.faces.size and (
            self.faces.min() < 0 or self.faces.max() >= len(self.vertices)
        ):
            raise StructuralError("face vertex index out of range")
        self._edges: EdgeTable | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def edges(self) -> EdgeTable:
        if self._edges is None:
            self._edges = self._build_edges()
        return self._edges

    def _build_edges(self) -> EdgeTable:
        f = self.faces
        # directed half-edges in winding order, tagged with their face
        he = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        he_face = np.tile(np.arange(len(f), dtype=np.int64), 3)
        lo = np.minimum(he[:, 0], he[:, 1])
        hi = np.maximum(he[:, 0], he[:, 1])
        key = lo * self.n_vertices + hi
        order = np.argsort(key, kind="stable")
        key_s, he_s, face_s = key[order], he[order], he_face[order]
        _, start, counts = np.unique(key_s, return_index=True, return_counts=True)

        pairs = he_s[start]
        efaces = np.full((len(start), 2), -1, dtype=np.int64)
        efaces[:, 0] = face_s[start]
        manifold = bool(np.all(counts == 2))
        if manifold:
            second = start + 1
            efaces[:, 1] = face_s[second]
            # opposite traversal directions <=> consistent outward winding
            manifold = bool(
                np.all(
                    (he_s[start, 0] == he_s[second, 1])
                    & (he_s[start, 1] == he_s[second, 0])
                )
            )
        else:
            has_two = counts >= 2
            efaces[has_two, 1] = face_s[start[has_two] + 1]
        return EdgeTable(pairs, efaces, manifold)

    @property
    def watertight(self) -> bool:
        return self.n_faces > 0 and self.edges.manifold

    def require_watertight(self, what: str = "operation") -> None:
        if not self.watertight:
            raise StructuralError(
                f"{what} requires a watertight, consistently wound mesh"
            )

    def face_normals(self, normalized: bool = True) -> np.ndarray:
        v = self.vertices
        f = self.faces
        n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        if normalized:
            norm = np.linalg.norm(n, axis=1, keepdims=True)
            norm[norm == 0.0] = 1.0
            n = n / norm
        return n

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(normalized=False), axis=1)

    def mean_edge_length(self) -> float:
        p = self.edges.vertex_pairs
        d = self.vertices[p[:, 0]] - self.vertices[p[:, 1]]
        return float(np.mean(np.linalg.norm(d, axis=1)))

    def bounding_radius(self, center=None) -> float:
        c = np.zeros(3) if center is None else np.asarray(center, dtype=np.float64)
        return float(np.max(np.linalg.norm(self.vertices - c, axis=1)))

    def transformed(self, rotation=None, translation=None) -> "TriangleMesh":
        """Return a copy with vertices mapped through v -> R v + t."""
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return TriangleMesh(v, self.faces.copy())


def mesh_volume(mesh: TriangleMesh) -> float:
    """Signed volume from the divergence theorem (sum of origin tetrahedra).

    Positive for outward winding; negating the winding negates the result.
    """
    mesh.require_watertight("mesh_volume")
    v = mesh.vertices
    f = mesh.faces
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    return float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0)


def load_obj(path: str | Path) -> TriangleMesh:
    """Load vertices and triangular faces from a Wavefront OBJ file.

    Only ``v`` and ``f`` records are honored; any other record type raises a
    single warning. A JSON sidecar ``<stem>.json`` next to the file may carry
    ``{"scale": s}`` to convert non-meter units (vertices multiplied by s).
    """
    path = Path(path)
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    ignored: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise StructuralError(f"{path}:{lineno}: malformed vertex record")
                vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
            elif tag == "f":
                idx = [p.split("/")[0] for p in parts[1:]]
                if len(idx) != 3:
                    raise StructuralError(
                        f"{path}:{lineno}: only triangular faces are supported"
                    )
                tri = []
                for s in idx:
                    i = int(s)
                    tri.append(i - 1 if i > 0 else len(vertices) + i)
                faces.append(tuple(tri))
            else:
                ignored.add(tag)
    if ignored:
        warnings.warn(
            f"{path}: ignored OBJ record types: {', '.join(sorted(ignored))}",
            stacklevel=2,
        )
    verts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        meta = load_json(sidecar)
        scale = float(meta.get("scale", 1.0))
        if scale <= 0:
            raise StructuralError(f"{sidecar}: scale must be positive")
        verts = verts * scale
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64).reshape(-1, 3))


def save_obj(path: str | Path, mesh: TriangleMesh) -> None:
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    for a, b, c in mesh.faces:
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def closest_surface_point(mesh: TriangleMesh, point) -> tuple[np.ndarray, int]:
    """Closest point on the mesh surface and the face that contains it."""
    from ._kernels import closest_point_kernel

    p = np.asarray(point, dtype=np.float64).reshape(3)
    v = mesh.vertices
    f = mesh.faces
    best, face = closest_point_kernel(
        np.ascontiguousarray(v[f[:, 0]]),
        np.ascontiguousarray(v[f[:, 1]]),
        np.ascontiguousarray(v[f[:, 2]]),
        p,
    )
    return best, int(face)
