"""Ray casting against triangle meshes: BVH-accelerated with a brute-force
reference path selectable per call (``method="brute"``) for oracle testing.

Both paths share the same triangle test and the same nearest-hit rule
(smallest t, ties to the smallest triangle index), so they agree bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import StructuralError
from .mesh import TriangleMesh

_LEAF_SIZE = 8


@dataclass
class Bvh:
    node_lo: np.ndarray
    node_hi: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_start: np.ndarray
    node_count: np.ndarray
    tri_order: np.ndarray


def build_bvh(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> Bvh:
    """Median-split BVH over triangle centroids."""
    m = len(v0)
    lo = np.minimum(np.minimum(v0, v1), v2)
    hi = np.maximum(np.maximum(v0, v1), v2)
    cent = (v0 + v1 + v2) / 3.0
    order = np.arange(m, dtype=np.int64)

    node_lo: list[np.ndarray] = []
    node_hi: list[np.ndarray] = []
    node_left: list[int] = []
    node_right: list[int] = []
    node_start: list[int] = []
    node_count: list[int] = []

    def new_node() -> int:
        node_lo.append(np.zeros(3))
        node_hi.append(np.zeros(3))
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(0)
        node_count.append(0)
        return len(node_lo) - 1

    stack = [(0, m, new_node())]
    while stack:
        s, e, ni = stack.pop()
        idx = order[s:e]
        node_lo[ni] = lo[idx].min(axis=0)
        node_hi[ni] = hi[idx].max(axis=0)
        c = cent[idx]
        spread = c.max(axis=0) - c.min(axis=0)
        if e - s <= _LEAF_SIZE or float(spread.max()) == 0.0:
            node_start[ni] = s
            node_count[ni] = e - s
            continue
        axis = int(np.argmax(spread))
        mid = (e - s) // 2
        part = np.argpartition(c[:, axis], mid)
        order[s:e] = idx[part]
        left = new_node()
        right = new_node()
        node_left[ni] = left
        node_right[ni] = right
        stack.append((s, s + mid, left))
        stack.append((s + mid, e, right))

    return Bvh(
        np.ascontiguousarray(node_lo, dtype=np.float64),
        np.ascontiguousarray(node_hi, dtype=np.float64),
        np.asarray(node_left, dtype=np.int64),
        np.asarray(node_right, dtype=np.int64),
        np.asarray(node_start, dtype=np.int64),
        np.asarray(node_count, dtype=np.int64),
        order,
    )


class TriangleRaycaster:
    """Reusable ray-cast context for one mesh (triangles unpacked, BVH built)."""

    def __init__(self, mesh: TriangleMesh):
        if mesh.n_faces == 0:
            raise StructuralError("cannot ray cast an empty mesh")
        v = mesh.vertices
        f = mesh.faces
        self.v0 = np.ascontiguousarray(v[f[:, 0]])
        self.v1 = np.ascontiguousarray(v[f[:, 1]])
        self.v2 = np.ascontiguousarray(v[f[:, 2]])
        self.bvh = build_bvh(self.v0, self.v1, self.v2)

    def _prep(self, origins, dirs, skip):
        origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
        dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
        if len(dirs) != len(origins):
            raise StructuralError("origins and dirs must have matching lengths")
        if skip is None:
            skip = np.full(len(origins), -1, dtype=np.int64)
        else:
            skip = np.ascontiguousarray(skip, dtype=np.int64).reshape(-1)
        return origins, dirs, skip

    def intersect(self, origins, dirs, t_min: float = 0.0, skip=None, method: str = "bvh"):
        """Nearest hits for a batch of rays.

        Returns (t, tri_index); misses carry t=inf and index -1.
        """
        origins, dirs, skip = self._prep(origins, dirs, skip)
        if method == "bvh":
            b = self.bvh
            return _kernels.bvh_intersect_batch(
                b.node_lo, b.node_hi, b.node_left, b.node_right,
                b.node_start, b.node_count, b.tri_order,
                self.v0, self.v1, self.v2, origins, dirs, float(t_min), skip,
            )
        if method == "brute":
            return _kernels.brute_intersect_batch(
                self.v0, self.v1, self.v2, origins, dirs, float(t_min), skip,
            )
        raise StructuralError(f"unknown ray method {method!r}")

    def occluded(self, origins, dirs, t_min: float = 0.0, skip=None, method: str = "bvh"):
        """True where any triangle blocks the ray beyond t_min."""
        origins, dirs, skip = self._prep(origins, dirs, skip)
        if method == "bvh":
            b = self.bvh
            out = _kernels.bvh_occluded_batch(
                b.node_lo, b.node_hi, b.node_left, b.node_right,
                b.node_start, b.node_count, b.tri_order,
                self.v0, self.v1, self.v2, origins, dirs, float(t_min), skip,
            )
        elif method == "brute":
            out = _kernels.brute_occluded_batch(
                self.v0, self.v1, self.v2, origins, dirs, float(t_min), skip,
            )
        else:
            raise StructuralError(f"unknown ray method {method!r}")
        return out.astype(bool)
