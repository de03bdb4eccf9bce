"""Empirical goal-space construction.

The reachable set of the arm is unknown and non-convex, so the goal
space is built from data: sample random postures, take the convex hull
of the observed end-effector positions, intersect the hull with a cube
grid, and (after learning) drop grid goals that no prototype sphere
covers. Grid provenance is tracked through the pipeline:
``empirical`` point cloud -> ``convex`` grid -> ``cut`` grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import derive_rng

HULL_TOL = 1e-9


class DegenerateInput(ValueError):
    """Input points are collinear or coplanar within tolerance."""


@dataclass
class ConvexHull:
    """Triangulated 3-D convex hull with outward face normals."""

    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 3) indices into vertices, outward oriented
    normals: np.ndarray  # (F, 3) unit outward normals
    offsets: np.ndarray  # (F,) normal . x == offset on the face plane

    def contains(self, points, tol: float = HULL_TOL):
        """Half-space test for each point, boundary counts as inside."""
        pts = np.atleast_2d(points)
        dist = pts @ self.normals.T - self.offsets
        return np.all(dist <= tol, axis=1)

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def to_doc(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "faces": self.faces.tolist(),
            "normals": self.normals.tolist(),
            "offsets": self.offsets.tolist(),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ConvexHull":
        return cls(
            vertices=np.asarray(doc["vertices"], dtype=float),
            faces=np.asarray(doc["faces"], dtype=int),
            normals=np.asarray(doc["normals"], dtype=float),
            offsets=np.asarray(doc["offsets"], dtype=float),
        )


@dataclass
class GoalGrid:
    """A set of goal points plus how it was obtained."""

    goals: np.ndarray  # (N, 3)
    spacing: float
    provenance: str  # empirical | convex | cut

    def __len__(self):
        return len(self.goals)

    def to_doc(self) -> dict:
        return {
            "goals": self.goals.tolist(),
            "spacing": self.spacing,
            "provenance": self.provenance,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "GoalGrid":
        return cls(
            goals=np.asarray(doc["goals"], dtype=float).reshape(-1, 3),
            spacing=float(doc["spacing"]),
            provenance=str(doc["provenance"]),
        )


def sample_empirical(plant, count: int, rng=None):
    """Noiseless end-effector positions of `count` uniform random postures."""
    if count < 4:
        raise ValueError("need at least 4 samples for a 3-D hull")
    rng = rng if rng is not None else derive_rng(plant.config.seed, "goalspace")
    postures = plant.random_postures(count, rng=rng)
    return plant.noiseless_positions(postures)


def _initial_simplex(pts, tol):
    """Indices of 4 affinely independent points, extremes first."""
    i0 = int(np.argmin(pts[:, 0]))
    d = np.linalg.norm(pts - pts[i0], axis=1)
    i1 = int(np.argmax(d))
    if d[i1] <= tol:
        raise DegenerateInput("all points coincide")
    seg = pts[i1] - pts[i0]
    cross = np.cross(seg, pts - pts[i0])
    area = np.linalg.norm(cross, axis=1)
    i2 = int(np.argmax(area))
    if area[i2] <= tol * np.linalg.norm(seg):
        raise DegenerateInput("points are collinear")
    normal = np.cross(seg, pts[i2] - pts[i0])
    vol = (pts - pts[i0]) @ normal
    i3 = int(np.argmax(np.abs(vol)))
    if np.abs(vol[i3]) <= tol * np.linalg.norm(normal):
        raise DegenerateInput("points are coplanar")
    return i0, i1, i2, i3


def _face_plane(pts, tri):
    a, b, c = pts[tri[0]], pts[tri[1]], pts[tri[2]]
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    n = n / norm
    return n, float(n @ a)


def convex_hull(points, tol: float = HULL_TOL) -> ConvexHull:
    """Incremental 3-D convex hull of a point cloud.

    Every face is oriented outward; raises DegenerateInput when the
    points span less than three dimensions.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must have shape (N, 3)")
    if len(pts) < 4:
        raise DegenerateInput("need at least 4 points")

    i0, i1, i2, i3 = _initial_simplex(pts, tol)
    centroid = pts[[i0, i1, i2, i3]].mean(axis=0)
    faces = []
    for tri in ((i0, i1, i2), (i0, i1, i3), (i0, i2, i3), (i1, i2, i3)):
        n, off = _face_plane(pts, tri)
        if n @ centroid > off:  # flip to point away from the interior
            tri = (tri[0], tri[2], tri[1])
            n, off = -n, float(-off)
        faces.append((tri, n, off))

    used = {i0, i1, i2, i3}
    normal_arr = np.array([n for _, n, _ in faces])
    offset_arr = np.array([off for _, _, off in faces])
    # visit points farthest-out first so interior points get discarded early
    order = np.argsort(-np.linalg.norm(pts - centroid, axis=1), kind="stable")
    for idx in order:
        idx = int(idx)
        if idx in used:
            continue
        p = pts[idx]
        mask = normal_arr @ p - offset_arr > tol
        if not mask.any():
            continue
        # horizon: directed edges of visible faces whose reverse is not visible
        edges = {}
        for keep, (tri, _, _) in zip(mask, faces):
            if not keep:
                continue
            for e in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                if (e[1], e[0]) in edges:
                    del edges[(e[1], e[0])]
                else:
                    edges[e] = True
        faces = [f for keep, f in zip(mask, faces) if not keep]
        for a, b in edges:
            tri = (a, b, idx)
            n, off = _face_plane(pts, tri)
            faces.append((tri, n, off))
        used.add(idx)
        normal_arr = np.array([n for _, n, _ in faces])
        offset_arr = np.array([off for _, _, off in faces])

    vertex_ids = sorted({i for tri, _, _ in faces for i in tri})
    remap = {v: k for k, v in enumerate(vertex_ids)}
    return ConvexHull(
        vertices=pts[vertex_ids],
        faces=np.array([[remap[i] for i in tri] for tri, _, _ in faces], dtype=int),
        normals=np.array([n for _, n, _ in faces]),
        offsets=np.array([off for _, _, off in faces]),
    )


def grid_intersect(hull: ConvexHull, spacing: float) -> GoalGrid:
    """Cube-grid points inside or on the hull.

    The lattice covers the hull bounding box and is anchored at its
    minimum corner, which pins the lattice phase for reproducibility.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    lo, hi = hull.bounding_box()
    counts = np.floor((hi - lo) / spacing + HULL_TOL).astype(int) + 1
    axes = [lo[k] + spacing * np.arange(counts[k]) for k in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    lattice = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    inside = hull.contains(lattice)
    return GoalGrid(goals=lattice[inside], spacing=spacing, provenance="convex")


def remove_outliers(grid: GoalGrid, centers, radius: float) -> GoalGrid:
    """Keep goals within `radius` of at least one prototype center."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if grid.provenance != "convex":
        raise ValueError("outlier removal applies to the convex grid")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.size == 0:
        keep = np.zeros(len(grid.goals), dtype=bool)
    else:
        d2 = ((grid.goals[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        keep = d2.min(axis=1) <= radius**2
    return GoalGrid(goals=grid.goals[keep], spacing=grid.spacing, provenance="cut")
