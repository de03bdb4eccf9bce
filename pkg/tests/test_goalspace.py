import itertools

import numpy as np
import pytest

from musclearm.goalspace import (
    ConvexHull,
    DegenerateInput,
    GoalGrid,
    convex_hull,
    grid_intersect,
    remove_outliers,
    sample_empirical,
)


def brute_force_hull_vertices(points, tol=1e-9):
    """O(n^4) oracle: a point is a hull vertex iff some supporting plane
    through it and two others leaves every remaining point on one side."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    vertices = set()
    for i, j, k in itertools.combinations(range(n), 3):
        normal = np.cross(pts[j] - pts[i], pts[k] - pts[i])
        norm = np.linalg.norm(normal)
        if norm < tol:
            continue
        side = (pts - pts[i]) @ (normal / norm)
        if np.all(side <= tol) or np.all(side >= -tol):
            vertices.update((i, j, k))
    # prune points that merely sit on a supporting plane without being extreme:
    # a vertex cannot be written as a convex combination of two others on a line
    out = set()
    for v in vertices:
        extreme = True
        for a, b in itertools.combinations(vertices - {v}, 2):
            ab = pts[b] - pts[a]
            denom = ab @ ab
            if denom < tol**2:
                continue
            t = (pts[v] - pts[a]) @ ab / denom
            if -tol <= t <= 1 + tol:
                if np.linalg.norm(pts[a] + t * ab - pts[v]) <= tol:
                    extreme = False
                    break
        if extreme:
            out.add(v)
    return out


def cube_corners():
    return np.array(list(itertools.product([0.0, 1.0], repeat=3)))


def test_cube_hull_has_eight_vertices(rng):
    interior = rng.uniform(0.05, 0.95, size=(30, 3))
    pts = np.vstack([cube_corners(), interior])
    hull = convex_hull(pts)
    assert len(hull.vertices) == 8
    assert {tuple(v) for v in hull.vertices} == {tuple(c) for c in cube_corners()}


def test_tetrahedron_has_four_faces():
    pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    hull = convex_hull(pts)
    assert len(hull.faces) == 4
    assert len(hull.vertices) == 4


def test_containment_of_all_inputs(rng):
    pts = rng.standard_normal((400, 3))
    hull = convex_hull(pts)
    assert hull.contains(pts, tol=1e-9).all()


def test_outward_normals():
    hull = convex_hull(cube_corners())
    centroid = hull.vertices.mean(axis=0)
    assert np.all(hull.normals @ centroid - hull.offsets < 0)


def test_matches_brute_force_oracle(rng):
    for trial in range(4):
        pts = rng.standard_normal((25, 3))
        hull = convex_hull(pts)
        got = {tuple(np.round(v, 12)) for v in hull.vertices}
        expected = {tuple(np.round(pts[i], 12)) for i in brute_force_hull_vertices(pts)}
        assert got == expected


def test_permutation_invariance(rng):
    pts = rng.standard_normal((120, 3))
    base = {tuple(v) for v in convex_hull(pts).vertices}
    for _ in range(3):
        perm = rng.permutation(len(pts))
        assert {tuple(v) for v in convex_hull(pts[perm]).vertices} == base


def test_degenerate_inputs_raise(rng):
    line = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateInput):
        convex_hull(line)
    plane = np.column_stack([rng.standard_normal((10, 2)), np.zeros(10)])
    with pytest.raises(DegenerateInput):
        convex_hull(plane)
    with pytest.raises(DegenerateInput):
        convex_hull(np.zeros((4, 3)))
    with pytest.raises(DegenerateInput):
        convex_hull(cube_corners()[:3])


def test_grid_unit_cube_spacings():
    hull = convex_hull(cube_corners())
    assert len(grid_intersect(hull, 0.5)) == 27
    coarse = grid_intersect(hull, 2.0)
    assert len(coarse) >= 1
    assert any(np.allclose(g, [0, 0, 0]) for g in coarse.goals)


def test_grid_refinement_is_superset():
    hull = convex_hull(cube_corners())
    coarse = grid_intersect(hull, 0.5)
    fine = grid_intersect(hull, 0.25)
    fine_set = {tuple(np.round(g, 9)) for g in fine.goals}
    assert all(tuple(np.round(g, 9)) in fine_set for g in coarse.goals)


def test_plant_goal_count_scale(plant):
    pts = sample_empirical(plant, 2000)
    assert len(pts) == 2000
    assert np.all(np.linalg.norm(pts, axis=1) <= plant.reach_radius + 1e-12)
    hull = convex_hull(pts)
    grid = grid_intersect(hull, 0.03)
    assert 50 <= len(grid) <= 1000

    # cross-check the half-space test against hull reconstruction: adding an
    # interior point must not change the vertex set, an exterior point must
    verts = {tuple(v) for v in hull.vertices}
    check = np.random.default_rng(3)
    lattice = grid.goals[check.choice(len(grid), size=5, replace=False)]
    for p in lattice:
        margins = hull.normals @ p - hull.offsets
        if margins.max() < -1e-6:
            again = convex_hull(np.vstack([hull.vertices, p]))
            assert {tuple(v) for v in again.vertices} == verts
    outside = hull.vertices.mean(axis=0) + np.array([2 * plant.reach_radius, 0, 0])
    again = convex_hull(np.vstack([hull.vertices, outside]))
    assert tuple(outside) in {tuple(v) for v in again.vertices}


def test_sample_empirical_deterministic(plant):
    a = sample_empirical(plant, 50)
    b = sample_empirical(plant, 50)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        sample_empirical(plant, 3)


def test_remove_outliers_rules(rng):
    goals = rng.uniform(0, 1, size=(40, 3))
    grid = GoalGrid(goals=goals, spacing=0.03, provenance="convex")
    empty = remove_outliers(grid, np.zeros((0, 3)), 0.02)
    assert len(empty) == 0 and empty.provenance == "cut"
    everything = remove_outliers(grid, goals, 1e-9 + 0.0)
    assert np.array_equal(everything.goals, goals)
    some = remove_outliers(grid, goals[:5], 0.1)
    kept = {tuple(g) for g in some.goals}
    assert kept <= {tuple(g) for g in goals}
    with pytest.raises(ValueError):
        remove_outliers(some, goals[:5], 0.1)  # provenance already cut
    with pytest.raises(ValueError):
        remove_outliers(grid, goals[:5], -1.0)


def test_serialization_round_trips(rng):
    pts = rng.standard_normal((50, 3))
    hull = convex_hull(pts)
    again = ConvexHull.from_doc(hull.to_doc())
    assert np.array_equal(again.vertices, hull.vertices)
    assert np.array_equal(again.faces, hull.faces)
    grid = grid_intersect(hull, 0.5)
    grid2 = GoalGrid.from_doc(grid.to_doc())
    assert np.array_equal(grid2.goals, grid.goals)
    assert grid2.provenance == grid.provenance
