import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualminkowski.bodies import (
    StarBody,
    SupportPolytope,
    ball_polytope,
    centered,
    cube_polytope,
    facet_area,
    facet_polygons,
    geometry_stats,
    is_invariant,
    polar_body,
    polar_radial,
    prune,
    radial_eval,
    radial_profile,
    shifted_ball_polytope,
    support_eval,
    support_profile,
    translate,
    vertex_enumeration,
    wulff_shape,
)
from dualminkowski.groups import OrthogonalGroup, cube_rotation, cyclic_rotation
from dualminkowski.sphere import build_grid, fibonacci_sphere_nodes

from conftest import random_polytope


@pytest.fixture(scope="module")
def cube():
    return cube_polytope(3)


class TestConstruction:
    def test_floor_enforced(self):
        normals = np.vstack([np.eye(3), -np.eye(3)])
        with pytest.raises(ValueError, match="below floor"):
            SupportPolytope(dim=3, normals=normals,
                            support=np.array([1, 1, 1, 1, 1, 1e-9]),
                            h_floor=1e-6)

    def test_positive_spanning_required(self):
        # all normals in the upper half space: unbounded body
        dirs = fibonacci_sphere_nodes(40)
        dirs = dirs[dirs[:, 2] > 0.1]
        with pytest.raises(ValueError, match="positively span"):
            SupportPolytope(dim=3, normals=dirs, support=np.ones(len(dirs)))

    def test_unit_normals_required(self):
        normals = np.vstack([np.eye(2) * 1.001, -np.eye(2)])
        with pytest.raises(ValueError, match="unit"):
            SupportPolytope(dim=2, normals=normals, support=np.ones(4))

    def test_default_floor_from_geometric_mean(self, cube):
        assert cube.h_floor == pytest.approx(1e-6)


class TestRadial:
    def test_cube_axis(self, cube):
        rho, facet = radial_eval(cube, np.array([1.0, 0.0, 0.0]))
        assert rho == pytest.approx(1.0, abs=1e-14)
        assert facet == 0

    def test_cube_corner(self, cube):
        u = np.ones(3) / math.sqrt(3)
        rho, _ = radial_eval(cube, u)
        assert rho == pytest.approx(math.sqrt(3), rel=1e-12)

    def test_ball_like_sandwich(self, grid3_small):
        body = ball_polytope(fibonacci_sphere_nodes(642), radius=2.5)
        rho, _ = radial_profile(body, grid3_small.nodes)
        covering = math.sqrt(8.0 * math.pi / 642)
        assert np.all(rho >= 2.5 - 1e-12)
        assert np.all(rho <= 2.5 / math.cos(covering))

    def test_boundary_point_feasible(self, grid3_small):
        rng = np.random.default_rng(2)
        body = random_polytope(rng, 9)
        rho, idx = radial_profile(body, grid3_small.nodes)
        points = rho[:, None] * grid3_small.nodes
        slack = points @ body.normals.T - body.support[None, :]
        assert np.max(slack) <= 1e-10
        chosen = slack[np.arange(len(points)), idx]
        assert np.max(np.abs(chosen)) <= 1e-10  # active at the reported facet

    def test_homogeneity_exact(self):
        rng = np.random.default_rng(3)
        body = random_polytope(rng, 8)
        scaled = body.with_support(body.support * 3.0)
        u = np.array([0.3, -0.2, 0.8]) / np.linalg.norm([0.3, -0.2, 0.8])
        assert radial_eval(scaled, u)[0] == pytest.approx(
            3.0 * radial_eval(body, u)[0], rel=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=5),
           st.floats(min_value=0.01, max_value=0.5))
    def test_monotone_in_support(self, which, bump):
        body = cube_polytope(3)
        raised = body.with_support(body.support + bump * (np.arange(6) == which))
        probe = fibonacci_sphere_nodes(200)
        rho_lo, _ = radial_profile(body, probe)
        rho_hi, _ = radial_profile(raised, probe)
        assert np.all(rho_hi >= rho_lo - 1e-12)


class TestSupport:
    def test_cube_corner_lp(self, cube):
        u = np.ones(3) / math.sqrt(3)
        assert support_eval(cube, u) == pytest.approx(math.sqrt(3), rel=1e-9)

    def test_redundant_constraint_detected(self):
        normals = np.vstack([np.eye(3), -np.eye(3),
                             np.array([[1.0, 0.0, 0.0]])])
        h = np.array([1, 1, 1, 1, 1, 1, 5.0])
        body = SupportPolytope(dim=3, normals=normals, support=h)
        assert support_eval(body, normals[6]) == pytest.approx(1.0, abs=1e-9)
        assert support_eval(body, normals[6]) < h[6]

    def test_support_le_h(self, grid3_small):
        rng = np.random.default_rng(4)
        body = random_polytope(rng, 10)
        for i in range(body.facet_count):
            assert support_eval(body, body.normals[i]) <= body.support[i] + 1e-9

    def test_lp_vs_vertex_enumeration(self):
        rng = np.random.default_rng(5)
        body = random_polytope(rng, 9)
        verts = vertex_enumeration(body)
        for u in fibonacci_sphere_nodes(24):
            lp = support_eval(body, u)
            vx = float(np.max(verts @ u))
            assert lp == pytest.approx(vx, rel=1e-8)

    def test_fresh_wulff_support_equals_h_after_prune(self):
        rng = np.random.default_rng(6)
        body = prune(random_polytope(rng, 9))
        h_vertex = support_profile(body, body.normals)
        assert np.allclose(h_vertex, body.support, rtol=1e-9)


class TestPolar:
    def test_ball_polar(self):
        # circumscribed facets overshoot the ball by ~covering-angle^2/2
        body = ball_polytope(fibonacci_sphere_nodes(1280), radius=2.0)
        u = np.array([0.1, 0.7, 0.7]) / np.linalg.norm([0.1, 0.7, 0.7])
        assert polar_radial(body, u) == pytest.approx(0.5, rel=5e-3)

    def test_cube_polar_is_cross_polytope(self, cube):
        rng = np.random.default_rng(7)
        for _ in range(5):
            u = rng.standard_normal(3)
            u /= np.linalg.norm(u)
            assert polar_radial(cube, u) == pytest.approx(
                1.0 / np.abs(u).sum(), rel=1e-9)

    def test_polar_involution(self):
        rng = np.random.default_rng(8)
        body = random_polytope(rng, 9)
        double_polar = polar_body(polar_body(body))
        probe = fibonacci_sphere_nodes(100)
        rho_orig, _ = radial_profile(body, probe)
        rho_back, _ = radial_profile(double_polar, probe)
        assert np.max(np.abs(rho_orig - rho_back)) <= 1e-8


class TestWulff:
    def test_zero_step_identity(self, cube):
        phi = np.linspace(-0.2, 0.3, 6)
        out = wulff_shape(cube, phi, 0.0)
        assert np.array_equal(out.support, cube.support)

    def test_scaling_direction(self, cube):
        lam = 1.7
        out = wulff_shape(cube, cube.support, lam - 1.0)
        probe = fibonacci_sphere_nodes(50)
        rho_out, _ = radial_profile(out, probe)
        rho_in, _ = radial_profile(cube, probe)
        assert np.allclose(rho_out, lam * rho_in, rtol=1e-14)

    def test_invariant_base_and_bump_stay_invariant(self, tetra_group,
                                                    tetra_directions):
        from dualminkowski.groups import orbits

        body = ball_polytope(tetra_directions)
        part = orbits(tetra_group, tetra_directions)
        phi = np.empty(len(tetra_directions))
        rng = np.random.default_rng(9)
        for orbit in part:
            phi[orbit] = rng.uniform(-0.2, 0.2)
        out = wulff_shape(body, phi, 0.5)
        ok, dev = is_invariant(out, tetra_group)
        assert ok, dev

    def test_floor_violation_reports_index(self, cube):
        phi = np.zeros(6)
        phi[3] = -1.0
        with pytest.raises(ValueError, match="3"):
            wulff_shape(cube, phi, 1.0)


class TestGeometryStats:
    def test_cube(self, cube, grid3):
        stats = geometry_stats(cube, grid3)
        assert np.linalg.norm(stats["centroid"]) <= 1e-3
        assert stats["inradius"] == pytest.approx(1.0, abs=1e-9)
        assert stats["circumradius"] == pytest.approx(math.sqrt(3), rel=0.01)
        assert stats["diameter"] == pytest.approx(2 * math.sqrt(3), rel=0.01)
        assert stats["volume"] == pytest.approx(8.0, rel=0.01)

    def test_ball_like(self, grid3_small):
        body = ball_polytope(fibonacci_sphere_nodes(642), radius=0.7)
        stats = geometry_stats(body, grid3_small)
        assert stats["inradius"] == pytest.approx(0.7, rel=1e-6)
        assert stats["circumradius"] == pytest.approx(0.7, rel=0.01)

    def test_invariant_body_centroid_zero(self, tetra_group, tetra_directions,
                                          grid3_small):
        rng = np.random.default_rng(10)
        from dualminkowski.groups import orbits

        h = np.empty(len(tetra_directions))
        for orbit in orbits(tetra_group, tetra_directions):
            h[orbit] = rng.uniform(0.8, 1.3)
        body = SupportPolytope(dim=3, normals=tetra_directions, support=h)
        stats = geometry_stats(body, grid3_small)
        assert np.linalg.norm(stats["centroid"]) <= 1e-3 * stats["circumradius"]


class TestInvariance:
    def test_cube_under_own_rotations(self, cube):
        ok, dev = is_invariant(cube, cube_rotation(3))
        assert ok and dev <= 1e-10

    def test_cube_under_embedded_cyclic5(self, cube):
        c5 = cyclic_rotation(5)
        emb = np.array([np.block([[e, np.zeros((2, 1))],
                                  [np.zeros((1, 2)), np.eye(1)]])
                        for e in c5.elements])
        group = OrthogonalGroup(dim=3, elements=emb, label="embedded-c5")
        ok, dev = is_invariant(cube, group)
        assert not ok and dev > 0.1

    def test_trivial_group(self, cube):
        g = OrthogonalGroup(dim=3, elements=np.eye(3)[None])
        ok, dev = is_invariant(cube, g)
        assert ok and dev == 0.0


class TestTransforms:
    def test_translate_then_center(self, grid3_small):
        rng = np.random.default_rng(11)
        body = random_polytope(rng, 10)
        shifted = translate(body, np.array([0.2, -0.1, 0.05]))
        recentered = centered(shifted, grid3_small)
        stats = geometry_stats(recentered, grid3_small)
        assert np.linalg.norm(stats["centroid"]) <= 1e-3 * stats["circumradius"]

    def test_prune_drops_redundant(self):
        normals = np.vstack([np.eye(3), -np.eye(3),
                             np.array([[0.0, 0.0, 1.0]])])
        h = np.array([1, 1, 1, 1, 1, 1, 9.0])
        body = SupportPolytope(dim=3, normals=normals, support=h)
        pruned = prune(body)
        assert pruned.facet_count == 6

    def test_shifted_ball_extrema(self, grid3_small):
        body = shifted_ball_polytope(fibonacci_sphere_nodes(320), 2.0,
                                     np.array([0.5, 0.0, 0.0]))
        rho, _ = radial_profile(body, grid3_small.nodes)
        assert rho.min() == pytest.approx(1.5, rel=0.01)
        assert rho.max() == pytest.approx(2.5, rel=0.02)

    def test_facet_polygons_cube(self, cube):
        polys = facet_polygons(cube)
        assert len(polys) == 6
        for _, poly in polys:
            assert facet_area(poly) == pytest.approx(4.0, rel=1e-9)


class TestStarBody:
    def test_ball(self):
        q = StarBody.ball(3, radius=2.0)
        assert q.sandwich == pytest.approx(2.0)
        pts = fibonacci_sphere_nodes(10)
        assert np.allclose(q.radial(pts), 2.0)
        assert np.allclose(q.gauge(4.0 * pts), 2.0)

    def test_ellipsoid(self):
        q = StarBody.ellipsoid([1.0, 2.0, 4.0])
        assert q.radial(np.array([[0.0, 0.0, 1.0]]))[0] == pytest.approx(4.0)
        assert q.radial(np.array([[1.0, 0.0, 0.0]]))[0] == pytest.approx(1.0)

    def test_box_radial(self):
        q = StarBody.box([1.0, 1.0, 100.0])
        assert q.radial(np.array([[0.0, 0.0, 1.0]]))[0] == pytest.approx(100.0)
        u = np.array([[1.0, 1.0, 0.0]]) / math.sqrt(2)
        assert q.radial(u)[0] == pytest.approx(math.sqrt(2))

    def test_positivity_enforced(self):
        with pytest.raises(ValueError, match="positive"):
            StarBody(dim=3, radial_fn=lambda pts: pts[:, 0])

    def test_transform_matches_polytope_transform(self):
        from dualminkowski.measures import transform_polytope

        rng = np.random.default_rng(12)
        body = random_polytope(rng, 9)
        phi = np.diag([2.0, 1.0, 0.5])
        star = StarBody.from_polytope(body).transformed(phi)
        moved = transform_polytope(body, phi)
        probe = fibonacci_sphere_nodes(64)
        rho_star = star.radial(probe)
        rho_body, _ = radial_profile(moved, probe)
        assert np.allclose(rho_star, rho_body, rtol=1e-9)

    def test_invariance_check(self, tetra_group):
        ok, dev = StarBody.ball(3).is_invariant(tetra_group)
        assert ok and dev == 0.0
        skew = StarBody.ellipsoid([1.0, 1.0, 1.5])
        ok, dev = skew.is_invariant(tetra_group)
        assert not ok and dev > 0.01
