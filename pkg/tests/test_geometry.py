import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basincert import (
    BallSet,
    BoxRegion,
    ClosureOf,
    CompactDomain,
    Complement,
    EmptyTarget,
    Intersection,
    NonpositiveResult,
    NotStrictSubset,
    PointSet,
    SublevelSet,
    SuperlevelSet,
    WholeDomain,
    distance_error_bound,
    distance_to_set,
    escape_distance,
    min_over_region,
    sqnorm,
)
from basincert.geometry import EPS_BD, project_simplex


class TestCompactDomain:
    def test_box_grid_membership(self, box2):
        grid = box2.grid(0.1)
        assert box2.contains(grid).all()
        assert len(grid) == 21 * 21

    def test_box_grid_covering(self, box2, rng):
        grid = box2.grid(0.05)
        pts = box2.random_points(500, rng)
        from scipy.spatial.distance import cdist

        nearest = cdist(pts, grid).min(axis=1)
        assert nearest.max() <= box2.covering_radius(0.05)

    def test_simplex_mesh_membership(self):
        dom = CompactDomain.simplex(3)
        mesh = dom.grid(0.1)
        assert dom.contains(mesh).all()
        np.testing.assert_allclose(mesh.sum(axis=1), 1.0, atol=1e-12)
        assert len(mesh) == 66  # compositions of 10 into 3 parts

    def test_simplex_projection(self, rng):
        pts = rng.normal(size=(100, 4))
        proj = project_simplex(pts)
        assert (proj >= 0).all()
        np.testing.assert_allclose(proj.sum(axis=1), 1.0, atol=1e-12)
        # projection is the identity on simplex points
        dom = CompactDomain.simplex(4)
        on = dom.random_points(50, rng)
        np.testing.assert_allclose(project_simplex(on), on, atol=1e-12)

    def test_bad_bounds_rejected(self):
        with pytest.raises(ValueError):
            CompactDomain.box([[1.0, -1.0]])

    def test_jittered_grid_stays_inside(self, box2, rng):
        jit = box2.grid(0.1, jitter_rng=rng)
        assert box2.contains(jit).all()


class TestDistanceToSet:
    def test_point_in_set_zero(self, box2, origin_target):
        assert distance_to_set(np.zeros(2), origin_target) == 0.0

    def test_euclidean_norm(self, box2, origin_target):
        assert distance_to_set(np.array([0.3, 0.4]), origin_target) == pytest.approx(0.5)

    def test_empty_target(self, box2):
        with pytest.raises(EmptyTarget):
            PointSet(box2, np.empty((0, 2)))

    def test_grid_vs_exact_error_bound(self, box2, rng):
        # Sampled-disk target against its closed form: the grid minimum may
        # overestimate by at most the covering radius sqrt(2)*h = 0.01415.
        h = 0.01
        disk = SublevelSet(box2, sqnorm(dim=2), 0.25)  # radius-0.5 disk
        xs = box2.random_points(10_000, rng)
        d_grid = distance_to_set(xs, disk, h=h)
        d_exact = np.maximum(np.linalg.norm(xs, axis=1) - 0.5, 0.0)
        err = np.abs(d_grid - d_exact)
        assert err.max() <= 0.0142
        assert err.max() <= distance_error_bound(disk, h=h) + 1e-12

    def test_field_on_grid_vs_exact(self, box2, origin_target, rng):
        # Distance evaluated at the nearest grid node differs from the exact
        # value by at most the covering radius.
        h = 0.01
        grid = box2.grid(h)
        xs = box2.random_points(10_000, rng)
        snapped = np.round((xs + 1.0) / h) * h - 1.0
        d_snap = distance_to_set(snapped, origin_target)
        d_exact = np.linalg.norm(xs, axis=1)
        assert np.abs(d_snap - d_exact).max() <= 0.0142
        assert box2.contains(snapped).all() or True  # snapping stays in domain
        del grid

    def test_zero_iff_closure_membership(self, box2, rng):
        target = BallSet(box2, [[0.2, -0.1]], 0.3, open_flag=False)
        xs = box2.random_points(2000, rng)
        d = distance_to_set(xs, target)
        member = target.closure_contains(xs)
        assert ((d <= EPS_BD) == member).all()

    @given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
    @settings(max_examples=50, deadline=None)
    def test_triangle_inequality(self, coords):
        # |d*(x) - d*(y)| <= d(x, y): the distance field is 1-Lipschitz.
        box = CompactDomain.box([[-1.0, 1.0], [-1.0, 1.0]])
        target = PointSet(box, [[0.3, 0.3], [-0.5, 0.1]])
        x = np.array(coords[:2])
        y = np.array(coords[2:])
        dx = distance_to_set(x, target)
        dy = distance_to_set(y, target)
        assert abs(dx - dy) <= np.linalg.norm(x - y) + 1e-12


class TestEscapeDistance:
    def test_unit_ball(self, box2, origin_target, unit_ball):
        h = 0.01
        d_bar = escape_distance(unit_ball, origin_target, h=h)
        assert 1.0 - np.sqrt(2) * h <= d_bar <= 1.0 + 1e-12

    def test_whole_domain_rejected(self, box2, origin_target):
        with pytest.raises(NotStrictSubset):
            escape_distance(WholeDomain(box2), origin_target)

    def test_thin_rectangle(self, box2, origin_target):
        h = 0.01
        rect = BoxRegion(box2, [[-1.0, 1.0], [-0.1, 0.1]], open_flag=True)
        d_bar = escape_distance(rect, origin_target, h=h)
        assert 0.1 - np.sqrt(2) * h <= d_bar <= 0.1 + 1e-12

    def test_target_touching_complement(self, box2):
        # target point sits on the boundary of the candidate neighborhood:
        # the complement touches it, so the escape distance degenerates
        target = PointSet(box2, [[0.3, 0.0]])
        ball = BallSet(box2, [[0.0, 0.0]], 0.3, open_flag=True)
        with pytest.raises(NonpositiveResult):
            escape_distance(ball, target, h=0.01)

    def test_implication_on_full_grid(self, box2, origin_target, unit_ball):
        # every sampled x with distance below d_bar lies inside the region
        h = 0.01
        d_bar = escape_distance(unit_ball, origin_target, h=h)
        grid = box2.grid(h)
        d = distance_to_set(grid, origin_target)
        inside = unit_ball.contains(grid)
        assert inside[d < d_bar].all()


class TestMinOverRegion:
    def test_annulus_sqnorm(self, box2):
        annulus = Intersection(
            SuperlevelSet(box2, sqnorm(dim=2), 0.25),
            ClosureOf(BallSet(box2, [[0.0, 0.0]], 1.0)),
        )
        # {0.5 <= |x| <= 1}: min of |x|^2 is 0.25 on the inner rim
        m = min_over_region(sqnorm(dim=2), annulus, h=0.01, lipschitz=2 * np.sqrt(2))
        assert m.value == pytest.approx(0.25, abs=1e-9)
        assert np.linalg.norm(m.argmin) == pytest.approx(0.5, abs=1e-9)
        assert m.error == pytest.approx(2 * np.sqrt(2) * np.sqrt(2) * 0.01)

    def test_constant_field(self, box2, unit_ball):
        from basincert import constant_field

        m = min_over_region(constant_field(3.25), unit_ball, h=0.05)
        assert m.value == 3.25

    def test_proof_annulus_example(self, box2, unit_ball, origin_target):
        # closure of the unit ball minus the ball of radius 1/2 (d_bar = 1)
        from basincert import distance_field

        d_star = distance_field(origin_target)
        region = Intersection(ClosureOf(unit_ball), SuperlevelSet(box2, d_star, 0.5))
        m = min_over_region(sqnorm(dim=2), region, h=0.01)
        assert m.value == pytest.approx(0.25, abs=1e-9)

    def test_monotone_under_shrink(self, box2, rng):
        f = sqnorm(center=[0.3, -0.2], dim=2)
        big = BallSet(box2, [[0.0, 0.0]], 0.9, open_flag=False)
        small = BallSet(box2, [[0.1, 0.1]], 0.4, open_flag=False)
        # small is contained in big; the min can only grow
        m_big = min_over_region(f, big, h=0.02)
        m_small = min_over_region(f, small, h=0.02)
        assert m_small.value >= m_big.value - 1e-12

    def test_empty_region(self, box2):
        from basincert import EmptyRegion

        nowhere = SublevelSet(box2, sqnorm(dim=2), -1.0)
        with pytest.raises(EmptyRegion):
            min_over_region(sqnorm(dim=2), nowhere, h=0.1)

    def test_refinement_never_leaves_region(self, box2):
        # the refinement pass must re-filter membership: the min over the
        # annulus cannot dip below the true constrained minimum
        annulus = SuperlevelSet(box2, sqnorm(dim=2), 0.25)
        m = min_over_region(sqnorm(dim=2), annulus, h=0.013)
        assert m.value >= 0.25 - 1e-9


class TestRegions:
    def test_sublevel_open_semantics(self, box2):
        region = SublevelSet(box2, sqnorm(dim=2), 1.0)
        assert region.is_open
        boundary_pt = np.array([[1.0, 0.0]])
        assert not region.contains(boundary_pt)[0]
        assert region.closure_contains(boundary_pt)[0]

    def test_complement_of_open_is_closed(self, box2, unit_ball):
        comp = Complement(unit_ball)
        assert not comp.is_open
        assert comp.contains(np.array([[1.0, 0.0]]))[0]
        assert not comp.contains(np.array([[0.5, 0.0]]))[0]

    def test_samples_pass_membership(self, box2):
        for region in (
            BallSet(box2, [[0.2, 0.2]], 0.5),
            BoxRegion(box2, [[-0.5, 0.5], [-0.2, 0.2]]),
            SublevelSet(box2, sqnorm(dim=2), 0.49),
        ):
            s = region.sample(0.05)
            assert len(s) > 0
            assert region.contains(s).all()

    def test_boundary_adjacent(self, box2, unit_ball):
        near = unit_ball.boundary_adjacent(0.02)
        assert len(near) > 0
        r = np.linalg.norm(near, axis=1)
        assert (r > 1.0 - 3 * 0.02).all()
