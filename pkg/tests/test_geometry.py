"""Domain geometry: exact distances, membership, scale witnesses."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyhk.geometry import Annulus, Ball, IntervalUnion, parse_domain


class TestBall:
    def test_center_distance(self):
        assert Ball((0.0,), 1.0).delta(0.0) == 1.0
        assert Ball((0.0, 0.0), 2.0).delta(np.zeros(2)) == 2.0

    def test_membership(self):
        b = Ball((0.0,), 1.0)
        assert b.contains(0.0)
        assert not b.contains(1.0)  # open set
        assert not b.contains(1.7)

    def test_exterior_distance(self):
        assert Ball((0.0,), 1.0).delta(3.0) == pytest.approx(2.0)

    def test_scale(self):
        r1, r2, x1, x2 = Ball((1.0, 0.0), 0.5).scale()
        assert r1 == r2 == 0.5
        assert np.allclose(x1, [1.0, 0.0])

    def test_boundary_layer(self):
        b = Ball((0.0,), 1.0)
        pts = b.sample_interior("boundary-layer", deltas=np.array([0.1]))
        assert pts.shape == (1, 1)
        assert pts[0, 0] == pytest.approx(0.9)
        with pytest.raises(ValueError):
            b.sample_interior("boundary-layer", deltas=np.array([1.5]))

    def test_grid(self):
        pts = Ball((0.0, 0.0), 1.0).sample_interior("grid", count=9)
        assert pts.shape[1] == 2
        assert np.all(Ball((0.0, 0.0), 1.0).contains(pts))


class TestAnnulus:
    def test_two_shell_minimum(self):
        a = Annulus((0.0, 0.0), 0.5, 2.0)
        x = np.array([1.4, 0.0])
        assert a.delta(x) == pytest.approx(0.6)

    def test_hole_center_outside(self):
        a = Annulus((0.0, 0.0), 0.5, 2.0)
        assert not a.contains(np.zeros(2))
        assert a.contains(np.array([1.0, 0.0]))

    def test_scale_witnesses(self):
        a = Annulus((0.0,), 0.5, 2.0)
        r1, r2, x1, x2 = a.scale()
        assert r1 == pytest.approx(0.75)
        assert r2 == 2.0
        a._check_scale_witnesses()

    def test_validation(self):
        with pytest.raises(ValueError):
            Annulus((0.0,), 1.0, 0.5)


class TestIntervalUnion:
    def test_nearest_endpoint(self):
        d = IntervalUnion(((-1.0, 1.0),))
        assert d.delta(0.6) == pytest.approx(0.4)

    def test_union_membership_and_gaps(self):
        d = IntervalUnion(((-1.0, 0.0), (0.5, 2.0)))
        assert d.contains(-0.5)
        assert not d.contains(0.25)
        assert d.characteristics[0] == pytest.approx(0.5)
        with pytest.raises(ValueError):
            IntervalUnion(((-1.0, 0.5), (0.5, 2.0)))

    def test_scale_uses_longest_component(self):
        d = IntervalUnion(((-1.0, 0.0), (0.5, 3.0)))
        r1, r2, x1, x2 = d.scale()
        assert r1 == pytest.approx(1.25)
        assert r2 == pytest.approx(2.0)
        assert x1[0] == pytest.approx(1.75)

    def test_unbounded(self):
        d = IntervalUnion(((0.0, math.inf),))
        assert not d.bounded
        assert d.contains(17.0)
        assert d.delta(17.0) == pytest.approx(17.0)
        with pytest.raises(ValueError):
            d.scale()

    def test_delta_ladder(self):
        d = IntervalUnion(((-1.0, 1.0),))
        pts = d.sample_interior("boundary-layer",
                                deltas=np.array([0.4, 0.2, 0.1]),
                                side="right")
        assert np.allclose(pts[:, 0], [0.6, 0.8, 0.9])

    def test_grid_count(self):
        d = IntervalUnion(((-1.0, 1.0),))
        pts = d.sample_interior("grid", count=7)
        assert pts.shape == (7, 1)
        assert np.all(d.contains(pts))


class TestInvariants:
    @settings(max_examples=80, deadline=None)
    @given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
    def test_delta_is_lipschitz(self, x, y):
        for dom in (Ball((0.0,), 1.0), IntervalUnion(((-1.0, 1.0), (2.0, 4.0))),
                    Annulus((0.0,), 0.5, 2.0)):
            dx = dom.delta(x)
            dy = dom.delta(y)
            assert abs(dx - dy) <= abs(x - y) + 1e-12

    def test_delta_bounded_by_outer_radius(self):
        for dom in (Ball((0.0,), 1.0), IntervalUnion(((-1.0, 1.0),)),
                    Annulus((0.0,), 0.5, 2.0)):
            r2 = dom.scale()[1]
            pts = dom.sample_interior("grid", count=25)
            assert np.all(dom.delta(pts) <= r2 + 1e-12)

    def test_contains_consistent_with_delta(self):
        dom = IntervalUnion(((-1.0, 1.0),))
        pts = dom.sample_interior("grid", count=50)
        assert np.all(dom.delta(pts) > 1e-12)


class TestParse:
    def test_round_trips(self):
        d = parse_domain("interval:-1,1;2,3")
        assert isinstance(d, IntervalUnion)
        assert d.intervals == ((-1.0, 1.0), (2.0, 3.0))
        b = parse_domain("ball:0,0,1.5")
        assert isinstance(b, Ball) and b.d == 2 and b.radius == 1.5
        a = parse_domain("annulus:0,0.5,2")
        assert isinstance(a, Annulus) and a.d == 1

    def test_errors(self):
        for bad in ("ball:1", "interval:1", "annulus:0,1", "blob:1,2", "ball"):
            with pytest.raises(ValueError):
                parse_domain(bad)
