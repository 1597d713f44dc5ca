import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from loggas.errors import CarrierMismatch, MultiplePoint, NoPointRight
from loggas.pointconf import (
    GapView,
    PointConfiguration,
    Window,
    average_translate_sample,
    discrepancy,
    fluctuation_bound,
    paste,
    position_after_translation,
    restrict,
    shift_index,
    tile,
    tile_index,
    translate,
)


def conf(points, lo, hi):
    return PointConfiguration(points, Window(lo, hi))


point_lists = st.lists(st.floats(-5, 5, allow_nan=False), max_size=30)
# dyadic grid points: translations by multiples of 1/64 are exact
grid_lists = st.lists(st.integers(-256, 256), max_size=20, unique=True).map(lambda v: [k / 64 for k in v])


class TestWindow:
    def test_centered(self):
        w = Window.centered(3)
        assert (w.lo, w.hi, w.length) == (-3.0, 3.0, 6.0)

    def test_rejects_reversed(self):
        with pytest.raises(ValueError):
            Window(1, 0)

    def test_contains_closed(self):
        assert Window(0, 1).contains([0.0, 1.0, 1.5]).tolist() == [True, True, False]


class TestPointConfiguration:
    def test_sorted_and_readonly(self):
        c = conf([0.3, -0.2, 0.1], -1, 1)
        assert c.points.tolist() == [-0.2, 0.1, 0.3]
        with pytest.raises(ValueError):
            c.points[0] = 0.0

    def test_carrier_mismatch(self):
        with pytest.raises(CarrierMismatch):
            conf([2.0], -1, 1)

    def test_count_closed(self):
        c = conf([0.0, 0.5, 1.0], -1, 1)
        assert c.count(Window(0, 1)) == 3
        assert c.count(Window(0.2, 0.7)) == 1


class TestRestrictTranslate:
    def test_restrict_example(self):
        c = conf([-1.5, 0.2, 0.9], -2, 2)
        r = restrict(c, Window(0, 1))
        assert r.points.tolist() == [0.2, 0.9]
        assert r.carrier == Window(0, 1)

    def test_restrict_empty(self):
        assert len(restrict(conf([], -1, 1), Window(-0.5, 0.5))) == 0

    def test_translate_example(self):
        t = translate(conf([0.5, 1.5], 0, 2), 1.0)
        assert t.points.tolist() == [-0.5, 0.5]
        assert t.carrier == Window(-1, 1)

    def test_translate_zero_identity(self):
        c = conf([0.5, 1.5], 0, 2)
        assert translate(c, 0.0) == c

    @given(point_lists, st.floats(-3, 3), st.floats(0, 3))
    def test_restrict_idempotent_and_subset(self, pts, a, length):
        c = conf(pts, -5, 5)
        w = Window(a, a + length)
        r = restrict(c, w)
        assert restrict(r, w) == r
        assert set(r.points.tolist()) <= set(c.points.tolist())
        assert len(r) == c.count(w)

    @given(point_lists, st.floats(-2, 2), st.floats(-2, 2))
    def test_translate_composes(self, pts, u, v):
        c = conf(pts, -5, 5)
        a = translate(translate(c, u), v)
        b = translate(c, u + v)
        np.testing.assert_allclose(a.points, b.points, atol=1e-12)
        assert len(a) == len(c)


class TestDiscrepancy:
    def test_example(self):
        assert discrepancy(conf([0.5, 1.5, 1.7], 0, 2), Window(0, 2)) == 1

    def test_exact_count(self):
        R = 4
        c = conf(np.arange(-R, R) + 0.5, -R, R)
        assert discrepancy(c, Window.centered(R)) == 0

    @given(grid_lists, st.integers(-256, 256), st.integers(0, 256))
    def test_translation_covariant(self, pts, a, length):
        c = conf(pts, -5, 5)
        w = Window(a / 64, (a + length) / 64)
        assert discrepancy(translate(c, 0.25), w.shift(-0.25)) == pytest.approx(discrepancy(c, w))


class TestGaps:
    def test_origin_indexed_example(self):
        g = GapView(conf([-0.3, 0.2, 1.0], -2, 2))
        assert g.x(0) == 0.2
        assert g.gamma(0) == pytest.approx(0.8)

    def test_missing_point_is_infinite(self):
        g = GapView(conf([-0.3, 0.2], -2, 2))
        assert g.gamma(0) == math.inf
        assert g.gamma(-2) == math.inf

    def test_multiple_point(self):
        with pytest.raises(MultiplePoint):
            GapView(conf([0.1, 0.1], -1, 1))

    def test_left_gap_range(self):
        g = GapView(conf([0.0, 0.5, 2.0], -3, 3))
        assert g.left_gap(2) == 1.5
        with pytest.raises(IndexError):
            g.left_gap(3)

    @given(grid_lists)
    def test_indexings_agree_up_to_shift(self, pts):
        c = conf(pts, -4, 4)
        g = GapView(c)
        if g.origin_index >= len(c):
            return
        for k in range(-g.origin_index, len(c) - g.origin_index - 1):
            i = g.origin_index + k + 1
            assert g.gamma(k) == g.left_gap(i)


class TestPositionAfterTranslation:
    def test_lattice_example(self):
        c = conf(np.arange(10) + 0.5, 0, 10)
        assert position_after_translation(c, 2.0) == 2
        assert position_after_translation(c, 0.0) == 0

    def test_no_point_right(self):
        with pytest.raises(NoPointRight):
            position_after_translation(conf([0.5], 0, 1), 0.7)

    @given(grid_lists.filter(lambda v: len(v) > 1), st.data())
    def test_just_above_point(self, pts, data):
        c = conf(pts, -4, 4)
        g = GapView(c)
        j = data.draw(st.integers(0, len(c) - 2))
        u = float(c.points[j]) + 1 / 256
        k = j - g.origin_index
        assert position_after_translation(c, u) == k + 1
        assert translate(c, u).points[GapView(translate(c, u)).origin_index] == pytest.approx(g.x(k + 1) - u)


class TestShiftIndex:
    def test_balanced(self):
        assert shift_index(conf([-1.5, -0.5, 0.5, 1.5], -2, 2)) == 0

    def test_all_nonnegative(self):
        R = 3
        c = conf(np.linspace(0, 2.9, 2 * R), -R, R)
        assert shift_index(c) == -R

    def test_needs_point_right(self):
        with pytest.raises(NoPointRight):
            shift_index(conf([-1.0, -0.5], -1, 1))


class TestTiles:
    def test_tile_positions(self):
        assert tile(2, 0) == Window(-2, 2)
        assert tile(2, 1) == Window(-6, -2)
        assert tile(2, -1) == Window(2, 6)

    def test_shared_edge_goes_to_lower_index(self):
        assert tile_index(-2.0, 2) == 0
        assert tile_index(2.0, 2) == 0
        assert tile_index(-2.0001, 2) == 1
        assert tile_index(2.0001, 2) == -1

    @given(st.floats(-50, 50))
    def test_index_consistent_with_tile(self, x):
        i = int(tile_index(x, 1.5))
        assert tile(1.5, i).contains(x)


class TestPaste:
    def test_single_copy(self):
        c = conf([0.1, -0.4], -1, 1)
        assert paste([c], 1) == c

    def test_two_copies(self):
        c = conf([0.0], -1, 1)
        p = paste([c, c], 1)
        assert p.points.tolist() == [-2.0, 0.0]
        assert p.carrier == Window(-3, 1)

    def test_carrier_checked(self):
        with pytest.raises(CarrierMismatch):
            paste([conf([0.0], -2, 2)], 1)

    @settings(max_examples=50)
    # dyadic points: translating by multiples of 2R is exact, so edge ownership is unambiguous
    @given(st.lists(st.lists(st.integers(-128, 128), max_size=8).map(lambda v: [k / 64 for k in v]),
                    min_size=1, max_size=5))
    @example([[], [2.0]])
    @example([[-2.0, 2.0], [-2.0, 2.0], [2.0]])
    def test_restriction_to_tiles_recovers_copies(self, copies):
        R = 2
        cs = [conf(p, -R, R) for p in copies]
        p = paste(cs, R)
        assert len(p) == sum(len(c) for c in cs)
        for i, c in enumerate(cs):
            inside = p.points[tile_index(p.points, R) == i] + 2 * R * i
            # shared edges belong to the lower tile: copy i keeps its -R point, gives its +R point
            # to tile i-1 and receives the +R point of copy i+1
            expected = np.sort(np.concatenate([
                c.points[(c.points < R) | (i == 0)],
                cs[i + 1].points[cs[i + 1].points == R] - 2 * R if i + 1 < len(cs) else [],
            ]))
            np.testing.assert_allclose(np.sort(inside), expected, atol=1e-12)


class TestAverageTranslate:
    def test_zero_draw_is_identity(self):
        class Zero:
            def uniform(self, lo, hi):
                return 0.0

        c = conf([0.2, -0.5], -1, 1)
        assert average_translate_sample(c, Zero()) == c

    def test_unit_intensity_preserved(self):
        rng = np.random.default_rng(5)
        R = 10
        lattice = conf(np.arange(-R, R) + 0.5, -R, R)
        counts = [average_translate_sample(lattice, rng).count(Window(0, 1)) for _ in range(4000)]
        # [0, 1] holds exactly one lattice point of c - t when t lies in [-10, 9.5], else none
        p = 19.5 / 20
        assert abs(np.mean(counts) - p) < 4 * math.sqrt(p * (1 - p) / 4000)


class TestFluctuationBound:
    def test_constant_g_zero_discrepancy(self):
        c = conf([0.5, 1.5], 0, 2)
        fb = fluctuation_bound(lambda x: np.ones_like(x), c, Window(0, 2), 1.0, 0.0)
        assert fb.lhs == pytest.approx(0.0, abs=1e-12)
        assert fb.holds

    def test_linear_symmetric(self):
        c = conf([0.5, 1.5], 0, 2)
        fb = fluctuation_bound(lambda x: x, c, Window(0, 2))
        assert fb.lhs == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0, 6), max_size=12), st.floats(0.2, 3.0))
    def test_bound_holds(self, pts, freq):
        c = conf(pts, 0, 6)
        g = lambda x: np.sin(freq * np.asarray(x))
        fb = fluctuation_bound(g, c, Window(0, 6), 1.0, freq)
        assert fb.holds
