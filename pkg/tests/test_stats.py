import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from loggas.acceptance import beta_windows, screened_lattice
from loggas.errors import InsufficientPoints
from loggas.pointconf import PointConfiguration, Window, shift_index, translate
from loggas.sampler import sample_bernoulli, sample_poisson
from loggas.stats import (
    TestFunction as Tent,
    discrepancy_variance_curve,
    free_energy_report,
    gain_estimator,
    gap_distribution_distance,
    gap_l2_diagnostic,
    gap_vectors,
    loglog_slope,
    pair_gain,
    strictly_decreasing,
    test_dictionary as tent_dictionary,
    tile_interaction,
    tile_interaction_bound,
    variance_stderr,
)


def lattice(R, phase=0.5):
    return PointConfiguration(np.arange(-R, R) + phase, Window.centered(R))


@pytest.fixture(scope="module")
def beta4():
    return beta_windows(4.0, 256, 16, 300, seed=101)


@pytest.fixture(scope="module")
def poisson16():
    rng = np.random.default_rng(102)
    return [sample_poisson(16, rng) for _ in range(1500)]


class TestVariance:
    def test_stderr_gaussian(self):
        x = np.random.default_rng(0).normal(size=20000)
        v, se = variance_stderr(x)
        assert v == pytest.approx(1.0, abs=4 * se)
        assert se == pytest.approx(math.sqrt(2 / x.size), rel=0.1)

    def test_poisson_unit(self, poisson16):
        for row in discrepancy_variance_curve(poisson16, [2, 4, 8, 16]):
            assert abs(row["value"] - 1) < 3 * row["stderr"]

    def test_lattice_zero(self):
        rows = discrepancy_variance_curve([lattice(16)] * 10, [4, 8])
        assert all(r["value"] == 0 for r in rows)

    def test_random_phase_lattice_decays(self):
        rng = np.random.default_rng(3)
        cs = [PointConfiguration(np.arange(-40, 40) + rng.uniform(), Window.centered(40)) for _ in range(400)]
        # half-integer window lengths: the count varies by one with probability 1/2
        rows = discrepancy_variance_curve(cs, [2.25, 8.25, 32.25])
        assert rows[0]["value"] > 0
        assert rows[-1]["value"] < rows[0]["value"] / 8

    def test_strictly_decreasing(self):
        rows = [{"value": v, "stderr": 0.01} for v in (1.0, 0.5, 0.2)]
        assert strictly_decreasing(rows)
        rows[2]["value"] = 0.49
        assert not strictly_decreasing(rows)


class TestShift:
    def test_balanced(self):
        assert shift_index(lattice(4)) == 0

    def test_all_nonnegative(self):
        R = 4
        c = PointConfiguration(np.linspace(0.1, 3.9, 2 * R), Window.centered(R))
        assert shift_index(c) == -R


class TestGain:
    def test_self_coupling(self):
        rng = np.random.default_rng(4)
        pairs = [(c, c) for c in (sample_bernoulli(16, 32, rng) for _ in range(20))]
        est = gain_estimator(pairs, 16, shift=0, skip_insufficient=True)
        assert est.value == 0.0

    def test_translation_invariant(self):
        rng = np.random.default_rng(5)
        c0, c1 = sample_bernoulli(8, 16, rng), lattice(8)
        g = pair_gain(c0, c1, 8, 0)
        # shifting by a common amount that keeps the origin in the same gap changes nothing
        u = 1e-9
        assert pair_gain(translate(c0, u), translate(c1, u), 8, 0) == pytest.approx(g, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_summands_bounded(self, seed):
        rng = np.random.default_rng(seed)
        R = 8
        c0, c1 = sample_bernoulli(R, 2 * R, rng), sample_bernoulli(R, 2 * R, rng)
        try:
            g = pair_gain(c0, c1, R, 0)
        except InsufficientPoints:
            return
        assert 0 <= g <= R + 1

    def test_bernoulli_vs_lattice_positive(self):
        rng = np.random.default_rng(6)
        R = 16
        pairs = [(sample_bernoulli(R, 2 * R, rng), lattice(R, rng.uniform(0.01, 0.99))) for _ in range(200)]
        est = gain_estimator(pairs, R, shift=None, skip_insufficient=True)
        assert est.ci[0] > 0.01

    def test_shift_limit(self):
        with pytest.raises(ValueError):
            gain_estimator([(lattice(4), lattice(4))], 4, shift=3)

    def test_flip_sign(self):
        rng = np.random.default_rng(7)
        pairs = [(sample_bernoulli(8, 16, rng), lattice(8)) for _ in range(10)]
        a = gain_estimator(pairs, 8, skip_insufficient=True)
        b = gain_estimator(pairs, 8, flip_sign=True, skip_insufficient=True)
        assert b.value == -a.value

    def test_insufficient_raises(self):
        c = PointConfiguration(np.linspace(0.1, 7.9, 16), Window.centered(8))
        with pytest.raises(InsufficientPoints):
            gain_estimator([(c, c)], 8)


class TestGapDistance:
    @given(st.lists(st.floats(-5, 5), min_size=5, max_size=5), st.lists(st.floats(-5, 5), min_size=5, max_size=5))
    def test_tent_bounded_and_lipschitz(self, a, b):
        a, b = np.abs(a), np.abs(b)
        for h in tent_dictionary(2)[::37]:
            ha, hb = float(h(a)[0]), float(h(b)[0])
            assert 0 <= ha <= 1
            assert abs(ha - hb) <= np.sum(np.abs(a - b)) + 1e-12

    def test_tent_compact_support(self):
        h = Tent(0, 1.0, 0.5)
        assert float(h(np.array([100.0, 1, 1, 1, 1]))[0]) == 0.0

    def test_identical_samples(self, poisson16):
        d = gap_distribution_distance(poisson16[:200], poisson16[:200], 2)
        assert d["value"] == 0.0

    def test_bounded_by_one(self, poisson16, beta4):
        assert gap_distribution_distance(poisson16, beta4, 2)["value"] <= 1

    def test_poisson_vs_beta4(self, poisson16, beta4):
        d = gap_distribution_distance(poisson16, beta4, 2, split=True, rng=np.random.default_rng(8))
        assert d["value"] - 1.96 * d["stderr"] > 0

    def test_gap_vectors_need_points(self):
        with pytest.raises(InsufficientPoints):
            gap_vectors([PointConfiguration([0.5], Window.centered(1))], 1)


class TestGapL2:
    def test_lattice(self):
        lhs, rhs = gap_l2_diagnostic(lattice(8), 0.0)
        assert lhs == pytest.approx(9.0)
        assert rhs == 8

    def test_beta_windows_bounded(self, beta4):
        ratios = []
        for c in beta4:
            try:
                lhs, rhs = gap_l2_diagnostic(c, 0.0)
            except InsufficientPoints:
                continue
            ratios.append(lhs / rhs)
        assert max(ratios) < 100

    def test_linear_growth(self):
        rng = np.random.default_rng(9)
        Rs = [4, 8, 16, 32]
        means = []
        for R in Rs:
            jittered = (np.arange(-R, R) + 0.5 + rng.uniform(-0.4, 0.4, (200, 2 * R)))
            vals = [gap_l2_diagnostic(PointConfiguration(row, Window.centered(R)), 0.0)[0] for row in jittered]
            means.append(np.mean(vals))
        assert np.polyfit(Rs, means, 1)[0] > 0


def brute_tile_interaction(pa, pb, Ka, Kb):
    pair = -sum(math.log(abs(x - y)) for x in pa for y in pb)
    cross_a = sum(integrate.quad(lambda y: math.log(abs(x - y)), Kb.lo, Kb.hi, epsabs=1e-13)[0] for x in pa)
    cross_b = sum(integrate.quad(lambda y: math.log(abs(x - y)), Ka.lo, Ka.hi, epsabs=1e-13)[0] for x in pb)
    bg = integrate.dblquad(lambda y, x: -math.log(abs(x - y)), Ka.lo, Ka.hi, Kb.lo, Kb.hi, epsabs=1e-12)[0]
    return pair + cross_a + cross_b + bg


class TestTiles:
    def test_against_quadrature(self):
        ca = PointConfiguration([-0.6, 0.3], Window.centered(1))
        cb = PointConfiguration([-0.2, 0.9], Window.centered(1))
        ref = brute_tile_interaction(ca.points, cb.points - 4, Window(-1, 1), Window(-5, -3))
        assert tile_interaction(ca, cb, 0, 2, 1) == pytest.approx(ref, abs=1e-9)

    def test_same_tile_rejected(self):
        with pytest.raises(ValueError):
            tile_interaction(lattice(2), lattice(2), 1, 1, 2)

    def test_neutral_lattices_far(self):
        assert abs(tile_interaction(lattice(8), lattice(8), 0, 2, 8)) < 1e-3

    def test_adjacent_larger_than_far(self):
        near = abs(tile_interaction(lattice(8), lattice(8), 0, 1, 8))
        far = abs(tile_interaction(lattice(8), lattice(8), 0, 2, 8))
        assert near > 10 * far

    def test_bound_on_screened(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            ca, cb = screened_lattice(16, rng), screened_lattice(16, rng)
            for d in (2, 3, 5):
                assert tile_interaction_bound(ca, cb, 0, d, 16)["holds"]

    def test_decay_slope(self):
        rng = np.random.default_rng(11)
        ca, cb = screened_lattice(16, rng), screened_lattice(16, rng)
        ds = [4, 8, 16, 32, 64]
        vals = [tile_interaction(ca, cb, 0, d, 16) for d in ds]
        assert abs(loglog_slope(ds, vals) + 2) < 0.3

    def test_loglog_slope(self):
        xs = np.array([1.0, 2, 4, 8])
        assert loglog_slope(xs, 3 * xs**-2) == pytest.approx(-2)


class TestFreeEnergy:
    def test_poisson_sre_zero(self, poisson16):
        rows = free_energy_report({8: poisson16[:300], 16: poisson16[:300]}, beta=2.0, poisson=True)
        for r in rows:
            assert r["sre"] == 0.0
            assert r["f_beta"] == 2.0 * r["per_volume_wint"]

    def test_no_sre_without_closed_form(self, beta4):
        (row,) = free_energy_report({16: beta4}, beta=4.0)
        assert row["sre"] is None and row["f_beta"] is None

    def test_beta_ordering(self, poisson16, beta4):
        (p,) = free_energy_report({16: poisson16[:300]}, None, poisson=True)
        (b,) = free_energy_report({16: beta4}, 4.0)
        assert b["per_volume_wint"] + 3 * b["stderr"] < p["per_volume_wint"] - 3 * p["stderr"]

    def test_stable_in_R(self):
        rng = np.random.default_rng(12)
        wins = {R: [sample_poisson(R, rng) for _ in range(400)] for R in (16, 24, 32)}
        rows = free_energy_report(wins, None, poisson=True)
        vals = [r["per_volume_wint"] for r in rows]
        ses = [r["stderr"] for r in rows]
        assert max(vals) - min(vals) < 4 * max(ses)
