import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from particlebp.intervals import (
    EMPTY,
    EmptySliceError,
    Interval,
    IntervalSet,
    InvalidPotentialError,
    MERGE_GAP,
    clip,
    general_quadratic_sublevel,
    intersect,
    interval_set,
    membership_mask,
    place_uniform,
    quadratic_sublevel,
    sample_uniform,
    truncated_quadratic_sublevel,
    union,
)


def iset(*pairs):
    return interval_set(list(pairs))


class TestInterval:
    def test_basic(self):
        i = Interval(1.0, 3.0)
        assert i.length == 2.0
        assert i.contains(1.0) and i.contains(3.0) and i.contains(2.0)
        assert not i.contains(0.999)

    def test_degenerate_point(self):
        i = Interval(2.0, 2.0)
        assert i.length == 0.0 and i.contains(2.0)

    def test_inverted_raises(self):
        with pytest.raises(ValueError):
            Interval(3.0, 1.0)


class TestCanonicalization:
    def test_sorts_and_merges_overlaps(self):
        s = iset((2.0, 4.0), (0.0, 1.0), (3.0, 5.0))
        assert s.parts == (Interval(0.0, 1.0), Interval(2.0, 5.0))

    def test_merges_tiny_gaps(self):
        s = iset((0.0, 1.0), (1.0 + MERGE_GAP / 2, 2.0))
        assert len(s.parts) == 1

    def test_keeps_real_gaps(self):
        s = iset((0.0, 1.0), (1.0 + 10 * MERGE_GAP, 2.0))
        assert len(s.parts) == 2

    def test_drops_inverted_pieces(self):
        assert iset((3.0, 1.0)) is EMPTY

    def test_empty(self):
        assert interval_set([]) is EMPTY
        assert EMPTY.is_empty and EMPTY.length == 0.0


class TestSetOps:
    def test_union(self):
        a = iset((0.0, 1.0), (4.0, 5.0))
        b = iset((0.5, 2.0))
        assert union(a, b).parts == (Interval(0.0, 2.0), Interval(4.0, 5.0))

    def test_intersect(self):
        a = iset((0.0, 2.0), (3.0, 6.0))
        b = iset((1.0, 4.0), (5.0, 7.0))
        assert intersect(a, b).parts == (
            Interval(1.0, 2.0),
            Interval(3.0, 4.0),
            Interval(5.0, 6.0),
        )

    def test_intersect_empty(self):
        assert intersect(iset((0.0, 1.0)), iset((2.0, 3.0))) is EMPTY
        assert intersect(EMPTY, iset((0.0, 1.0))) is EMPTY

    def test_clip(self):
        s = clip(iset((-1.0, 0.5), (0.8, 3.0)), Interval(0.0, 1.0))
        assert s.parts == (Interval(0.0, 0.5), Interval(0.8, 1.0))

    @given(
        st.lists(
            st.tuples(
                st.floats(-10, 10, allow_nan=False), st.floats(0, 5, allow_nan=False)
            ),
            max_size=6,
        ),
        st.lists(
            st.tuples(
                st.floats(-10, 10, allow_nan=False), st.floats(0, 5, allow_nan=False)
            ),
            max_size=6,
        ),
        st.floats(-12, 17, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_membership_algebra(self, raw_a, raw_b, x):
        a = interval_set([(lo, lo + w) for lo, w in raw_a])
        b = interval_set([(lo, lo + w) for lo, w in raw_b])
        # away from canonicalization seams, set algebra matches pointwise logic
        seam = any(
            min(abs(x - p.lo), abs(x - p.hi)) < 1e-9
            for s in (a, b)
            for p in s.parts
        )
        if seam:
            return
        assert union(a, b).contains(x) == (a.contains(x) or b.contains(x))
        assert intersect(a, b).contains(x) == (a.contains(x) and b.contains(x))

    @given(
        st.lists(
            st.tuples(
                st.floats(-10, 10, allow_nan=False), st.floats(0, 5, allow_nan=False)
            ),
            max_size=8,
        )
    )
    @settings(max_examples=200, deadline=None)
    def test_canonical_invariants(self, raw):
        s = interval_set([(lo, lo + w) for lo, w in raw])
        for p in s.parts:
            assert p.lo <= p.hi
        for p, q in zip(s.parts, s.parts[1:]):
            assert q.lo > p.hi + MERGE_GAP  # sorted, disjoint, gaps kept


class TestQuadraticSublevel:
    def test_exact_endpoints(self):
        s = quadratic_sublevel(2.0, 4.0, 1.0)  # 4(x-2)^2 <= 1
        (p,) = s.parts
        assert p.lo == pytest.approx(1.5) and p.hi == pytest.approx(2.5)

    def test_negative_level_empty(self):
        assert quadratic_sublevel(0.0, 1.0, -1e-12) is EMPTY

    def test_zero_level_point(self):
        (p,) = quadratic_sublevel(3.0, 2.0, 0.0).parts
        assert p.lo == p.hi == 3.0

    def test_bad_weight_raises(self):
        with pytest.raises(InvalidPotentialError):
            quadratic_sublevel(0.0, 0.0, 1.0)
        with pytest.raises(InvalidPotentialError):
            quadratic_sublevel(0.0, -1.0, 1.0)


class TestTruncatedQuadraticSublevel:
    DOM = Interval(0.0, 1.0)

    def test_above_plateau_full_domain(self):
        s = truncated_quadratic_sublevel(0.5, 2.0, 0.01, 2.0 * 0.01, self.DOM)
        assert s.parts == (self.DOM,)

    def test_below_plateau(self):
        s = truncated_quadratic_sublevel(0.5, 2.0, 1.0, 0.5, self.DOM)
        (p,) = s.parts
        r = math.sqrt(0.25)
        assert p.lo == pytest.approx(0.5 - r) and p.hi == pytest.approx(0.5 + r)

    def test_negative_level_empty(self):
        assert truncated_quadratic_sublevel(0.5, 2.0, 1.0, -0.1, self.DOM) is EMPTY

    def test_outside_domain_empty(self):
        assert truncated_quadratic_sublevel(5.0, 1.0, 100.0, 0.01, self.DOM) is EMPTY

    def test_bad_params_raise(self):
        with pytest.raises(InvalidPotentialError):
            truncated_quadratic_sublevel(0.0, -1.0, 1.0, 0.5, self.DOM)
        with pytest.raises(InvalidPotentialError):
            truncated_quadratic_sublevel(0.0, 1.0, 0.0, 0.5, self.DOM)


class TestGeneralQuadraticSublevel:
    DOM = Interval(-10.0, 10.0)

    def check(self, a, b, c, level, dom=DOM):
        s = general_quadratic_sublevel(a, b, c, level, dom)
        xs = np.linspace(dom.lo, dom.hi, 4001)
        vals = a * xs * xs + b * xs + c
        truth = vals <= level
        claim = membership_mask(s, xs)
        # ignore grid points at interval seams or sitting on the level itself
        near = np.abs(vals - level) < 1e-9 * max(1.0, abs(level))
        for p in s.parts:
            near |= np.minimum(np.abs(xs - p.lo), np.abs(xs - p.hi)) < 1e-2
        assert np.array_equal(truth[~near], claim[~near])
        return s

    def test_convex_two_roots(self):
        self.check(1.0, 0.0, 0.0, 4.0)

    def test_convex_no_solution(self):
        assert general_quadratic_sublevel(1.0, 0.0, 5.0, 4.0, self.DOM) is EMPTY

    def test_concave_complement(self):
        s = self.check(-1.0, 0.0, 0.0, -4.0)  # -x^2 <= -4 -> |x| >= 2
        assert len(s.parts) == 2

    def test_concave_everywhere(self):
        s = general_quadratic_sublevel(-1.0, 0.0, 0.0, 1.0, self.DOM)
        assert s.parts == (self.DOM,)

    def test_linear_both_slopes(self):
        self.check(0.0, 2.0, 1.0, 0.0)
        self.check(0.0, -2.0, 1.0, 0.0)

    def test_constant(self):
        assert general_quadratic_sublevel(0.0, 0.0, 1.0, 2.0, self.DOM).parts == (self.DOM,)
        assert general_quadratic_sublevel(0.0, 0.0, 3.0, 2.0, self.DOM) is EMPTY

    @given(
        st.floats(-3, 3, allow_nan=False),
        st.floats(-3, 3, allow_nan=False),
        st.floats(-3, 3, allow_nan=False),
        st.floats(-3, 3, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_randomized_vs_grid(self, a, b, c, level):
        # snap coefficients too small to evaluate faithfully on the grid:
        # the oracle itself rounds them away
        a, b, c = (0.0 if abs(v) < 1e-6 else v for v in (a, b, c))
        self.check(a, b, c, level, Interval(-5.0, 5.0))


class TestPlaceUniform:
    def test_single_interval_linear(self):
        s = iset((2.0, 4.0))
        assert place_uniform(s, 0.0) == 2.0
        assert place_uniform(s, 0.5) == 3.0
        assert place_uniform(s, 1.0) == 4.0

    def test_multi_part_arclength(self):
        s = iset((0.0, 1.0), (10.0, 13.0))  # lengths 1 and 3
        assert place_uniform(s, 0.125) == pytest.approx(0.5)
        assert place_uniform(s, 0.25) == pytest.approx(1.0)
        assert place_uniform(s, 0.5) == pytest.approx(11.0)

    def test_result_always_member(self):
        rng = np.random.default_rng(0)
        s = iset((0.0, 0.25), (0.5, 0.5), (0.75, 1.0))
        for _ in range(1000):
            assert s.contains(sample_uniform(s, rng))

    def test_empty_raises(self):
        with pytest.raises(EmptySliceError):
            place_uniform(EMPTY, 0.5)
        with pytest.raises(EmptySliceError):
            place_uniform(iset((1.0, 1.0)), 0.5)  # zero measure

    def test_uniform_frequencies(self):
        s = iset((0.0, 1.0), (2.0, 3.0))
        rng = np.random.default_rng(7)
        xs = np.array([sample_uniform(s, rng) for _ in range(20000)])
        frac_low = np.mean(xs <= 1.0)
        assert abs(frac_low - 0.5) < 0.02


def test_membership_mask():
    s = iset((0.0, 1.0), (2.0, 3.0))
    xs = np.array([-0.5, 0.0, 0.5, 1.5, 2.0, 3.0, 3.5])
    assert membership_mask(s, xs).tolist() == [False, True, True, False, True, True, False]
