import math

import numpy as np
import pytest

from splitsolve.spaces import (
    BlockVector,
    ShapeMismatchError,
    SpaceLayout,
    axpy_blocks,
    inner_weighted,
    norm_weighted,
    zeros,
)


def bv(primal, duals):
    return BlockVector(np.asarray(primal, float),
                       tuple(np.asarray(d, float) for d in duals))


class TestLayout:
    def test_valid(self):
        lay = SpaceLayout(3, (2, 4), (0.25, 0.75))
        assert lay.num_blocks == 2

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            SpaceLayout(3, (2,), (0.5,))

    def test_weight_range(self):
        with pytest.raises(ValueError, match="0, 1"):
            SpaceLayout(3, (2, 2), (1.5, -0.5))

    def test_positive_dims(self):
        with pytest.raises(ValueError):
            SpaceLayout(0, (2,), (1.0,))
        with pytest.raises(ValueError):
            SpaceLayout(3, (), ())

    def test_weight_sum_tolerance(self):
        # off by 1e-13 is fine, off by 1e-6 is not
        SpaceLayout(1, (1, 1), (0.5, 0.5 + 1e-13))
        with pytest.raises(ValueError):
            SpaceLayout(1, (1, 1), (0.5, 0.5 + 1e-6))


class TestInnerWeighted:
    def test_unit_entries(self):
        lay = SpaceLayout(1, (1,), (1.0,))
        a = bv([1.0], [[1.0]])
        assert inner_weighted(a, a, lay) == pytest.approx(2.0, abs=0)

    def test_orthogonal_blocks(self):
        lay = SpaceLayout(2, (1,), (1.0,))
        a = bv([1.0, 0.0], [[0.0]])
        b = bv([0.0, 1.0], [[0.0]])
        assert inner_weighted(a, b, lay) == 0.0

    def test_weighted_dual_blocks(self):
        lay = SpaceLayout(1, (1, 1), (0.5, 0.5))
        a = bv([0.0], [[2.0], [4.0]])
        assert inner_weighted(a, a, lay) == pytest.approx(10.0, rel=1e-15)

    def test_shape_mismatch_names_block(self):
        lay = SpaceLayout(2, (3,), (1.0,))
        good = zeros(lay)
        bad = bv([0.0, 0.0], [[0.0, 0.0]])
        with pytest.raises(ShapeMismatchError, match=r"dual\[0\]"):
            inner_weighted(good, bad, lay)
        with pytest.raises(ShapeMismatchError, match="primal"):
            inner_weighted(bv([0.0], [[0.0, 0.0, 0.0]]), good, lay)


class TestNormWeighted:
    def test_zero_vector(self):
        lay = SpaceLayout(2, (2,), (1.0,))
        assert norm_weighted(zeros(lay), lay) == 0.0

    def test_three_four_five(self):
        lay = SpaceLayout(1, (1,), (1.0,))
        assert norm_weighted(bv([3.0], [[4.0]]), lay) == pytest.approx(5.0, rel=1e-15)

    def test_weighted(self):
        lay = SpaceLayout(1, (1, 1), (0.25, 0.75))
        a = bv([0.0], [[2.0], [2.0]])
        assert norm_weighted(a, lay) == pytest.approx(2.0, rel=1e-15)


class TestAxpy:
    def test_alpha_zero(self):
        a = bv([1.0, 2.0], [[3.0]])
        b = bv([4.0, 5.0], [[6.0]])
        out = axpy_blocks(0.0, a, b)
        np.testing.assert_array_equal(out.primal, b.primal)
        np.testing.assert_array_equal(out.duals[0], b.duals[0])

    def test_doubling(self):
        a = bv([1.0, -2.0], [[0.5]])
        out = axpy_blocks(1.0, a, a)
        np.testing.assert_array_equal(out.primal, 2 * a.primal)
        np.testing.assert_array_equal(out.duals[0], 2 * a.duals[0])

    def test_cancellation(self):
        a = bv([1.0, -2.0], [[0.5]])
        out = axpy_blocks(-1.0, a, a)
        assert np.all(out.primal == 0.0)
        assert np.all(out.duals[0] == 0.0)

    def test_shape_mismatch(self):
        a = bv([1.0], [[1.0]])
        b = bv([1.0, 2.0], [[1.0]])
        with pytest.raises(ShapeMismatchError):
            axpy_blocks(1.0, a, b)


class TestMetricProperties:
    def setup_method(self):
        self.lay = SpaceLayout(3, (2, 4), (0.3, 0.7))
        self.rng = np.random.default_rng(7)

    def sample(self):
        return bv(self.rng.standard_normal(3),
                  [self.rng.standard_normal(2), self.rng.standard_normal(4)])

    def test_bilinearity(self):
        for _ in range(50):
            a, b, c = self.sample(), self.sample(), self.sample()
            alpha = float(self.rng.standard_normal())
            lhs = inner_weighted(axpy_blocks(alpha, a, b), c, self.lay)
            rhs = alpha * inner_weighted(a, c, self.lay) + inner_weighted(b, c, self.lay)
            assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(rhs)))

    def test_cauchy_schwarz(self):
        for _ in range(100):
            a, b = self.sample(), self.sample()
            lhs = abs(inner_weighted(a, b, self.lay))
            rhs = norm_weighted(a, self.lay) * norm_weighted(b, self.lay)
            assert lhs <= rhs + 1e-12

    def test_norm_squares_inner(self):
        for _ in range(100):
            a = self.sample()
            assert norm_weighted(a, self.lay) ** 2 == pytest.approx(
                inner_weighted(a, a, self.lay), abs=1e-12
            )


def test_all_finite_detects_nan():
    v = bv([1.0, math.nan], [[0.0]])
    assert not v.all_finite()
    assert bv([1.0], [[2.0]]).all_finite()
