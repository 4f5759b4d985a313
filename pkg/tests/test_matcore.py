import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from balancedet.matcore import (
    DomainError,
    MatrixFormatError,
    SymMatrix,
    classify,
    cofactor_determinant,
    delta,
    det_ratio,
    determinant,
    format_matrix,
    parse_matrix,
    slogdet,
    unit_diagonal_scale,
)


def half_matrix(n, diag=1.0, off=0.5):
    a = np.full((n, n), off)
    np.fill_diagonal(a, diag)
    return SymMatrix.from_array(a)


def sym_arrays(max_n=6):
    return st.integers(1, max_n).flatmap(
        lambda n: arrays(np.float64, (n, n), elements=st.floats(-5, 5, allow_nan=False))
    ).map(lambda g: g + g.T)


class TestSymMatrix:
    def test_reads_are_symmetric(self):
        J = SymMatrix(3, [1, 2, 3, 4, 5, 6])
        for i in range(3):
            for j in range(3):
                assert J[i, j] == J[j, i]
        assert J[0, 2] == 3 and J[1, 1] == 4

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="not symmetric"):
            SymMatrix.from_array([[1.0, 2.0], [2.5, 1.0]])

    def test_rejects_nonfinite_and_empty(self):
        with pytest.raises(ValueError):
            SymMatrix(2, [1.0, np.nan, 1.0])
        with pytest.raises(ValueError):
            SymMatrix(0, [])

    def test_immutable(self):
        J = SymMatrix.identity(3)
        with pytest.raises(ValueError):
            J.array[0, 0] = 5.0


class TestDelta:
    def test_identity(self):
        np.testing.assert_array_equal(delta(SymMatrix.identity(3)), [1, 1, 1])

    def test_half_matrix_balanced(self):
        np.testing.assert_allclose(delta(half_matrix(3)), [0, 0, 0], atol=0)

    def test_uses_absolute_values(self):
        np.testing.assert_array_equal(delta([[1, 2], [2, 1]]), [-1, -1])
        np.testing.assert_array_equal(delta([[-3, 1], [1, -3]]), [2, 2])

    @given(sym_arrays(), st.randoms())
    def test_permutation_equivariant(self, a, rnd):
        n = a.shape[0]
        perm = list(range(n))
        rnd.shuffle(perm)
        p = np.array(perm)
        np.testing.assert_allclose(delta(a[np.ix_(p, p)]), delta(a)[p], rtol=0, atol=1e-12)


class TestClassify:
    def test_identity_dominant_not_balanced(self):
        r = classify(SymMatrix.identity(3), 0.0)
        assert r.is_dominant and not r.is_balanced

    @pytest.mark.parametrize("n", [2, 3, 5, 9])
    def test_extremal_pattern_balanced(self, n):
        assert classify(half_matrix(n, 1.0, 1.0 / (n - 1)), 1e-12).is_balanced

    def test_neither(self):
        r = classify([[1, 2], [2, 1]], 0.0)
        assert not r.is_dominant and not r.is_balanced

    def test_negative_tolerance(self):
        with pytest.raises(ValueError):
            classify(SymMatrix.identity(2), -1e-3)

    @given(sym_arrays(), st.floats(0, 1))
    def test_balanced_implies_dominant(self, a, tol):
        r = classify(a, tol)
        assert (not r.is_balanced) or r.is_dominant


class TestDeterminant:
    def test_examples(self):
        assert determinant(SymMatrix.identity(3)) == 1.0
        # eigenvalues 2, 1/2, 1/2
        assert determinant(half_matrix(3)) == pytest.approx(0.5, rel=1e-14)
        assert cofactor_determinant(half_matrix(3).array) == pytest.approx(0.5, rel=1e-14)
        assert determinant([[1, 1], [1, 1]]) == 0.0

    def test_needs_two_by_two_pivots(self):
        # zero diagonal forces 2x2 pivots
        a = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]])
        assert determinant(a) == pytest.approx(cofactor_determinant(a), rel=1e-13)
        assert determinant(a) == pytest.approx(12.0, rel=1e-13)

    def test_sign(self):
        s, _ = slogdet(np.diag([1.0, -2.0, 3.0]))
        assert s == -1.0
        assert determinant(np.diag([1.0, -2.0, 3.0])) == pytest.approx(-6.0)

    def test_singular_zero(self):
        a = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [3.0, 6.0, 10.0]])
        assert abs(determinant(a)) < 1e-12

    @settings(max_examples=300)
    @given(sym_arrays(6))
    def test_against_cofactor_oracle(self, a):
        oracle = cofactor_determinant(a)
        scale = max(1.0, float(np.prod(np.linalg.norm(a, axis=1))))
        assert abs(determinant(a) - oracle) <= 1e-10 * scale

    def test_against_eigenvalues_large(self):
        rng = np.random.default_rng(11)
        for n in (10, 30, 50):
            g = rng.standard_normal((n, n))
            a = g + g.T
            s, l = slogdet(a)
            ev = np.linalg.eigvalsh(a)
            assert s == np.prod(np.sign(ev))
            assert l == pytest.approx(np.sum(np.log(np.abs(ev))), rel=1e-10)


class TestDetRatio:
    def test_examples(self):
        assert det_ratio(SymMatrix.identity(4)) == 1.0
        # 2 * half_matrix congruence: det 8 * 0.5 = 4, diagonal product 8
        assert det_ratio(half_matrix(3, 2.0, 1.0)) == pytest.approx(0.5, rel=1e-14)
        assert cofactor_determinant(half_matrix(3, 2.0, 1.0).array) / 8 == pytest.approx(0.5, rel=1e-14)
        assert det_ratio(np.diag([3.0, -2.0, 7.0])) == pytest.approx(1.0)

    def test_zero_diagonal_rejected(self):
        with pytest.raises(DomainError):
            det_ratio([[0.0, 1.0], [1.0, 2.0]])

    def test_no_overflow(self):
        n = 400
        a = np.eye(n) * 1e6
        a[0, 1] = a[1, 0] = 5e5
        with np.errstate(over="ignore"):
            assert math.isinf(np.prod(np.diag(a)))
        assert det_ratio(a) == pytest.approx(0.75, rel=1e-12)


class TestUnitDiagonalScale:
    def test_identity(self):
        assert unit_diagonal_scale(SymMatrix.identity(3)) == SymMatrix.identity(3)

    def test_four_two(self):
        out = unit_diagonal_scale(half_matrix(3, 4.0, 2.0))
        np.testing.assert_allclose(out.array, half_matrix(3).array, rtol=0, atol=1e-15)

    def test_rejects_nonpositive_diagonal(self):
        with pytest.raises(DomainError):
            unit_diagonal_scale([[1.0, 0.0], [0.0, -1.0]])

    @given(st.integers(1, 8).flatmap(
        lambda n: st.tuples(
            arrays(np.float64, (n, n), elements=st.floats(-2, 2, allow_nan=False)),
            arrays(np.float64, (n,), elements=st.floats(0.1, 10)),
        )))
    def test_det_equals_ratio(self, data):
        g, d = data
        a = g + g.T
        np.fill_diagonal(a, d)
        r = det_ratio(a)
        assert abs(determinant(unit_diagonal_scale(a)) - r) <= 1e-10 * max(1.0, abs(r))


@given(st.integers(1, 6).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(0, 3, allow_nan=False))))
def test_balanced_nonneg_diagonal_is_psd(g):
    # Gershgorin: set the diagonal to the off-diagonal absolute row sum
    a = g + g.T
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, np.abs(a).sum(axis=1))
    assert classify(a, 1e-9).is_balanced
    assert determinant(a) >= -1e-10


class TestTextFormat:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(3)
        g = rng.standard_normal((5, 5))
        J = SymMatrix.from_array(g + g.T)
        assert parse_matrix(format_matrix(J)) == J

    @pytest.mark.parametrize("text", [
        "", "x\n", "2\n1 2\n", "2\n1 2\n3 4\n", "2\n1 a\na 1\n", "2 2\n1 0\n0 1\n", "2\n1 nan\nnan 1\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(MatrixFormatError):
            parse_matrix(text)

    def test_symmetry_tolerance(self):
        assert parse_matrix("2\n1 0.5\n0.5000000000000001 1\n").n == 2
        with pytest.raises(MatrixFormatError):
            parse_matrix("2\n1 0.5\n0.5000001 1\n")
