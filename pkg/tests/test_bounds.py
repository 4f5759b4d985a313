import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from balancedet.bounds import (
    SpectralStats,
    bound_report,
    envelope_f,
    envelope_g,
    gjsw_lower,
    gjsw_upper,
    lemma1_lower,
    proof_chain,
    spectral_stats,
    theorem_bound,
)
from balancedet.matcore import SymMatrix, determinant
from balancedet.sampling import SampleConfig, extremal, sample_feasible, sample_psd, sample_signed

DIAG112 = SymMatrix.from_array(np.diag([1.0, 1.0, 2.0]))


class TestSpectralStats:
    def test_identity(self):
        s = spectral_stats(SymMatrix.identity(3))
        assert (s.m, s.s) == (1.0, 0.0)

    def test_n3_extremal(self):
        st_ = spectral_stats(extremal(3).array + np.eye(3))
        assert st_.trace_sq - 3 == pytest.approx(1.5, abs=1e-15)
        assert st_.m == 1.0
        assert st_.s == pytest.approx(1 / math.sqrt(2), abs=1e-15)

    def test_diag112(self):
        # tr A = 4, tr A^2 = 6, s^2 = 6/3 - 16/9 = 2/9
        s = spectral_stats(DIAG112)
        assert s.trace == 4 and s.trace_sq == 6
        assert s.m == pytest.approx(4 / 3, abs=1e-15)
        assert s.s == pytest.approx(math.sqrt(2) / 3, abs=1e-15)

    def test_s_clamped_for_scalar_matrix(self):
        # 0.7 I_7 rounds s^2 to about -2e-16
        a = np.eye(7) * 0.7
        assert np.sum(a * a) / 7 - (np.trace(a) / 7) ** 2 < 0
        assert spectral_stats(a).s == 0.0

    @pytest.mark.parametrize("n", [3, 6, 11])
    def test_trace_identity(self, n):
        B = sample_feasible(n, SampleConfig(seed=4))
        s = spectral_stats(B.array + np.eye(n))
        offdiag_sq = sum(B.array[i, j] ** 2 for i in range(n) for j in range(n) if i != j)
        assert abs((s.trace_sq - n) - offdiag_sq) <= 1e-10


class TestSandwich:
    def test_scalar_matrix_collapses(self):
        st_ = SpectralStats(4, 8.0, 16.0, 2.0, 0.0)
        assert gjsw_lower(st_) == gjsw_upper(st_) == 16.0

    def test_diag112_exact(self):
        # exact rational evaluation: s*sqrt(2) = 2/3, s/sqrt(2) = 1/3
        m = Fraction(4, 3)
        lower = (m - Fraction(2, 3)) * (m + Fraction(1, 3)) ** 2
        upper = (m + Fraction(2, 3)) * (m - Fraction(1, 3)) ** 2
        assert (lower, upper) == (Fraction(50, 27), 2)
        s = spectral_stats(DIAG112)
        assert gjsw_lower(s) == pytest.approx(50 / 27, abs=1e-12)
        assert gjsw_upper(s) == pytest.approx(2.0, abs=1e-12)
        assert determinant(DIAG112) == 2.0

    def test_n3_extremal_upper_tight(self):
        s = spectral_stats(extremal(3).array + np.eye(3))
        assert gjsw_upper(s) == pytest.approx(0.5, abs=1e-15)

    @given(st.integers(2, 9), st.integers(0, 2**32))
    def test_sandwich_on_gram(self, n, seed):
        a = sample_psd(n, SampleConfig(seed=seed))
        s = spectral_stats(a)
        det = determinant(a)
        assert gjsw_lower(s) - 1e-9 <= det <= gjsw_upper(s) + 1e-9

    @given(st.integers(2, 20), st.floats(0, 1, exclude_max=True))
    def test_upper_is_envelope(self, n, frac):
        a = math.sqrt(n - 1)
        t = frac * a
        st_ = SpectralStats(n, float(n), 0.0, 1.0, t)
        assert gjsw_upper(st_) == pytest.approx(envelope_f(t, a), rel=1e-10, abs=1e-300)


class TestTheoremBound:
    def test_values(self):
        assert theorem_bound(2) == 0.0
        assert theorem_bound(3) == pytest.approx(0.5, abs=1e-16)
        assert theorem_bound(4) == pytest.approx(float(2 * Fraction(2, 3) ** 3), rel=1e-15)
        assert theorem_bound(5) == pytest.approx(float(2 * Fraction(3, 4) ** 4), rel=1e-15)
        assert theorem_bound(5) == pytest.approx(0.6328125, rel=1e-15)

    def test_limit(self):
        assert abs(theorem_bound(10**6) - 2 / math.e) <= 1e-5
        assert theorem_bound(10**9) < 2 / math.e

    def test_increasing(self):
        vals = [theorem_bound(n) for n in range(3, 2000)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            theorem_bound(1)


class TestTraceLowerBound:
    def test_values(self):
        assert lemma1_lower(3) == 1.5
        assert lemma1_lower(4) == pytest.approx(4 / 3)
        assert lemma1_lower(2) == 2.0

    @pytest.mark.parametrize("n", [2, 3, 4, 7])
    def test_attained_by_extremal(self, n):
        assert extremal(n).trace_sq() == pytest.approx(lemma1_lower(n), rel=1e-14)

    def test_rejects(self):
        with pytest.raises(ValueError):
            lemma1_lower(1)


class TestEnvelopes:
    def test_f_values(self):
        assert envelope_f(0.0, 3.7) == 1.0
        assert envelope_f(1 / math.sqrt(2), math.sqrt(2)) == pytest.approx(0.5, abs=1e-15)
        assert envelope_f(2.0, 2.0) == 0.0

    def test_f_domain(self):
        with pytest.raises(ValueError):
            envelope_f(-0.1, 1.0)
        with pytest.raises(ValueError):
            envelope_f(1.1, 1.0)
        with pytest.raises(ValueError):
            envelope_f(0.1, 0.0)

    @pytest.mark.parametrize("a", [0.5, 1.0, math.sqrt(2), 3.0])
    def test_f_decreasing_grid(self, a):
        ts = np.linspace(0, a, 1001)
        vals = [envelope_f(float(t), a) for t in ts]
        assert all(v1 <= v0 + 1e-12 for v0, v1 in zip(vals, vals[1:]))

    def test_f_derivative_closed_form(self):
        # d/dt log f = -a (1 + a^2) t / ((1 + a t)(a - t)), checked by central differences
        a, t, h = 1.7, 0.6, 1e-6
        fd = (math.log(envelope_f(t + h, a)) - math.log(envelope_f(t - h, a))) / (2 * h)
        assert fd == pytest.approx(-a * (1 + a * a) * t / ((1 + a * t) * (a - t)), rel=1e-7)

    def test_g_values(self):
        assert envelope_g(0.0, 5) == 1.0
        for n in (3, 4, 5):
            assert abs(envelope_g(1 / math.sqrt(n - 1), n)) <= 1e-12
        assert envelope_g(0.8, 3) < 0

    def test_g_domain(self):
        with pytest.raises(ValueError):
            envelope_g(-1.0, 3)
        with pytest.raises(ValueError):
            envelope_g(0.1, 1)


class TestProofChain:
    def test_n3_equality(self):
        t = proof_chain(extremal(3))
        assert t.chain_ok
        assert t.s == pytest.approx(t.s_lo, abs=1e-15)
        for v in (t.det_value, t.envelope_at_s, t.theorem_bound, t.gjsw_upper_value):
            assert v == pytest.approx(0.5, abs=1e-12)

    def test_n4_equality(self):
        t = proof_chain(extremal(4))
        assert t.chain_ok
        assert t.det_value == pytest.approx(16 / 27, abs=1e-12)
        assert t.theorem_bound == pytest.approx(16 / 27, abs=1e-15)

    @pytest.mark.parametrize("seed", range(20))
    def test_n5_samples(self, seed):
        t = proof_chain(sample_feasible(5, SampleConfig(seed=seed)))
        assert t.chain_ok
        assert t.det_value <= 0.6328125 + 1e-9
        assert t.s_lo <= t.s < t.s_hi

    def test_signed_samples(self):
        for i in range(50):
            t = proof_chain(sample_signed(6, SampleConfig(seed=9), i))
            assert t.chain_ok and t.s_in_interval

    def test_records_interval_violation(self):
        # not a feasible matrix: spread beyond sqrt(n-1) is reported, not raised
        b = np.full((3, 3), 1.5)
        np.fill_diagonal(b, 0.0)
        t = proof_chain(b)
        assert not t.s_in_interval and not t.chain_ok

    def test_rejects_n2(self):
        with pytest.raises(ValueError):
            proof_chain(extremal(2))


class TestBoundReport:
    def test_balanced_unnormalized(self):
        a = np.full((4, 4), 3.0)
        np.fill_diagonal(a, 9.0)
        r = bound_report(a)
        assert r.is_balanced and r.within_bound and r.sandwich_ok
        assert r.det_ratio == pytest.approx(16 / 27, rel=1e-12)
        assert r.trace is not None and r.trace.chain_ok

    def test_nonconstant_diagonal_skips_chain(self):
        a = np.array([[2.0, 1.0, 1.0], [1.0, 3.0, 2.0], [1.0, 2.0, 3.0]])
        r = bound_report(a)
        assert r.is_balanced and r.within_bound
        assert r.trace is None
        assert any("congruence" in note for note in r.notes)

    def test_unverified_precondition(self):
        r = bound_report(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert r.psd_precondition == "unverified precondition"
        assert r.sandwich_ok is None and r.theorem_bound is None
