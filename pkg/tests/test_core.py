import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bmameta import (
    Comparison,
    DegenerateDataError,
    DomainError,
    Study,
    loglik_fixed,
    loglik_random,
    smd_from_raw,
)


class TestSmdFromRaw:
    def test_equal_means(self):
        d, se = smd_from_raw(10, 1.0, 1.0, 10, 1.0, 1.0)
        assert d == 0.0
        assert se == pytest.approx(math.sqrt(0.2), abs=1e-12)

    def test_hand_evaluated(self):
        d, se = smd_from_raw(50, 0.5, 1.0, 50, 0.0, 1.0)
        assert d == pytest.approx(0.5, abs=1e-12)
        want_var = 100.0 / 2500.0 + 0.25 / 200.0
        assert se == pytest.approx(math.sqrt(want_var), abs=1e-12)

    def test_degenerate_arms(self):
        with pytest.raises(DegenerateDataError):
            smd_from_raw(2, 0.0, 0.0, 2, 0.0, 0.0)

    def test_small_arms_rejected(self):
        with pytest.raises(DomainError):
            smd_from_raw(1, 0.0, 1.0, 5, 0.0, 1.0)

    @settings(max_examples=150, deadline=None)
    @given(
        n1=st.integers(min_value=2, max_value=200),
        n2=st.integers(min_value=2, max_value=200),
        m1=st.floats(min_value=-5, max_value=5),
        m2=st.floats(min_value=-5, max_value=5),
        sd1=st.floats(min_value=0.1, max_value=4.0),
        sd2=st.floats(min_value=0.1, max_value=4.0),
    )
    def test_sign_flip_on_arm_swap(self, n1, n2, m1, m2, sd1, sd2):
        d_ab, se_ab = smd_from_raw(n1, m1, sd1, n2, m2, sd2)
        d_ba, se_ba = smd_from_raw(n2, m2, sd2, n1, m1, sd1)
        assert d_ab == pytest.approx(-d_ba, abs=1e-12)
        assert se_ab == pytest.approx(se_ba, rel=1e-12)

    def test_study_from_raw_carries_summaries(self):
        s = Study.from_raw(10, 1.0, 1.0, 10, 0.0, 1.0, label="x")
        assert s.raw is not None and s.label == "x"
        assert s.effect == pytest.approx(1.0)


class TestValidation:
    def test_se_positive(self):
        with pytest.raises(DomainError):
            Study(0.0, 0.0)
        with pytest.raises(DomainError):
            Study(float("nan"), 1.0)

    def test_comparison_nonempty(self):
        with pytest.raises(DomainError):
            Comparison(())


class TestLoglikFixed:
    def test_standard_normal_at_zero(self):
        c = Comparison((Study(0.0, 1.0),))
        assert loglik_fixed(0.0, c) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-14)

    def test_two_identical_studies_double(self):
        one = Comparison((Study(0.4, 0.7),))
        two = Comparison((Study(0.4, 0.7), Study(0.4, 0.7)))
        assert loglik_fixed(0.1, two) == loglik_fixed(0.1, one) * 2.0

    def test_five_study_term_by_term_oracle(self, rng):
        y = rng.normal(0.2, 0.5, 5)
        se = rng.uniform(0.2, 0.8, 5)
        c = Comparison(tuple(Study(float(a), float(b)) for a, b in zip(y, se)))
        delta = 0.37
        oracle = sum(
            -0.5 * ((yi - delta) ** 2 / si**2 + math.log(2 * math.pi * si**2))
            for yi, si in zip(y, se)
        )
        assert loglik_fixed(delta, c) == pytest.approx(oracle, abs=1e-12)

    def test_maximized_at_weighted_mean(self, rng):
        y = rng.normal(0.1, 0.4, 6)
        se = rng.uniform(0.1, 0.9, 6)
        c = Comparison(tuple(Study(float(a), float(b)) for a, b in zip(y, se)))
        w = 1.0 / se**2
        wmean = float(np.sum(w * y) / np.sum(w))
        # golden-section search over a wide bracket
        phi = (math.sqrt(5) - 1) / 2
        a, b = -5.0, 5.0
        cc, dd = b - phi * (b - a), a + phi * (b - a)
        while b - a > 1e-12:
            if loglik_fixed(cc, c) >= loglik_fixed(dd, c):
                b, dd = dd, cc
                cc = b - phi * (b - a)
            else:
                a, cc = cc, dd
                dd = a + phi * (b - a)
        assert 0.5 * (a + b) == pytest.approx(wmean, abs=1e-8)


class TestLoglikRandom:
    def test_tau_zero_equals_fixed(self, rng):
        y = rng.normal(0, 1, 4)
        se = rng.uniform(0.2, 1.0, 4)
        c = Comparison(tuple(Study(float(a), float(b)) for a, b in zip(y, se)))
        for delta in (-1.2, 0.0, 0.8):
            assert loglik_random(delta, 0.0, c) == loglik_fixed(delta, c)

    def test_one_study_closed_form(self):
        c = Comparison((Study(0.0, 1.0),))
        assert loglik_random(0.0, 1.0, c) == pytest.approx(-0.5 * math.log(4 * math.pi), abs=1e-14)

    def test_unimodal_in_delta(self, rng):
        y = rng.normal(0.3, 0.2, 5)
        se = rng.uniform(0.2, 0.5, 5)
        c = Comparison(tuple(Study(float(a), float(b)) for a, b in zip(y, se)))
        tau = 0.3
        w = 1.0 / (se**2 + tau**2)
        wmean = float(np.sum(w * y) / np.sum(w))
        offsets = np.array([0.1, 0.5, 1.0, 2.0, 4.0])
        values_right = loglik_random(wmean + offsets, tau, c)
        values_left = loglik_random(wmean - offsets, tau, c)
        assert np.all(np.diff(values_right) < 0)
        assert np.all(np.diff(values_left) < 0)

    def test_negative_tau_rejected(self):
        c = Comparison((Study(0.0, 1.0),))
        with pytest.raises(DomainError):
            loglik_random(0.0, -0.1, c)

    def test_broadcasting_shapes(self):
        c = Comparison((Study(0.1, 0.5), Study(0.4, 0.3)))
        out = loglik_random(np.zeros((7, 15)), np.full((7, 1), 0.2), c)
        assert out.shape == (7, 15)
        out1 = loglik_random(0.0, np.linspace(0, 1, 9), c)
        assert out1.shape == (9,)

    def test_order_invariance_bitwise(self, rng):
        y = rng.normal(0, 1, 6)
        se = rng.uniform(0.2, 1.0, 6)
        studies = tuple(Study(float(a), float(b)) for a, b in zip(y, se))
        fwd = Comparison(studies)
        rev = Comparison(studies[::-1])
        assert loglik_random(0.2, 0.4, fwd) == loglik_random(0.2, 0.4, rev)
