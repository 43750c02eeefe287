import pytest
from hypothesis import given, settings, strategies as st

from plqnewton.rates import classify_rate


class TestPinnedExamples:
    def test_exact_digit_doubling_is_quadratic(self):
        v = classify_rate([1e-1, 1e-2, 1e-4, 1e-8])
        assert v.classification == "quadratic"
        assert v.constants["c_quad"] == pytest.approx(1.0)

    def test_constant_ratio_is_linear(self):
        v = classify_rate([1e-1, 1e-2, 1e-3, 1e-4])
        assert v.classification == "linear"
        assert v.rho == pytest.approx(0.1)

    def test_decreasing_ratios_are_superlinear(self):
        v = classify_rate([1e-1, 2e-2, 2e-3, 8e-5])
        assert v.classification == "superlinear"


class TestEdges:
    def test_too_few_points(self):
        v = classify_rate([1.0, 0.1, 0.01])
        assert v.classification == "none"
        assert "4" in v.reason

    def test_floor_truncation(self):
        v = classify_rate([1e-1, 1e-2, 1e-16, 1e-17, 1e-18])
        assert v.classification == "none"
        assert "usable" in v.reason

    def test_floor_contaminated_final_point_dropped(self):
        # A genuine quadratic tail whose final value sits at the double floor.
        v = classify_rate([0.5, 0.1, 1e-2, 1e-4, 1e-8, 3e-14])
        assert v.classification == "quadratic"

    def test_no_pattern(self):
        v = classify_rate([1.0, 0.9, 1.2, 0.1, 0.5])
        assert v.classification == "none"

    def test_deterministic(self):
        seq = [0.3, 0.05, 1e-3, 1e-6, 1e-12]
        assert classify_rate(seq) == classify_rate(seq)


class TestScaleInvariance:
    @settings(max_examples=80, deadline=None)
    @given(st.floats(0.01, 100.0), st.integers(0, 3))
    def test_positive_scaling_preserves_class(self, scale, which):
        base = [
            [1e-1, 1e-2, 1e-4, 1e-8],
            [1e-1, 1e-2, 1e-3, 1e-4],
            [1e-1, 2e-2, 2e-3, 8e-5],
            [1.0, 0.9, 1.2, 0.1, 0.5],
        ][which]
        a = classify_rate(base)
        b = classify_rate([scale * e for e in base])
        assert a.classification == b.classification


class TestOrdering:
    def test_quadratic_takes_precedence(self):
        # Squared-ratio band holds and ratios decrease: must report quadratic.
        errs = [0.5, 0.25, 0.0625, 0.0625 ** 2, 0.0625 ** 4]
        v = classify_rate(errs)
        assert v.classification == "quadratic"

    def test_superlinear_without_band(self):
        # Halving ratios 0.4, 0.2, 0.1, 0.05: superlinear, while the squared
        # ratios 0.5, 1.25, 6.25 spread beyond a factor of ten.
        errs = [1.0, 0.4, 0.08, 0.008, 4e-4]
        q = [errs[i + 1] / errs[i] ** 2 for i in range(len(errs) - 1)]
        assert max(q[-3:]) / min(q[-3:]) > 10
        v = classify_rate(errs)
        assert v.classification == "superlinear"

    def test_slow_drift_to_constant_ratio_is_linear(self):
        # Ratios decrease slightly toward 0.3 but never halve: linear.
        errs = [1.0]
        for r in (0.34, 0.32, 0.31, 0.305, 0.30, 0.30, 0.30):
            errs.append(errs[-1] * r)
        v = classify_rate(errs)
        assert v.classification == "linear"
        assert v.rho == pytest.approx(0.31, abs=0.02)
