import numpy as np
import pytest

from plqnewton.benchmarks import halfquad_plq, l1_plq, l1sq_plq, max2_plq, nlp_plq, sumsq_plq
from plqnewton.errors import RepresentationError
from plqnewton.plq import (
    Hyperplane,
    Piece,
    PLQFunction,
    eval_with_active,
    finite_value,
    sample_domain_point,
    validate_representation,
)


class TestEvalWithActive:
    def test_l1_origin_all_pieces_active(self):
        prof = eval_with_active(l1_plq(), [0.0, 0.0])
        assert prof.value.is_finite and prof.value.value == pytest.approx(0.0, abs=1e-15)
        assert prof.active_pieces == (0, 1, 2, 3)
        assert all(prof.active_hyperplanes[k] == (0, 1) for k in prof.active_pieces)
        assert prof.kbar == 4 and prof.ell == 2

    def test_nlp_outside_domain(self):
        prof = eval_with_active(nlp_plq(), [3.0, 1.0])
        assert prof.value.is_inf
        assert prof.active_pieces == () and prof.kbar == 0

    def test_l1sq_interior_point(self):
        # Oracle: (|1| + |2|)^2 = 9, cross-checked against the quadratic form.
        h = l1sq_plq()
        c = np.array([1.0, 2.0])
        Q = 2.0 * np.array([[1.0, 1.0], [1.0, 1.0]])
        assert 0.5 * c @ Q @ c == pytest.approx(9.0)
        prof = eval_with_active(h, c)
        assert prof.value.value == pytest.approx(9.0)
        assert prof.active_pieces == (0,)
        assert prof.active_hyperplanes[0] == ()

    def test_deterministic(self):
        h = l1_plq()
        a = eval_with_active(h, [0.5, -0.25])
        b = eval_with_active(h, [0.5, -0.25])
        assert a == b

    def test_two_active_pieces_agree(self):
        h = max2_plq()
        rng = np.random.default_rng(0)
        for _ in range(50):
            t = rng.uniform(-3, 3)
            prof = eval_with_active(h, [t, t])
            assert prof.kbar == 2
            v1 = h.piece_value(0, [t, t])
            v2 = h.piece_value(1, [t, t])
            assert abs(v1 - v2) <= 1e-8 * (1 + abs(prof.value.value))

    def test_inconsistent_values_raise(self):
        hps = [Hyperplane([1.0], 0.0)]
        pieces = [Piece([1], [[0.0]], [0.0], 0.0), Piece([-1], [[0.0]], [0.0], 1.0)]
        h = PLQFunction(1, hps, pieces)
        with pytest.raises(RepresentationError):
            eval_with_active(h, [0.0])


class TestConstruction:
    def test_rejects_asymmetric_q(self):
        with pytest.raises(ValueError):
            Piece([1], [[0.0, 1.0], [0.0, 0.0]], [0.0, 0.0])

    def test_rejects_zero_normal(self):
        with pytest.raises(ValueError):
            Hyperplane([0.0, 0.0], 1.0)

    def test_rejects_bad_signs(self):
        with pytest.raises(ValueError):
            Piece([2], [[0.0]], [0.0])

    def test_immutable_arrays(self):
        h = l1_plq()
        with pytest.raises(ValueError):
            h.pieces[0].b[0] = 5.0


class TestValidate:
    def test_l1_all_pass(self):
        rep = validate_representation(l1_plq(), probes=100)
        assert rep.all_pass
        assert all(rep.piece_feasible)
        assert rep.qq_range_checks  # kink candidates were exercised

    def test_discontinuous_pair_fails(self):
        hps = [Hyperplane([1.0], 0.0)]
        pieces = [Piece([1], [[0.0]], [0.0], 0.0), Piece([-1], [[0.0]], [0.0], 1.0)]
        h = PLQFunction(1, hps, pieces)
        rep = validate_representation(h, probes=50)
        assert not rep.all_pass
        assert rep.continuity_failures

    def test_halfquad_all_pass(self):
        # Hand oracle: continuous at 0 (0.5*0^2 = 0) and convex per piece.
        rep = validate_representation(halfquad_plq(), probes=100)
        assert rep.all_pass

    def test_interior_overlap_detected(self):
        hps = [Hyperplane([1.0], 0.0)]
        pieces = [Piece([1], [[0.0]], [1.0]), Piece([1], [[0.0]], [1.0])]
        h = PLQFunction(1, hps, pieces)
        rep = validate_representation(h, probes=20)
        assert rep.interior_overlaps == [(0, 1)]
        assert not rep.all_pass

    def test_strict_interior_overlap(self):
        hps = [Hyperplane([1.0], 0.0), Hyperplane([1.0], -1.0)]
        # Two copies of [-1, 0]: interiors coincide, which the LP check must flag.
        pieces = [Piece([1, -1], [[0.0]], [0.0]), Piece([1, -1], [[0.0]], [0.0])]
        h = PLQFunction(1, hps, pieces)
        rep = validate_representation(h, probes=20, strict=True)
        assert rep.interior_overlaps

    def test_nonconvex_midpoint_detected(self):
        # -|u| is PLQ but concave; midpoint convexity must fail.
        hps = [Hyperplane([1.0], 0.0)]
        pieces = [Piece([-1], [[0.0]], [-1.0]), Piece([1], [[0.0]], [1.0])]
        h = PLQFunction(1, hps, pieces)
        rep = validate_representation(h, probes=200)
        assert not rep.all_pass
        assert rep.convexity_violations

    def test_all_library_functions_pass(self):
        for build in (l1_plq, l1sq_plq, max2_plq, nlp_plq, halfquad_plq, sumsq_plq):
            rep = validate_representation(build(), probes=60)
            assert rep.all_pass, (build.__name__, rep.messages)


class TestConvexityProperty:
    def test_segment_convexity_sampled(self):
        rng = np.random.default_rng(7)
        for build in (l1_plq, l1sq_plq, max2_plq, halfquad_plq):
            h = build()
            for _ in range(200):
                c1 = sample_domain_point(h, rng)
                c2 = sample_domain_point(h, rng)
                t = rng.uniform()
                mid = t * c1 + (1 - t) * c2
                lhs = finite_value(h, mid)
                rhs = t * finite_value(h, c1) + (1 - t) * finite_value(h, c2)
                assert lhs <= rhs + 1e-8 * (1 + abs(rhs))
