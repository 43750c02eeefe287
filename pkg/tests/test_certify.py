import numpy as np
import pytest

from plqnewton.benchmarks import (
    b1_flat,
    b1_minimax,
    b1_negated,
    cross_l1,
    l1_kink,
    l1_plq,
    rosenbrock_ls,
)
from plqnewton.certify import certify_sosc, certify_subregularity, restricted_kkt_matrix
from plqnewton.composite import CompositeProblem
from plqnewton.errors import PreconditionError
from plqnewton.exprmap import SmoothMap
from plqnewton.manifold import build_manifold


class TestSOSC:
    def test_b1_subspace_mode(self):
        # Oracle: A^T Jac = (0, -4), so Z spans {(d1, 0)}; H = 2 I and Q = 0
        # give reduced curvature 2 on either active piece.
        b = b1_minimax()
        jac = b.problem.c.jacobian([0.0, 0.0])
        md = build_manifold(b.problem.h, b.problem.c.value([0.0, 0.0]))
        assert np.allclose(md.A.T @ jac, [[0.0, -4.0]])
        rep = certify_sosc(b.problem, b.xbar, b.ybar, md)
        assert rep.mode == "certified-subspace"
        assert rep.subspace_dim == 1
        assert rep.passed
        for _, eig in rep.piece_min_eigs:
            assert eig == pytest.approx(2.0)

    def test_negated_b1_fails(self):
        b = b1_negated()
        rep = certify_sosc(b.problem, b.xbar, b.ybar)
        assert not rep.passed
        for _, eig in rep.piece_min_eigs:
            assert eig == pytest.approx(-2.0)

    def test_smooth_least_squares_identity(self):
        p = CompositeProblem(
            rosenbrock_ls().problem.h, SmoothMap.from_strings(["x1", "x2"], 2))
        rep = certify_sosc(p, [0.0, 0.0], [0.0, 0.0])
        assert rep.mode == "certified-subspace"
        assert rep.passed
        assert rep.piece_min_eigs[0][1] == pytest.approx(1.0)

    def test_requires_stationarity(self):
        b = b1_minimax()
        with pytest.raises(PreconditionError):
            certify_sosc(b.problem, [0.5, 0.5], [1.0, 0.0])

    def test_heuristic_mode_on_flat_problem(self):
        b = b1_flat()
        rep = certify_sosc(b.problem, b.xbar, b.ybar)
        assert rep.mode == "heuristic-sampled"
        assert not rep.passed  # flat direction has zero curvature

    def test_invariant_under_orthogonal_reparameterization(self):
        rng = np.random.default_rng(31)
        b = b1_minimax()
        base = certify_sosc(b.problem, b.xbar, b.ybar)
        for _ in range(5):
            U = np.linalg.qr(rng.standard_normal((2, 2)))[0]
            rotated = CompositeProblem(b.problem.h, b.problem.c.rotated(U))
            rep = certify_sosc(rotated, U.T @ b.xbar, b.ybar)
            assert rep.passed == base.passed
            eigs0 = sorted(v for _, v in base.piece_min_eigs)
            eigs1 = sorted(v for _, v in rep.piece_min_eigs)
            assert np.allclose(eigs0, eigs1, atol=1e-8)

    def test_rayleigh_quotients_bound_reported_eigs(self):
        rng = np.random.default_rng(41)
        b = b1_minimax()
        md = build_manifold(b.problem.h, b.problem.c.value(b.xbar))
        rep = certify_sosc(b.problem, b.xbar, b.ybar, md)
        jac = b.problem.c.jacobian(b.xbar)
        H = b.problem.c.weighted_hessian(b.xbar, b.ybar)
        from plqnewton.numerics import nullspace_basis

        Z = nullspace_basis(md.A.T @ jac)
        for j, (k, eig) in enumerate(rep.piece_min_eigs):
            G = jac.T @ b.problem.h.pieces[k].Q @ jac + H
            M = Z.T @ G @ Z
            best = np.inf
            for _ in range(1000):
                z = rng.standard_normal(Z.shape[1])
                nz = np.linalg.norm(z)
                if nz < 1e-12:
                    continue
                best = min(best, (z @ M @ z) / (nz * nz))
            assert best >= eig - 1e-9


class TestSubregularity:
    def test_b1_certified(self):
        b = b1_minimax()
        cert = certify_subregularity(b.problem, b.xbar)
        assert cert.m_singleton
        assert cert.conclusion == "strongly-metrically-subregular"

    def test_duplicated_component_not_certified(self):
        p = CompositeProblem(l1_plq(), SmoothMap.from_strings(["x1", "x1"], 1))
        cert = certify_subregularity(p, [0.0])
        assert not cert.m_singleton
        assert cert.conclusion == "not-certified"

    def test_flat_direction_not_certified(self):
        cert = certify_subregularity(b1_flat().problem, [0.0, 0.0])
        assert cert.conclusion == "not-certified"
        assert not cert.m_singleton

    def test_l1_kink_and_cross_certified(self):
        for bench in (l1_kink(), cross_l1()):
            cert = certify_subregularity(bench.problem, bench.xbar)
            assert cert.conclusion == "strongly-metrically-subregular", (bench.name, cert.reasons)

    def test_certified_implies_isolated_linearized_solution(self):
        # Whenever the certificate concludes, the structure enumeration finds
        # the solution pair as the only critical point within radius 0.1.
        from plqnewton.solver import solve_subproblem_enum

        for bench in (b1_minimax(), l1_kink(), cross_l1()):
            cert = certify_subregularity(bench.problem, bench.xbar)
            assert cert.conclusion == "strongly-metrically-subregular"
            H = bench.problem.c.weighted_hessian(bench.xbar, bench.ybar)
            sols = solve_subproblem_enum(bench.problem, bench.xbar, bench.ybar, H)
            near = [s for s in sols
                    if np.linalg.norm(s.d) + np.linalg.norm(s.y - bench.ybar) <= 0.1]
            assert len(near) == 1
            assert near[0].unique
            assert np.linalg.norm(near[0].d) <= 1e-9
            assert np.linalg.norm(near[0].y - bench.ybar) <= 1e-9

    def test_sosc_invariant_under_piece_permutation(self):
        # Swapping the two pieces of the max function relabels the manifold
        # bookkeeping but must not change the certificate.
        from plqnewton.plq import PLQFunction

        b = b1_minimax()
        h = b.problem.h
        swapped = PLQFunction(2, h.hyperplanes, (h.pieces[1], h.pieces[0]))
        p2 = CompositeProblem(swapped, b.problem.c)
        rep1 = certify_sosc(b.problem, b.xbar, b.ybar)
        rep2 = certify_sosc(p2, b.xbar, b.ybar)
        assert rep1.passed == rep2.passed
        eigs1 = sorted(v for _, v in rep1.piece_min_eigs)
        eigs2 = sorted(v for _, v in rep2.piece_min_eigs)
        assert np.allclose(eigs1, eigs2, atol=1e-10)


class TestSinglePieceBoundary:
    def test_boundary_point_routes_to_heuristic_and_surfaces_the_gap(self):
        # One piece with an active domain hyperplane at the solution: neither
        # the manifold path (needs two pieces) nor the smooth path (needs an
        # interior point) applies, so the certificate stays heuristic and the
        # conclusion reports the gap.
        from plqnewton.benchmarks import nlp_plq
        from plqnewton.manifold import build_manifold
        from plqnewton.errors import RegimeError
        from plqnewton.solver import SolveOptions, smooth_newton_solve

        p = CompositeProblem(nlp_plq(), SmoothMap.from_strings(["x1^2", "x1"], 1))
        xbar = np.array([0.0])
        ybar = np.array([1.0, 0.0])
        rep = certify_sosc(p, xbar, ybar)
        assert rep.mode == "heuristic-sampled"
        assert rep.passed  # curvature 2 on the sampled non-ascent rays
        cert = certify_subregularity(p, xbar)
        assert cert.m_singleton
        assert cert.conclusion == "not-certified"
        assert any("heuristic" in r for r in cert.reasons)
        with pytest.raises(RegimeError):
            build_manifold(p.h, p.c.value(xbar))
        with pytest.raises(RegimeError):
            smooth_newton_solve(p, (xbar, ybar), SolveOptions())
        # The structure-enumeration path still works at the solution.
        from plqnewton.solver import solve_subproblem_enum

        sols = solve_subproblem_enum(p, xbar, ybar, p.c.weighted_hessian(xbar, ybar))
        assert sols and np.linalg.norm(sols[0].d) <= 1e-10


class TestRestrictedKKTMatrix:
    def test_b1_nonsingular(self):
        b = b1_minimax()
        md = build_manifold(b.problem.h, b.problem.c.value(b.xbar))
        for j in range(md.kbar):
            M, ok = restricted_kkt_matrix(b.problem, md, b.xbar, b.ybar, j)
            assert ok
            assert M.shape == (2 + 2 + 1, 2 + 2 + 1)

    def test_constant_map_singular(self):
        b = b1_minimax()
        p = CompositeProblem(b.problem.h, SmoothMap.from_strings(
            ["0*x1 + 1", "0*x1 + 1"], 2))
        md = build_manifold(p.h, np.array([1.0, 1.0]))
        M, ok = restricted_kkt_matrix(p, md, [0.0, 0.0], [0.5, 0.5], 0)
        assert not ok

    def test_toy_3x3_determinant(self):
        # n = m = ell = 1 with H = 1, Jac = 1, Q = 0, A = 1, P = 1:
        # the matrix is [[1,1,0],[0,1,-1],[1,0,0]] with determinant -1.
        M = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, -1.0], [1.0, 0.0, 0.0]])
        assert np.linalg.det(M) == pytest.approx(-1.0)
        from plqnewton.certify import _nonsingular_by_lu

        assert _nonsingular_by_lu(M)
