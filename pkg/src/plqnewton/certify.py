"""Second-order sufficiency and strong-metric-subregularity certificates.

The reduced curvature check runs in one of three modes:

  certified-subspace: nondegeneracy and strict criticality pin the non-ascent
      cone down to the subspace Null(A^T Jac), so positive definiteness of
      each active piece's reduced matrix Z^T (Jac^T Q_j Jac + H) Z certifies
      sufficiency. The smooth single-piece interior case uses Z = I_n.
  heuristic-sampled: without those qualifications the non-ascent set is a
      union of cones; curvature is sampled on its extreme rays (enumerated for
      small dimension) and random conic combinations. This mode never
      certifies, it only reports evidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .calculus import cone_generators, dir_deriv_second
from .composite import CompositeProblem, check_cqs, kkt_residual, multiplier_set
from .errors import PreconditionError
from .manifold import ManifoldData, build_manifold
from .numerics import as_vector, nullspace_basis
from .plq import eval_with_active

# Positive-definiteness threshold on reduced eigenvalues.
PD_TOL = 1e-8
# KKT residual threshold for "is a stationary pair".
STATIONARY_TOL = 1e-6
# Extreme-ray enumeration is exact up to this many primal dimensions.
ENUM_DIM_LIMIT = 6


@dataclass(frozen=True)
class SOSCReport:
    mode: str                 # "certified-subspace" | "heuristic-sampled"
    subspace_dim: int | None
    piece_min_eigs: tuple     # (piece index, min eigenvalue) per active piece
    sampled_min: float | None
    passed: bool

    def to_dict(self):
        return {"mode": self.mode, "subspace_dim": self.subspace_dim,
                "piece_min_eigs": [(int(k), None if v is None else float(v))
                                   for k, v in self.piece_min_eigs],
                "sampled_min": None if self.sampled_min is None else float(self.sampled_min),
                "passed": bool(self.passed)}


@dataclass(frozen=True)
class SubregularityCertificate:
    m_singleton: bool
    sosc: SOSCReport | None
    conclusion: str           # "strongly-metrically-subregular" | "not-certified"
    reasons: tuple = ()

    def to_dict(self):
        return {"m_singleton": self.m_singleton,
                "sosc": None if self.sosc is None else self.sosc.to_dict(),
                "conclusion": self.conclusion,
                "reasons": list(self.reasons)}


def _reduced_min_eig(Z, G):
    if Z.shape[1] == 0:
        return None
    M = Z.T @ G @ Z
    M = 0.5 * (M + M.T)
    return float(np.min(np.linalg.eigvalsh(M)))


def certify_sosc(p: CompositeProblem, xbar, ybar, md: ManifoldData | None = None) -> SOSCReport:
    """Reduced second-order sufficiency at a stationary pair (xbar, ybar)."""
    xbar = as_vector(xbar, p.n, "xbar")
    ybar = as_vector(ybar, p.m, "ybar")
    res = kkt_residual(p, xbar, ybar)
    scale = 1.0 + float(np.linalg.norm(ybar))
    if not (res.stationarity <= STATIONARY_TOL * scale and res.subdiff_violation <= STATIONARY_TOL * scale):
        raise PreconditionError(
            f"(xbar, ybar) is not stationary: residual ({res.stationarity:g}, {res.subdiff_violation:g})")

    cx = p.c.value(xbar)
    prof = eval_with_active(p.h, cx)
    jac = p.c.jacobian(xbar)
    H = p.c.weighted_hessian(xbar, ybar)

    if prof.kbar == 1 and prof.ell == 0:
        # Interior single piece: the non-ascent set is all of R^n.
        k = prof.active_pieces[0]
        G = jac.T @ p.h.pieces[k].Q @ jac + H
        eig = _reduced_min_eig(np.eye(p.n), G)
        return SOSCReport("certified-subspace", p.n, ((k, eig),), None,
                          bool(eig is not None and eig > PD_TOL))

    if md is None and prof.kbar >= 2:
        md = build_manifold(p.h, cx)

    subspace_ok = False
    if md is not None and md.nondegenerate:
        subspace_ok = check_cqs(p, xbar).sc
    if md is not None and subspace_ok:
        Z = nullspace_basis(md.A.T @ jac)
        eigs = []
        for j in range(md.kbar):
            G = jac.T @ md.piece(j).Q @ jac + H
            eigs.append((md.active_pieces[j], _reduced_min_eig(Z, G)))
        finite = [v for _, v in eigs if v is not None]
        passed = all(v > PD_TOL for v in finite) if finite else True
        return SOSCReport("certified-subspace", Z.shape[1], tuple(eigs), None, bool(passed))

    # Heuristic: sample the union-of-cones non-ascent set.
    directions = _nonascent_directions(p, xbar, cx, prof, jac)
    worst = None
    for d in directions:
        w = jac @ d
        h2 = dir_deriv_second(p.h, cx, w)
        if h2.is_inf:
            continue
        val = h2.value + d @ H @ d
        worst = val if worst is None else min(worst, val)
    passed = worst is None or worst > PD_TOL
    return SOSCReport("heuristic-sampled", None, (), worst, bool(passed))


def _nonascent_directions(p, xbar, cx, prof, jac, samples=1000, rng=None):
    """Unit directions in the non-ascent set: per-piece extreme rays when the
    dimension is small, plus random conic combinations."""
    rng = np.random.default_rng(0) if rng is None else rng
    out = []
    per_piece = []
    for k in prof.active_pieces:
        rows = [p.h.pieces[k].signs[j] * p.h.hyperplane_matrix()[0][j] @ jac
                for j in prof.active_hyperplanes[k]]
        rows.append((p.h.piece_gradient(k, cx)) @ jac)
        B = np.array(rows).reshape(len(rows), p.n)
        if p.n <= ENUM_DIM_LIMIT:
            rays, lin = cone_generators(B)
        else:
            rays, lin = [], []
        per_piece.append((B, rays, lin))
        for r in rays:
            out.append(r)
        for l in lin:
            out.append(l)
            out.append(-l)
    budget = max(0, samples - len(out))
    per = budget // max(1, len(per_piece))
    for B, rays, lin in per_piece:
        for _ in range(per):
            d = np.zeros(p.n)
            for r in rays:
                d = d + rng.uniform(0, 1) * r
            for l in lin:
                d = d + rng.standard_normal() * l
            if not rays and not lin:
                cand = rng.standard_normal(p.n)
                if np.all(B @ cand <= 1e-12):
                    d = cand
            nd = np.linalg.norm(d)
            if nd > 1e-12:
                out.append(d / nd)
    return out


def certify_subregularity(p: CompositeProblem, xbar) -> SubregularityCertificate:
    """Combine multiplier uniqueness with reduced sufficiency."""
    xbar = as_vector(xbar, p.n, "xbar")
    cqs = check_cqs(p, xbar)
    if not cqs.bcq:
        return SubregularityCertificate(False, None, "not-certified",
                                        ("bcq fails at xbar",))
    mult = multiplier_set(p, xbar)
    if mult.status == "empty":
        return SubregularityCertificate(False, None, "not-certified",
                                        ("no multipliers: xbar is not stationary",))
    reasons = []
    if mult.status != "singleton":
        reasons.append("multiplier set is not a singleton")
    y = mult.y if mult.status == "singleton" else mult.polyhedron.ri_point()[0]
    sosc = None
    try:
        sosc = certify_sosc(p, xbar, y)
        if not sosc.passed:
            reasons.append("reduced second-order sufficiency fails")
        elif sosc.mode == "heuristic-sampled" and mult.status == "singleton":
            reasons.append("sufficiency evidence is heuristic only")
    except PreconditionError as err:
        reasons.append(str(err))
    certified = mult.status == "singleton" and sosc is not None \
        and sosc.passed and sosc.mode == "certified-subspace"
    return SubregularityCertificate(
        mult.status == "singleton", sosc,
        "strongly-metrically-subregular" if certified else "not-certified",
        tuple(reasons))


def restricted_kkt_matrix(p: CompositeProblem, md: ManifoldData, x, y, j):
    """The (n + m + ell) square system matrix of the j-th restricted step.

    Returns (matrix, nonsingular); nonsingularity is judged from the LU
    pivots against 1e-12 times the matrix norm.
    """
    if not md.nondegenerate:
        raise PreconditionError("degenerate A")
    x = as_vector(x, p.n, "x")
    y = as_vector(y, p.m, "y")
    jac = p.c.jacobian(x)
    H = p.c.weighted_hessian(x, y)
    n, m, ell = p.n, p.m, md.ell
    Q = md.piece(j).Q
    M = np.zeros((n + m + ell, n + m + ell))
    M[:n, :n] = H
    M[:n, n:n + m] = jac.T
    M[n:n + m, :n] = -Q @ jac
    M[n:n + m, n:n + m] = np.eye(m)
    M[n:n + m, n + m:] = -md.AP(j)
    M[n + m:, :n] = md.A.T @ jac
    return M, _nonsingular_by_lu(M)


def _nonsingular_by_lu(M) -> bool:
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    return bool(np.min(pivots) > 1e-12 * np.linalg.norm(M))
