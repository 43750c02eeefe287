"""Active-manifold structure of a PLQ function at a kink point.

At a point cbar shared by kbar >= 2 pieces, the manifold is the relative
interior of the intersection of the active pieces: the common active
hyperplanes hold with equality, every other constraint of every active piece
strictly. The matrix A stacks the active constraint gradients of the
reference piece (the last active piece, so its sign matrix is the identity);
the diagonal sign matrices P_j relate the other pieces' gradients through
A P_j. Nondegeneracy means A has full column rank, which makes the block
multiplier mu(c, y) unique.

ManifoldData is immutable and the operations are pure, so concurrent use is
safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    MembershipError,
    PreconditionError,
    RegimeError,
    RepresentationError,
)
from .numerics import as_vector, freeze_array, matrix_rank_rel
from .plq import ACT_TOL, PLQFunction, eval_with_active
from .simplex import solve_lp

# Strictness threshold on multiplier entries.
SC_TOL = 1e-8
# Reconstruction tolerance for the block multiplier identity.
RECON_TOL = 1e-10


@dataclass(frozen=True)
class ManifoldData:
    h: PLQFunction
    base_point: np.ndarray
    active_pieces: tuple          # ascending piece indices, k_bar of them
    active_hyperplanes: tuple     # ascending hyperplane indices, ell of them
    A: np.ndarray                 # m x ell, reference-piece active gradients
    P: tuple                      # k_bar diagonal sign vectors (length ell)
    nondegenerate: bool

    def __post_init__(self):
        object.__setattr__(self, "base_point", freeze_array(self.base_point))
        object.__setattr__(self, "A", freeze_array(self.A))
        object.__setattr__(self, "P", tuple(freeze_array(v) for v in self.P))

    @property
    def kbar(self) -> int:
        return len(self.active_pieces)

    @property
    def ell(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def P_matrix(self, j) -> np.ndarray:
        return np.diag(self.P[j])

    def AP(self, j) -> np.ndarray:
        return self.A * self.P[j][None, :]

    def piece(self, j):
        """The j-th active piece's data."""
        return self.h.pieces[self.active_pieces[j]]

    # Block operators of the averaged subdifferential system.

    def block_A(self) -> np.ndarray:
        """Block-circulant coefficient matrix of the multiplier system."""
        k, ell, m = self.kbar, self.ell, self.m
        out = np.zeros((k * m, k * ell))
        for r in range(k):
            for c in range(k):
                coef = (1.0 - k) if r == c else 1.0
                out[r * m:(r + 1) * m, c * ell:(c + 1) * ell] = coef * self.AP(c)
        return out

    def block_Q(self) -> np.ndarray:
        return np.vstack([self.piece(j).Q for j in range(self.kbar)])

    def block_b(self) -> np.ndarray:
        return np.concatenate([self.piece(j).b for j in range(self.kbar)])

    def block_J(self) -> np.ndarray:
        return np.vstack([np.eye(self.m)] * self.kbar)

    def A_bar(self) -> np.ndarray:
        return np.hstack([self.AP(j) for j in range(self.kbar)]) / self.kbar

    def Q_bar(self) -> np.ndarray:
        return sum(self.piece(j).Q for j in range(self.kbar)) / self.kbar

    def b_bar(self) -> np.ndarray:
        return sum(self.piece(j).b for j in range(self.kbar)) / self.kbar

    def lambda0(self, c) -> np.ndarray:
        c = as_vector(c, self.m, "c")
        return self.Q_bar() @ c + self.b_bar()

    def mu_rhs(self, c) -> np.ndarray:
        """Right-hand side of the multiplier system at c."""
        c = as_vector(c, self.m, "c")
        k = self.kbar
        avg = self.Q_bar() @ c + self.b_bar()
        rows = []
        for j in range(k):
            rows.append(k * (self.piece(j).Q @ c + self.piece(j).b - avg))
        return np.concatenate(rows)

    def zeta_basis(self) -> np.ndarray:
        """Columns zeta_p spanning the nullspace of the block system matrix."""
        k, ell = self.kbar, self.ell
        Z = np.zeros((k * ell, ell))
        for p in range(ell):
            for j in range(k):
                Z[j * ell + p, p] = self.P[j][p]
        return Z

    def to_dict(self):
        return {
            "base_point": self.base_point.tolist(),
            "active_pieces": list(map(int, self.active_pieces)),
            "active_hyperplanes": list(map(int, self.active_hyperplanes)),
            "A": self.A.tolist(),
            "P": [v.tolist() for v in self.P],
            "nondegenerate": bool(self.nondegenerate),
        }


@dataclass(frozen=True)
class MuVector:
    blocks: np.ndarray  # (k_bar, ell)

    def __post_init__(self):
        object.__setattr__(self, "blocks", freeze_array(np.atleast_2d(self.blocks)))

    @property
    def flat(self) -> np.ndarray:
        return self.blocks.reshape(-1)

    @property
    def min_entry(self) -> float:
        return float(np.min(self.blocks)) if self.blocks.size else np.inf


def build_manifold(h: PLQFunction, cbar) -> ManifoldData:
    """Manifold data at cbar; requires at least two active pieces."""
    cbar = as_vector(cbar, h.m, "cbar")
    prof = eval_with_active(h, cbar)
    if not prof.is_finite:
        raise DomainError("cbar is outside dom h")
    if prof.kbar == 1:
        raise RegimeError("single active piece at cbar: use the smooth solver path")
    sets = {prof.active_hyperplanes[k] for k in prof.active_pieces}
    if len(sets) != 1:
        raise RepresentationError("active hyperplane sets differ across active pieces")
    act = tuple(sorted(sets.pop()))
    if not act:
        raise RepresentationError("two pieces active with no active hyperplane")
    pieces = tuple(sorted(prof.active_pieces))
    ref = pieces[-1]
    A_all, _ = h.hyperplane_matrix()
    ref_signs = h.pieces[ref].signs
    A = np.column_stack([ref_signs[j] * A_all[j] for j in act])
    P = []
    for k in pieces:
        P.append(np.array([h.pieces[k].signs[j] * ref_signs[j] for j in act], dtype=float))
    nondeg = matrix_rank_rel(A) == len(act)
    return ManifoldData(h, cbar, pieces, act, A, tuple(P), nondeg)


def manifold_contains(md: ManifoldData, c) -> bool:
    """Equality on the common active hyperplanes, strict slack on every other
    constraint of every active piece."""
    c = as_vector(c, md.m, "c")
    h = md.h
    A_all, alpha = h.hyperplane_matrix()
    if A_all.shape[0] == 0:
        return False
    res = A_all @ c - alpha
    tol = ACT_TOL * (1.0 + np.abs(alpha))
    for j in md.active_hyperplanes:
        if abs(res[j]) > tol[j]:
            return False
    for k in md.active_pieces:
        signs = h.pieces[k].signs
        for j in range(h.n_hyperplanes):
            if j in md.active_hyperplanes:
                continue
            if signs[j] * res[j] >= -tol[j]:
                return False
    return True


def mu_of(md: ManifoldData, c, y) -> MuVector:
    """The unique block multiplier with y = grad_j(c) + A P_j mu_j for every
    active piece j. Requires nondegeneracy and c on the manifold."""
    if not md.nondegenerate:
        raise PreconditionError("degenerate A: block multipliers are not unique")
    c = as_vector(c, md.m, "c")
    y = as_vector(y, md.m, "y")
    if not manifold_contains(md, c):
        raise PreconditionError("c is not on the manifold")
    AtA = md.A.T @ md.A
    blocks = np.empty((md.kbar, md.ell))
    scale = 1.0 + float(np.linalg.norm(y))
    for j in range(md.kbar):
        pc = md.piece(j)
        resid = y - pc.Q @ c - pc.b
        mu_j = md.P[j] * np.linalg.solve(AtA, md.A.T @ resid)
        recon = resid - md.AP(j) @ mu_j
        if np.linalg.norm(recon) > RECON_TOL * scale:
            raise MembershipError(
                f"y is not a subgradient at c: block {j} reconstruction residual "
                f"{np.linalg.norm(recon):g}")
        blocks[j] = mu_j
    if np.min(blocks) < -1e-9:
        raise MembershipError(f"y is not a subgradient at c: negative multiplier {np.min(blocks):g}")
    mu = MuVector(blocks)
    # Averaged identity: y = lambda0(c) + A_bar mu.
    avg = md.lambda0(c) + md.A_bar() @ mu.flat
    if np.linalg.norm(avg - y) > RECON_TOL * scale:
        raise MembershipError("averaged multiplier identity failed")
    return mu


@dataclass(frozen=True)
class StrictnessReport:
    ri_member: bool
    k_strict: bool
    mu: MuVector

    def to_dict(self):
        return {"ri_member": self.ri_member, "k_strict": self.k_strict,
                "mu": self.mu.blocks.tolist(), "mu_min": self.mu.min_entry}


def strictness_check(md: ManifoldData, c, y) -> StrictnessReport:
    """Relative-interior membership (all blocks positive) and the weaker
    k-strict complementarity."""
    mu = mu_of(md, c, y)
    blocks = mu.blocks
    ri_member = bool(np.all(blocks > SC_TOL))
    has_positive_block = any(np.all(blocks[j] > SC_TOL) for j in range(md.kbar))
    zeros_ok = True
    for j in range(md.kbar):
        for i in range(md.ell):
            if blocks[j, i] <= SC_TOL:
                if not all(md.P[jp][i] == 1.0 for jp in range(md.kbar)):
                    zeros_ok = False
    k_strict = bool(has_positive_block and zeros_ok)
    return StrictnessReport(ri_member, k_strict, mu)


@dataclass(frozen=True)
class PartialSmoothnessCertificate:
    certified: bool
    nondegenerate: bool
    k_strict: bool | None
    ri_member: bool | None
    zeta_realizable: tuple | None  # per basis vector of the block nullspace
    parallel_identity: bool | None
    mu_margins: tuple | None
    reasons: tuple

    def to_dict(self):
        return {
            "certified": self.certified,
            "nondegenerate": self.nondegenerate,
            "k_strict": self.k_strict,
            "ri_member": self.ri_member,
            "zeta_realizable": None if self.zeta_realizable is None else list(self.zeta_realizable),
            "parallel_identity": self.parallel_identity,
            "mu_margins": None if self.mu_margins is None else list(self.mu_margins),
            "reasons": list(self.reasons),
        }


def _zeta_realizable(md: ManifoldData, c, p) -> bool:
    """Whether the p-th nullspace basis vector is a difference of two
    nonnegative multiplier-system solutions at c (a feasibility LP)."""
    rhs = md.mu_rhs(c)
    cal_A = md.block_A()
    zeta = md.zeta_basis()[:, p]
    q = cal_A.shape[1]
    # Variables (mu_plus, mu_minus, t): maximize t subject to
    # cal_A mu_plus = rhs, cal_A mu_minus = rhs, mu_plus - mu_minus = t zeta,
    # mu_plus, mu_minus >= 0, t <= 1.
    nvar = 2 * q + 1
    E = np.zeros((2 * cal_A.shape[0] + q, nvar))
    e = np.zeros(E.shape[0])
    E[:cal_A.shape[0], :q] = cal_A
    e[:cal_A.shape[0]] = rhs
    E[cal_A.shape[0]:2 * cal_A.shape[0], q:2 * q] = cal_A
    e[cal_A.shape[0]:2 * cal_A.shape[0]] = rhs
    E[2 * cal_A.shape[0]:, :q] = np.eye(q)
    E[2 * cal_A.shape[0]:, q:2 * q] = -np.eye(q)
    E[2 * cal_A.shape[0]:, 2 * q] = -zeta
    F = np.zeros((2 * q + 1, nvar))
    F[:2 * q, :2 * q] = -np.eye(2 * q)
    F[2 * q, 2 * q] = 1.0
    f = np.zeros(2 * q + 1)
    f[2 * q] = 1.0
    obj = np.zeros(nvar)
    obj[2 * q] = -1.0
    res = solve_lp(obj, F=F, f=f, E=E, e=e)
    return bool(res.optimal and -res.objective > 1e-9)


def certify_partial_smoothness(md: ManifoldData, c, y) -> PartialSmoothnessCertificate:
    """Certificate that the function is partly smooth relative to the manifold,
    checked at (c, y): nondegeneracy plus k-strict complementarity. When
    certified, the parallel-subspace identity is verified through the
    realizability of each nullspace basis vector."""
    reasons = []
    if not md.nondegenerate:
        reasons.append("degenerate A")
        return PartialSmoothnessCertificate(False, False, None, None, None, None, None,
                                            tuple(reasons))
    try:
        report = strictness_check(md, c, y)
    except (PreconditionError, MembershipError) as err:
        reasons.append(str(err))
        return PartialSmoothnessCertificate(False, True, None, None, None, None, None,
                                            tuple(reasons))
    margins = tuple(float(v) for v in report.mu.flat)
    if not report.k_strict:
        reasons.append("k-strict complementarity fails")
        return PartialSmoothnessCertificate(False, True, False, report.ri_member,
                                            None, None, margins, tuple(reasons))
    realizable = tuple(_zeta_realizable(md, c, p) for p in range(md.ell))
    parallel = all(realizable)
    if not parallel:
        reasons.append("parallel-subspace identity failed the realizability check")
    return PartialSmoothnessCertificate(bool(parallel), True, True, report.ri_member,
                                        realizable, parallel, margins, tuple(reasons))
