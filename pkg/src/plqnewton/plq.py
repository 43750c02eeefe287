"""Shared-hyperplane representation of convex piecewise linear-quadratic functions.

A function is described by s hyperplanes (a_j, alpha_j) and K pieces. Piece k
occupies the polyhedron {c : sign_kj * (<a_j, c> - alpha_j) <= 0 for all j}
and carries the quadratic 0.5 <c, Q_k c> + <b_k, c> + beta_k there. Every
piece takes a side of every hyperplane, so the active hyperplane set at a
point is the same for each piece containing it.

Instances are immutable after construction and all operations are pure, so
concurrent reads are safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RepresentationError
from .numerics import ExtReal, PLUS_INF, as_vector, freeze_array, nullspace_basis, dist_to_range
from .simplex import feasible_point, max_slack_point

# Active-constraint detection: |<a_j, c> - alpha_j| <= ACT_TOL * (1 + |alpha_j|).
ACT_TOL = 1e-9
# Two active pieces must agree in value to VALUE_TOL * (1 + |value|).
VALUE_TOL = 1e-8


@dataclass(frozen=True)
class Hyperplane:
    a: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "a", freeze_array(as_vector(self.a, name="a")))
        object.__setattr__(self, "alpha", float(self.alpha))
        if np.linalg.norm(self.a) == 0.0:
            raise ValueError("hyperplane normal must be nonzero")


@dataclass(frozen=True)
class Piece:
    signs: np.ndarray  # +/-1 per hyperplane
    Q: np.ndarray
    b: np.ndarray
    beta: float = 0.0

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=float).reshape(-1)
        if signs.size and not np.all(np.isin(signs, (-1.0, 1.0))):
            raise ValueError("piece signs must be +/-1")
        object.__setattr__(self, "signs", freeze_array(signs))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if Q.size and np.max(np.abs(Q - Q.T)) > 1e-14:
            raise ValueError("Q must be symmetric to 1e-14")
        object.__setattr__(self, "Q", freeze_array(0.5 * (Q + Q.T)))
        object.__setattr__(self, "b", freeze_array(as_vector(self.b, name="b")))
        object.__setattr__(self, "beta", float(self.beta))


@dataclass(frozen=True)
class ActiveProfile:
    """Value and active structure of a PLQ function at one point."""

    value: ExtReal
    active_pieces: tuple
    active_hyperplanes: dict  # piece index -> tuple of hyperplane indices
    kbar: int
    ell: int | None

    @property
    def is_finite(self) -> bool:
        return self.value.is_finite


@dataclass(frozen=True)
class PLQFunction:
    m: int
    hyperplanes: tuple
    pieces: tuple
    name: str = ""

    def __post_init__(self):
        hps = tuple(self.hyperplanes)
        pcs = tuple(self.pieces)
        object.__setattr__(self, "hyperplanes", hps)
        object.__setattr__(self, "pieces", pcs)
        if not pcs:
            raise ValueError("at least one piece is required")
        s = len(hps)
        for h in hps:
            if h.a.shape[0] != self.m:
                raise ValueError("hyperplane dimension mismatch")
        for p in pcs:
            if p.signs.shape[0] != s:
                raise ValueError(f"piece signs must have length {s}")
            if p.Q.shape[0] != self.m or p.b.shape[0] != self.m:
                raise ValueError("piece Q/b dimension mismatch")
        A = np.array([h.a for h in hps], dtype=float).reshape(s, self.m)
        alph = np.array([h.alpha for h in hps], dtype=float)
        object.__setattr__(self, "_A", freeze_array(A))
        object.__setattr__(self, "_alpha", freeze_array(alph))
        object.__setattr__(self, "_act_tol", freeze_array(ACT_TOL * (1.0 + np.abs(alph))))

    # -- basic geometry ---------------------------------------------------

    @property
    def n_hyperplanes(self) -> int:
        return len(self.hyperplanes)

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    def hyperplane_matrix(self):
        """(A, alpha): rows of A are the hyperplane normals."""
        return self._A, self._alpha

    def piece_rows(self, k):
        """H-form of piece k: rows B, rhs g with B c <= g."""
        p = self.pieces[k]
        if self.n_hyperplanes == 0:
            return np.zeros((0, self.m)), np.zeros(0)
        return p.signs[:, None] * self._A, p.signs * self._alpha

    def residuals(self, c):
        """<a_j, c> - alpha_j for every hyperplane."""
        c = as_vector(c, self.m, "c")
        if self.n_hyperplanes == 0:
            return np.zeros(0)
        return self._A @ c - self._alpha

    def piece_contains(self, k, c, slack=0.0) -> bool:
        r = self.residuals(c)
        if r.size == 0:
            return True
        p = self.pieces[k]
        return bool(np.all(p.signs * r <= self._act_tol + slack))

    def piece_value(self, k, c) -> float:
        c = as_vector(c, self.m, "c")
        p = self.pieces[k]
        return float(0.5 * c @ (p.Q @ c) + p.b @ c + p.beta)

    def piece_gradient(self, k, c) -> np.ndarray:
        c = as_vector(c, self.m, "c")
        p = self.pieces[k]
        return p.Q @ c + p.b

    def active_hyperplane_set(self, c) -> tuple:
        r = self.residuals(c)
        return tuple(int(j) for j in np.flatnonzero(np.abs(r) <= self._act_tol))

    def tangent_rows(self, k, c) -> np.ndarray:
        """Rows B with T(c | C_k) = {v : B v <= 0}, unit-normalized active gradients."""
        act = self.active_hyperplane_set(c)
        p = self.pieces[k]
        if not act:
            return np.zeros((0, self.m))
        rows = np.array([p.signs[j] * self._A[j] for j in act])
        return rows / np.linalg.norm(rows, axis=1)[:, None]

    def normal_generators(self, k, c) -> np.ndarray:
        """Columns generate N(c | C_k) as a nonnegative cone (unit-normalized)."""
        return self.tangent_rows(k, c).T


def eval_with_active(h: PLQFunction, c) -> ActiveProfile:
    """Value of h at c with the active pieces and active hyperplanes.

    Raises RepresentationError when two active pieces disagree in value
    beyond VALUE_TOL * (1 + |value|).
    """
    c = as_vector(c, h.m, "c")
    active = [k for k in range(h.n_pieces) if h.piece_contains(k, c)]
    if not active:
        return ActiveProfile(PLUS_INF, (), {}, 0, None)
    vals = [h.piece_value(k, c) for k in active]
    v0 = vals[0]
    for k, v in zip(active, vals):
        if abs(v - v0) > VALUE_TOL * (1.0 + abs(v0)):
            raise RepresentationError(
                f"active pieces {active[0]} and {k} disagree in value: {v0} vs {v}")
    act_set = h.active_hyperplane_set(c)
    hyper = {k: act_set for k in active}
    ells = {len(act_set)}
    return ActiveProfile(ExtReal.finite(v0), tuple(active), hyper, len(active),
                         ells.pop() if len(ells) == 1 else None)


def in_domain(h: PLQFunction, c) -> bool:
    return eval_with_active(h, c).is_finite


def value(h: PLQFunction, c) -> ExtReal:
    return eval_with_active(h, c).value


def finite_value(h: PLQFunction, c) -> float:
    prof = eval_with_active(h, c)
    if not prof.is_finite:
        raise DomainError("point is outside dom h")
    return prof.value.value


# -- sampling helpers (used by validation and by tests) --------------------


def piece_interior_point(h: PLQFunction, k, cap=4.0):
    """A point of maximal uniform slack inside piece k; (None, None) when empty."""
    B, g = h.piece_rows(k)
    if B.shape[0] == 0:
        return np.zeros(h.m), cap
    x, t = max_slack_point(B, g, cap=cap)
    if x is None or t < -1e-9:
        return None, None
    return x, t


def sample_point_in_piece(h: PLQFunction, k, rng, base=None, radius=8.0):
    """A random point of piece k reached by a feasible ray step from an inner point."""
    if base is None:
        base, _ = piece_interior_point(h, k)
        if base is None:
            return None
    B, g = h.piece_rows(k)
    d = rng.standard_normal(h.m)
    nrm = np.linalg.norm(d)
    if nrm == 0:
        return base
    d = d / nrm
    lo, hi = -radius, radius
    if B.shape[0]:
        r = g - B @ base
        coef = B @ d
        for i in range(B.shape[0]):
            if coef[i] > 1e-12:
                hi = min(hi, r[i] / coef[i])
            elif coef[i] < -1e-12:
                lo = max(lo, r[i] / coef[i])
    if hi < lo:
        return base
    t = rng.uniform(lo, hi) * 0.98
    return base + t * d


def sample_domain_point(h: PLQFunction, rng, radius=8.0):
    """A random point of dom h (uniform piece choice, then a ray sample)."""
    for _ in range(32):
        k = int(rng.integers(h.n_pieces))
        x = sample_point_in_piece(h, k, rng, radius=radius)
        if x is not None:
            return x
    raise DomainError("could not sample a domain point; is dom h empty?")


# -- validation -------------------------------------------------------------


@dataclass
class ValidationReport:
    piece_feasible: list = field(default_factory=list)
    continuity: list = field(default_factory=list)        # (k1, k2, max residual)
    continuity_failures: list = field(default_factory=list)
    convexity_violations: list = field(default_factory=list)
    curvature_violations: list = field(default_factory=list)
    qq_range_checks: list = field(default_factory=list)   # (active set, max distance)
    qq_range_failures: list = field(default_factory=list)
    interior_overlaps: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    all_pass: bool = True
    # Lower-dimensional domains are accepted but the kink certificate theory
    # assumes a full-dimensional domain; reports carry this flag so downstream
    # certificates can mark themselves unsupported.
    full_dimensional: bool = True

    def to_dict(self):
        return {
            "full_dimensional": bool(self.full_dimensional),
            "piece_feasible": list(map(bool, self.piece_feasible)),
            "continuity": [(int(a), int(b), float(r)) for a, b, r in self.continuity],
            "continuity_failures": [(int(a), int(b), float(r)) for a, b, r in self.continuity_failures],
            "convexity_violations": [float(v) for v in self.convexity_violations],
            "curvature_violations": [float(v) for v in self.curvature_violations],
            "qq_range_checks": [(list(map(int, s)), float(d)) for s, d in self.qq_range_checks],
            "qq_range_failures": [(list(map(int, s)), float(d)) for s, d in self.qq_range_failures],
            "interior_overlaps": [(int(a), int(b)) for a, b in self.interior_overlaps],
            "messages": list(self.messages),
            "all_pass": bool(self.all_pass),
        }


def _pair_intersection_point(h: PLQFunction, k1, k2):
    """Relative-interior point of C_k1 n C_k2, or None. Sign conflicts force equality."""
    s1, s2 = h.pieces[k1].signs, h.pieces[k2].signs
    A, alpha = h.hyperplane_matrix()
    eq_idx = [j for j in range(h.n_hyperplanes) if s1[j] != s2[j]]
    in_idx = [j for j in range(h.n_hyperplanes) if s1[j] == s2[j]]
    E = A[eq_idx] if eq_idx else None
    e = alpha[eq_idx] if eq_idx else None
    if in_idx:
        F = s1[in_idx, None] * A[in_idx]
        f = s1[in_idx] * alpha[in_idx]
    else:
        F = np.zeros((1, h.m))
        f = np.ones(1)
    x, t = max_slack_point(F, f, E=E, e=e, cap=4.0)
    if x is None or t < -1e-9:
        return None
    return x


def validate_representation(h: PLQFunction, probes: int, rng=None, strict=False) -> ValidationReport:
    """Probe-based checks of the representation invariants.

    Covers per-piece feasibility, boundary continuity between overlapping
    pieces, midpoint convexity along random segments, curvature Q >= 0 on
    piece-parallel directions, the range condition on Q differences across
    each kink candidate, and (with strict=True) an exact LP check that piece
    interiors are pairwise disjoint.
    """
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.default_rng(42) if rng is None else rng
    rep = ValidationReport()

    inner = []
    for k in range(h.n_pieces):
        x, t = piece_interior_point(h, k)
        feas = x is not None
        rep.piece_feasible.append(feas)
        inner.append((x, t if feas else None))
        if not feas:
            rep.messages.append(f"piece {k} is empty")
    rep.all_pass = all(rep.piece_feasible)
    if not any(rep.piece_feasible):
        rep.messages.append("dom h is empty")
        rep.all_pass = False
        return rep
    rep.full_dimensional = any(t is not None and t > 1e-9 for _, t in inner)
    if not rep.full_dimensional:
        rep.messages.append(
            "dom h appears lower-dimensional; kink certificates are outside the supported theory")

    # Curvature on sampled piece-parallel directions.
    n_curv = max(4, probes // 8)
    for k in range(h.n_pieces):
        if not rep.piece_feasible[k]:
            continue
        worst = 0.0
        for _ in range(n_curv):
            p1 = sample_point_in_piece(h, k, rng, base=inner[k][0])
            p2 = sample_point_in_piece(h, k, rng, base=inner[k][0])
            w = p1 - p2
            nw = np.linalg.norm(w)
            if nw < 1e-12:
                continue
            quad = float(w @ (h.pieces[k].Q @ w))
            worst = min(worst, quad / nw ** 2)
        if worst < -1e-10:
            rep.curvature_violations.append(worst)
            rep.messages.append(f"piece {k}: negative curvature {worst:g} on a parallel direction")
            rep.all_pass = False

    # Boundary continuity and kink candidates for the Q-difference range check.
    seen_active_sets = set()
    for k1 in range(h.n_pieces):
        for k2 in range(k1 + 1, h.n_pieces):
            if not (rep.piece_feasible[k1] and rep.piece_feasible[k2]):
                continue
            x = _pair_intersection_point(h, k1, k2)
            if x is None:
                continue
            worst = 0.0
            pts = [x]
            act_rows = [j for j in range(h.n_hyperplanes)
                        if abs(h.residuals(x)[j]) <= ACT_TOL * (1 + abs(h._alpha[j]))]
            A, alpha = h.hyperplane_matrix()
            tangent = nullspace_basis(A[act_rows]) if act_rows else np.eye(h.m)
            for _ in range(max(2, probes // max(1, h.n_pieces))):
                if tangent.shape[1] == 0:
                    break
                d = tangent @ rng.standard_normal(tangent.shape[1])
                nd = np.linalg.norm(d)
                if nd < 1e-12:
                    continue
                step = x + (0.5 * rng.uniform()) * d / nd
                if h.piece_contains(k1, step) and h.piece_contains(k2, step):
                    pts.append(step)
            for p in pts:
                v1, v2 = h.piece_value(k1, p), h.piece_value(k2, p)
                worst = max(worst, abs(v1 - v2) / (1.0 + abs(v1)))
            rep.continuity.append((k1, k2, worst))
            if worst > VALUE_TOL:
                rep.continuity_failures.append((k1, k2, worst))
                rep.messages.append(f"pieces {k1},{k2}: boundary value mismatch {worst:g}")
                rep.all_pass = False

            # Q-difference range condition at this kink candidate.
            prof_sets = tuple(sorted(k for k in range(h.n_pieces) if h.piece_contains(k, x)))
            if len(prof_sets) >= 2 and prof_sets not in seen_active_sets and act_rows:
                seen_active_sets.add(prof_sets)
                Amat = A[act_rows].T  # columns are active normals
                W = nullspace_basis(Amat.T)
                worst_d = 0.0
                for i in prof_sets:
                    for j in prof_sets:
                        if i >= j:
                            continue
                        dQ = h.pieces[i].Q - h.pieces[j].Q
                        scale = 1.0 + max(np.max(np.abs(h.pieces[i].Q)), np.max(np.abs(h.pieces[j].Q)))
                        for p in range(W.shape[1]):
                            worst_d = max(worst_d, dist_to_range(dQ @ W[:, p], Amat) / scale)
                rep.qq_range_checks.append((prof_sets, worst_d))
                if worst_d > 1e-9:
                    rep.qq_range_failures.append((prof_sets, worst_d))
                    rep.messages.append(
                        f"pieces {prof_sets}: quadratic-difference range condition fails ({worst_d:g})")
                    rep.all_pass = False

    # Midpoint convexity along random segments of dom h.
    worst_conv = 0.0
    for _ in range(probes):
        try:
            c1 = sample_domain_point(h, rng)
            c2 = sample_domain_point(h, rng)
        except DomainError:
            break
        mid = 0.5 * (c1 + c2)
        pm = eval_with_active(h, mid)
        if not pm.is_finite:
            rep.convexity_violations.append(np.inf)
            rep.messages.append("midpoint of two domain points left dom h (domain not convex)")
            rep.all_pass = False
            continue
        lhs = pm.value.value
        rhs = 0.5 * (finite_value(h, c1) + finite_value(h, c2))
        gap = lhs - rhs
        worst_conv = max(worst_conv, gap)
        if gap > VALUE_TOL * (1.0 + abs(rhs)):
            rep.convexity_violations.append(gap)
            rep.all_pass = False
    if rep.convexity_violations and all(np.isfinite(rep.convexity_violations)):
        rep.messages.append(f"midpoint convexity violated, worst gap {max(rep.convexity_violations):g}")

    # Interior disjointness.
    for k1 in range(h.n_pieces):
        if not rep.piece_feasible[k1] or inner[k1][1] is None or inner[k1][1] <= 1e-9:
            continue
        for k2 in range(h.n_pieces):
            if k1 == k2 or not rep.piece_feasible[k2]:
                continue
            if strict:
                if k2 < k1:
                    continue
                B1, g1 = h.piece_rows(k1)
                B2, g2 = h.piece_rows(k2)
                x = feasible_point(F=np.vstack([B1, B2]),
                                   f=np.concatenate([g1, g2]) - 1e-7,
                                   dim=h.m)
                overlap = x is not None
            else:
                x = inner[k1][0]
                B2, g2 = h.piece_rows(k2)
                overlap = bool(np.all(B2 @ x <= g2 - 1e-9)) if B2.shape[0] else True
            if overlap:
                pair = (min(k1, k2), max(k1, k2))
                if pair not in rep.interior_overlaps:
                    rep.interior_overlaps.append(pair)
                    rep.messages.append(f"pieces {pair}: interiors overlap")
                    rep.all_pass = False
    return rep
