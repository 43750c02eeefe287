"""First- and second-order PLQ calculus.

Directional derivatives come from the active-piece formulas; subdifferentials
are assembled as H-form polyhedra by converting each active piece's normal
cone through a double-description pass over its tangent-cone rows. Everything
is exact polyhedral arithmetic at desk scale (m up to about 10).

Extended-real results use the tagged ExtReal type; no float('inf') arithmetic.
All operations are pure functions over immutable inputs and are thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MembershipError
from .numerics import ExtReal, PLUS_INF, as_vector, freeze_array, nullspace_basis
from .plq import PLQFunction, eval_with_active
from .simplex import feasible_point, max_slack_point, solve_lp

# Uniform membership slack for polyhedral tests.
MEMB_TOL = 1e-9


# -- double description -----------------------------------------------------


def _tight_mask(P, v, tol):
    if P.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return np.abs(P @ v) <= tol


def _dedupe(rays, tol=1e-9):
    out = []
    for r in rays:
        if not any(np.linalg.norm(r - q) <= tol for q in out):
            out.append(r)
    return out


def cone_generators(B, tol=1e-10):
    """Minimal generators of the cone {v : B v <= 0}.

    Returns (rays, lineality): unit extreme rays and an orthonormal basis of
    the lineality space, so the cone is cone(rays) + span(lineality).
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    m = B.shape[1]
    L = [np.eye(m)[i] for i in range(m)]
    R: list[np.ndarray] = []
    processed = np.zeros((0, m))

    for raw in B:
        nrm = np.linalg.norm(raw)
        if nrm <= tol:
            continue
        b = raw / nrm
        dots = np.array([b @ l for l in L]) if L else np.zeros(0)
        if dots.size and np.max(np.abs(dots)) > tol:
            i_star = int(np.argmax(np.abs(dots)))
            l_star, d_star = L[i_star], dots[i_star]
            newL = []
            for i, l in enumerate(L):
                if i == i_star:
                    continue
                v = l - (dots[i] / d_star) * l_star
                nv = np.linalg.norm(v)
                if nv > tol:
                    newL.append(v / nv)
            r0 = -np.sign(d_star) * l_star
            R = [r - ((b @ r) / d_star) * l_star for r in R]
            R = [r / np.linalg.norm(r) for r in R if np.linalg.norm(r) > tol]
            R.append(r0)
            L = newL
        else:
            vals = np.array([b @ r for r in R]) if R else np.zeros(0)
            neg = [R[i] for i in range(len(R)) if vals[i] < -tol]
            zero = [R[i] for i in range(len(R)) if abs(vals[i]) <= tol]
            pos = [R[i] for i in range(len(R)) if vals[i] > tol]
            if pos:
                masks = {id(r): _tight_mask(processed, r, tol) for r in R}
                new_rays = []
                for rp in pos:
                    for rn in neg:
                        common = masks[id(rp)] & masks[id(rn)]
                        adjacent = True
                        for r3 in R:
                            if r3 is rp or r3 is rn:
                                continue
                            if np.all(common <= masks[id(r3)]):
                                adjacent = False
                                break
                        if not adjacent:
                            continue
                        w = (b @ rp) * rn - (b @ rn) * rp
                        nw = np.linalg.norm(w)
                        if nw > tol:
                            new_rays.append(w / nw)
                R = _dedupe(neg + zero + new_rays)
        processed = np.vstack([processed, b[None, :]])
    return R, L


def cone_contains(B, v, tol=MEMB_TOL) -> bool:
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] == 0:
        return True
    v = np.asarray(v, dtype=float)
    scale = 1.0 + float(np.linalg.norm(v))
    return bool(np.all(B @ v <= tol * scale))


# -- polyhedra in H-form -----------------------------------------------------


@dataclass(frozen=True)
class PolyhedronH:
    """{y : E y = e, F y <= f} with rows normalized to unit length."""

    E: np.ndarray
    e: np.ndarray
    F: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        E, e = self._normalize(self.E, self.e)
        F, f = self._normalize(self.F, self.f)
        object.__setattr__(self, "E", freeze_array(E))
        object.__setattr__(self, "e", freeze_array(e))
        object.__setattr__(self, "F", freeze_array(F))
        object.__setattr__(self, "f", freeze_array(f))

    @staticmethod
    def _normalize(M, rhs):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        rhs = np.asarray(rhs, dtype=float).reshape(-1)
        if M.size == 0:
            return M.reshape(0, M.shape[1] if M.ndim == 2 and M.shape[1] else 0), rhs[:0]
        keep_rows, keep_rhs = [], []
        for i in range(M.shape[0]):
            nrm = np.linalg.norm(M[i])
            if nrm <= 1e-14:
                if abs(rhs[i]) > 1e-12:
                    raise ValueError("zero row with nonzero right-hand side")
                continue
            keep_rows.append(M[i] / nrm)
            keep_rhs.append(rhs[i] / nrm)
        if not keep_rows:
            return np.zeros((0, M.shape[1])), np.zeros(0)
        return np.array(keep_rows), np.array(keep_rhs)

    @staticmethod
    def from_rows(dim, eq_rows=(), ineq_rows=()):
        E = np.array([r for r, _ in eq_rows]).reshape(len(eq_rows), dim) if eq_rows else np.zeros((0, dim))
        e = np.array([v for _, v in eq_rows]) if eq_rows else np.zeros(0)
        F = np.array([r for r, _ in ineq_rows]).reshape(len(ineq_rows), dim) if ineq_rows else np.zeros((0, dim))
        f = np.array([v for _, v in ineq_rows]) if ineq_rows else np.zeros(0)
        return PolyhedronH(E, e, F, f)

    @property
    def dim(self) -> int:
        if self.E.shape[1]:
            return self.E.shape[1]
        return self.F.shape[1]

    def contains(self, y, slack=MEMB_TOL) -> bool:
        y = as_vector(y, self.dim, "y")
        scale = 1.0 + float(np.linalg.norm(y))
        ok_eq = self.E.shape[0] == 0 or np.max(np.abs(self.E @ y - self.e)) <= slack * scale
        ok_in = self.F.shape[0] == 0 or np.max(self.F @ y - self.f) <= slack * scale
        return bool(ok_eq and ok_in)

    def violation(self, y) -> float:
        """Largest constraint violation at y (0 when the point is a member)."""
        y = as_vector(y, self.dim, "y")
        v = 0.0
        if self.E.shape[0]:
            v = max(v, float(np.max(np.abs(self.E @ y - self.e))))
        if self.F.shape[0]:
            v = max(v, float(np.max(self.F @ y - self.f)))
        return v

    def feasible_point(self):
        return feasible_point(F=self.F if self.F.shape[0] else None,
                              f=self.f if self.F.shape[0] else None,
                              E=self.E if self.E.shape[0] else None,
                              e=self.e if self.E.shape[0] else None,
                              dim=self.dim)

    def is_empty(self) -> bool:
        return self.feasible_point() is None

    def support(self, w):
        """(max <w,y>, argmax); (inf, None) when unbounded, (None, None) when empty."""
        res = solve_lp(-np.asarray(w, dtype=float),
                       F=self.F if self.F.shape[0] else None,
                       f=self.f if self.F.shape[0] else None,
                       E=self.E if self.E.shape[0] else None,
                       e=self.e if self.E.shape[0] else None)
        if res.status == "infeasible":
            return None, None
        if res.status == "unbounded":
            return np.inf, None
        return -res.objective, res.x

    def implicit_equality_mask(self, tol=MEMB_TOL):
        """Inequality rows that hold with equality on the whole set."""
        mask = np.zeros(self.F.shape[0], dtype=bool)
        for i in range(self.F.shape[0]):
            val, _ = self.support(-self.F[i])  # max of -F_i y  ==  -(min F_i y)
            if val is None:
                return mask  # empty set: meaningless, caller checks emptiness
            if np.isinf(val):
                continue
            min_row = -val
            if self.f[i] - min_row <= tol:
                mask[i] = True
        return mask

    def affine_hull(self):
        """Stacked equality system (A, b) describing aff(P), implicit rows included."""
        mask = self.implicit_equality_mask()
        A = np.vstack([self.E, self.F[mask]]) if self.F.shape[0] else self.E
        b = np.concatenate([self.e, self.f[mask]]) if self.F.shape[0] else self.e
        return A, b

    def parallel_basis(self):
        """Orthonormal basis (columns) of the subspace parallel to aff(P)."""
        A, _ = self.affine_hull()
        return nullspace_basis(A) if A.shape[0] else np.eye(self.dim)

    def is_singleton(self, tol=MEMB_TOL):
        """(True, point) for a zero-dimensional nonempty set, else (False, any point or None)."""
        x = self.feasible_point()
        if x is None:
            return False, None
        par = self.parallel_basis()
        if par.shape[1] == 0:
            A, b = self.affine_hull()
            pt, *_ = np.linalg.lstsq(A, b, rcond=None)
            return True, pt
        return False, x

    def ri_point(self, delta=1e-7):
        """(point, depth) with uniform slack `depth` on non-implicit rows.

        The point lies in the relative interior when depth >= delta.
        Returns (None, None) for an empty set.
        """
        mask = self.implicit_equality_mask()
        E = np.vstack([self.E, self.F[mask]]) if self.F.shape[0] else self.E
        e = np.concatenate([self.e, self.f[mask]]) if self.F.shape[0] else self.e
        Fr, fr = self.F[~mask], self.f[~mask]
        if Fr.shape[0] == 0:
            x = feasible_point(E=E if E.shape[0] else None, e=e if E.shape[0] else None, dim=self.dim) \
                if E.shape[0] else np.zeros(self.dim)
            return (x, np.inf) if x is not None else (None, None)
        x, t = max_slack_point(Fr, fr, E=E if E.shape[0] else None,
                               e=e if E.shape[0] else None, cap=1.0)
        if x is None or t < -MEMB_TOL:
            return None, None
        return x, t

    def to_dict(self):
        return {"E": self.E.tolist(), "e": self.e.tolist(),
                "F": self.F.tolist(), "f": self.f.tolist()}


@dataclass(frozen=True)
class ConePair:
    """Normal-cone generators and tangent-cone rows of one piece at one point."""

    normal_generators: np.ndarray  # columns generate N(c | C_k)
    tangent_rows: np.ndarray       # T(c | C_k) = {v : rows v <= 0}

    def tangent_generators(self):
        return cone_generators(self.tangent_rows)

    def polarity_gap(self, samples=64, rng=None) -> float:
        """max <v, w> over normal generators v and sampled tangent members w."""
        rng = np.random.default_rng(0) if rng is None else rng
        rays, lin = self.tangent_generators()
        members = list(rays)
        for l in lin:
            members.extend((l, -l))
        for _ in range(samples):
            w = np.zeros(self.tangent_rows.shape[1])
            for r in rays:
                w = w + rng.uniform(0, 1) * r
            for l in lin:
                w = w + rng.standard_normal() * l
            if np.linalg.norm(w) > 0:
                members.append(w / np.linalg.norm(w))
        gap = 0.0
        for j in range(self.normal_generators.shape[1]):
            v = self.normal_generators[:, j]
            for w in members:
                gap = max(gap, float(v @ w))
        return gap


def cone_pair(h: PLQFunction, c, k) -> ConePair:
    return ConePair(freeze_array(h.normal_generators(k, c)),
                    freeze_array(h.tangent_rows(k, c)))


# -- calculus operations ------------------------------------------------------


def _active_or_raise(h, c):
    prof = eval_with_active(h, c)
    if not prof.is_finite:
        raise DomainError("point is outside dom h")
    return prof


def dir_deriv_first(h: PLQFunction, c, w) -> ExtReal:
    """One-sided directional derivative h'(c; w); +inf outside the tangent cone of dom h."""
    prof = _active_or_raise(h, c)
    c = as_vector(c, h.m, "c")
    w = as_vector(w, h.m, "w")
    for k in prof.active_pieces:
        if cone_contains(h.tangent_rows(k, c), w):
            return ExtReal.finite(h.piece_gradient(k, c) @ w)
    return PLUS_INF


def dir_deriv_second(h: PLQFunction, c, w) -> ExtReal:
    """One-sided second directional derivative h''(c; w); nonnegative when finite."""
    prof = _active_or_raise(h, c)
    c = as_vector(c, h.m, "c")
    w = as_vector(w, h.m, "w")
    for k in prof.active_pieces:
        if cone_contains(h.tangent_rows(k, c), w):
            return ExtReal.finite(w @ (h.pieces[k].Q @ w))
    return PLUS_INF


def subdiff_hrep(h: PLQFunction, c) -> PolyhedronH:
    """H-representation of the subdifferential at c.

    Each active piece contributes {y : y - grad_k(c) in N(c | C_k)}; the
    normal cone is converted to half-spaces through the generators of its
    polar (the tangent cone).
    """
    prof = _active_or_raise(h, c)
    c = as_vector(c, h.m, "c")
    eq_rows, ineq_rows = [], []
    for k in prof.active_pieces:
        g = h.piece_gradient(k, c)
        rays, lin = cone_generators(h.tangent_rows(k, c))
        for r in rays:
            ineq_rows.append((r, float(r @ g)))
        for l in lin:
            eq_rows.append((l, float(l @ g)))
    return PolyhedronH.from_rows(h.m, eq_rows, ineq_rows)


def second_subderivative(h: PLQFunction, c, y, w) -> ExtReal:
    """Second subderivative at c for the subgradient y in direction w.

    Finite exactly when h'(c; w) = <y, w>, in which case it equals h''(c; w).
    """
    prof = _active_or_raise(h, c)
    y = as_vector(y, h.m, "y")
    w = as_vector(w, h.m, "w")
    P = subdiff_hrep(h, c)
    if not P.contains(y):
        raise MembershipError("y is not a subgradient at c")
    hp = dir_deriv_first(h, c, w)
    if hp.is_inf:
        return PLUS_INF
    if abs(hp.value - y @ w) > MEMB_TOL * (1.0 + abs(hp.value)):
        return PLUS_INF
    return dir_deriv_second(h, c, w)
