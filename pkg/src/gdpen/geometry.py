"""Finite descriptions of closed convex sets and linear subspaces.

Sets are symbolic: a handful of variants with closed-form support functions,
gauges and exposed faces, plus linear images and Minkowski sums of them.
Anything without a closed form goes through a common "lifted" description

    C = { T_1 a_1 + ... + T_k a_k : a_j in K_j },

where every K_j is a primitive with a cheap projection (unit box, product of
unit Euclidean balls, probability simplex, or a free subspace).  Polyhedral
sets are handled by linear programming on that description; the rest by
bisection on the scale with an alternating-projection membership test.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DimensionError,
    InvalidSetError,
    NotPSDWarning,
    UnsupportedError,
)

# relative threshold for "this component is zero" when testing span membership
SPAN_TOL = 1e-9
MEMBERSHIP_TOL = 1e-9
MEMBERSHIP_MAX_ITER = 10_000

_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def _as_vector(x, dim, what="vector"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise DimensionError(dim, x.shape[0] if x.ndim == 1 else x.shape, what)
    return x


# ---------------------------------------------------------------------------
# Subspaces
# ---------------------------------------------------------------------------


def _coordinate_pattern(basis):
    """Return the coordinates spanned by `basis` if it spans a coordinate subspace.

    For an orthogonal projector P, a diagonal entry equal to one forces the
    rest of that row to vanish, so the diagonal alone decides the question.
    """
    p, k = basis.shape
    if k == 0:
        return ()
    d = np.einsum("ij,ij->i", basis, basis)
    on = np.abs(d - 1.0) < 1e-12
    off = d < 1e-24
    if not np.all(on | off):
        return None
    if np.max(np.abs(basis[off]), initial=0.0) > 1e-12:
        return None
    return tuple(int(i) for i in np.flatnonzero(on))


class Subspace:
    """A linear subspace of R^p stored through a column-orthonormal basis.

    Coordinate subspaces are always stored with an exact identity-column
    basis, so projections onto them introduce no rounding.
    """

    def __init__(self, basis, *, check=True):
        basis = np.array(basis, dtype=float, copy=True)
        if basis.ndim != 2:
            raise ValueError("basis must be a 2-d array (p x k)")
        if check and basis.shape[1] > 0:
            gram = basis.T @ basis
            if np.max(np.abs(gram - np.eye(basis.shape[1]))) > 1e-12:
                raise ValueError("basis columns must be orthonormal")
        coords = _coordinate_pattern(basis) if basis.shape[1] else ()
        if coords is not None and basis.shape[1]:
            basis = np.eye(basis.shape[0])[:, list(coords)]
        basis.setflags(write=False)
        self.basis = basis
        self._coords = coords

    @classmethod
    def span(cls, vectors, tol=1e-10):
        """Orthonormal basis for the span of the columns of `vectors`."""
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        p = V.shape[0]
        if V.shape[1] == 0 or not np.any(V):
            return cls.zero(p)
        U, s, _ = np.linalg.svd(V, full_matrices=False)
        r = int(np.sum(s > tol * s[0]))
        return cls(U[:, :r], check=False)

    @classmethod
    def full(cls, p):
        return cls(np.eye(p), check=False)

    @classmethod
    def zero(cls, p):
        return cls(np.zeros((p, 0)), check=False)

    @classmethod
    def coordinates(cls, p, coords):
        coords = sorted(set(int(i) for i in coords))
        if coords and (coords[0] < 0 or coords[-1] >= p):
            raise ValueError(f"coordinates out of range for dimension {p}")
        return cls(np.eye(p)[:, coords], check=False)

    @property
    def ambient(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def coords(self):
        """Coordinates spanned, or None when this is not a coordinate subspace."""
        return self._coords

    @cached_property
    def projector(self):
        P = self.basis @ self.basis.T
        P.setflags(write=False)
        return P

    def project(self, x):
        x = _as_vector(x, self.ambient)
        if self._coords is not None:
            out = np.zeros_like(x)
            idx = list(self._coords)
            out[idx] = x[idx]
            return out
        return self.basis @ (self.basis.T @ x)

    def contains(self, x, tol=SPAN_TOL):
        x = _as_vector(x, self.ambient)
        r = x - self.project(x)
        return np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(x))

    def complement(self):
        p = self.ambient
        if self._coords is not None:
            return Subspace.coordinates(p, sorted(set(range(p)) - set(self._coords)))
        if self.dim == 0:
            return Subspace.full(p)
        U, _, _ = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(U[:, self.dim:], check=False)

    def __repr__(self):
        if self._coords is not None:
            return f"Subspace(ambient={self.ambient}, coords={list(self._coords)})"
        return f"Subspace(ambient={self.ambient}, dim={self.dim})"


def subspace_intersect(U: Subspace, W: Subspace) -> Subspace:
    """Orthonormal basis of the intersection of two subspaces."""
    if U.ambient != W.ambient:
        raise DimensionError(U.ambient, W.ambient, "subspace ambient")
    p = U.ambient
    if U.dim == p:
        return W
    if W.dim == p:
        return U
    if U.dim == 0 or W.dim == 0:
        return Subspace.zero(p)
    if U.coords is not None and W.coords is not None:
        return Subspace.coordinates(p, set(U.coords) & set(W.coords))
    stacked = np.vstack([np.eye(p) - U.projector, np.eye(p) - W.projector])
    _, s, Vt = np.linalg.svd(stacked)
    smax = s[0] if s.size else 0.0
    null = s <= 1e-10 * smax
    # rows of Vt past len(s) (none here since stacked is 2p x p) would also be null
    basis = Vt[null].T
    if basis.shape[1] == 0:
        return Subspace.zero(p)
    q, _ = np.linalg.qr(basis)
    return Subspace(q, check=False)


def project(U: Subspace, x):
    """Orthogonal projection of `x` onto `U`."""
    return U.project(x)


class RestrictedInverse:
    """The pseudoinverse of P_M Q P_M, applied in the coordinates of a basis of M.

    Eigenvalues of basis^T Q basis below ``tol * lambda_max`` are treated as
    zero.  ``not_psd`` records a negative eigenvalue below ``-tol * lambda_max``.
    """

    def __init__(self, Q, M: Subspace, tol=1e-10):
        Q = np.asarray(Q, dtype=float)
        p = M.ambient
        if Q.shape != (p, p):
            raise DimensionError((p, p), Q.shape, "matrix")
        scale = max(1.0, np.max(np.abs(Q))) if Q.size else 1.0
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-10 * scale:
            raise ValueError("Q must be symmetric")
        self.M = M
        B = M.basis
        G = B.T @ Q @ B
        G = 0.5 * (G + G.T)
        evals, evecs = np.linalg.eigh(G) if G.size else (np.zeros(0), np.zeros((0, 0)))
        lam_max = np.max(np.abs(evals)) if evals.size else 0.0
        cutoff = tol * lam_max
        keep = evals > cutoff
        self.eigenvalues = evals
        self.rank = int(np.sum(keep))
        self.not_psd = bool(np.any(evals < -cutoff))
        V = evecs[:, keep]
        self.inverse_in_basis = (V / evals[keep]) @ V.T

    @property
    def deficient(self):
        return self.rank < self.M.dim

    @property
    def matrix(self):
        B = self.M.basis
        return B @ self.inverse_in_basis @ B.T

    def apply(self, x):
        B = self.M.basis
        return B @ (self.inverse_in_basis @ (B.T @ x))


def restricted_pinv_apply(Q, M: Subspace, x, tol=1e-10):
    """Apply (P_M Q P_M)^+ to `x`; the result lies in M.

    Emits :class:`NotPSDWarning` when Q has a negative eigenvalue on M.
    """
    x = _as_vector(x, M.ambient)
    R = RestrictedInverse(Q, M, tol)
    if R.not_psd:
        warnings.warn("Q is not positive semidefinite on M", NotPSDWarning, stacklevel=2)
    return R.apply(x)


# ---------------------------------------------------------------------------
# Set variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoordBox:
    """Unit l-infinity ball on ``coords``; every other coordinate is zero."""

    dim: int
    coords: tuple = ()

    def __post_init__(self):
        coords = tuple(sorted(set(int(i) for i in self.coords)))
        if coords and (coords[0] < 0 or coords[-1] >= self.dim):
            raise ValueError("CoordBox coordinates outside the index universe")
        object.__setattr__(self, "coords", coords)


@dataclass(frozen=True)
class GroupBall:
    """Product of unit Euclidean balls over the ``active`` groups.

    ``groups`` must partition ``range(dim)``; coordinates of inactive groups
    are zero.
    """

    groups: tuple
    active: tuple = ()
    dim: int = field(init=False)

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        flat = [i for g in groups for i in g]
        dim = len(flat)
        if sorted(flat) != list(range(dim)):
            raise ValueError("GroupBall groups must partition range(dim)")
        active = tuple(sorted(set(int(a) for a in self.active)))
        if active and (active[0] < 0 or active[-1] >= len(groups)):
            raise ValueError("active group index out of range")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "dim", dim)


@dataclass(frozen=True, eq=False)
class AtomPolytope:
    """Convex hull of the rows of ``atoms``."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float, ndmin=2)
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise ValueError("AtomPolytope needs at least one atom")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def dim(self):
        return self.atoms.shape[1]


@dataclass(frozen=True, eq=False)
class LinearImage:
    """The set ``{matrix @ y : y in base}``; for analysis penalties matrix = D^T."""

    matrix: np.ndarray
    base: "ConvexSetRep"

    def __post_init__(self):
        L = np.array(self.matrix, dtype=float, ndmin=2)
        if L.shape[1] != self.base.dim:
            raise DimensionError(self.base.dim, L.shape[1], "LinearImage matrix columns")
        L.setflags(write=False)
        object.__setattr__(self, "matrix", L)

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class MinkowskiSum:
    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("MinkowskiSum needs at least one part")
        dims = {c.dim for c in parts}
        if len(dims) != 1:
            raise DimensionError(parts[0].dim, sorted(dims), "MinkowskiSum part")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self):
        return self.parts[0].dim


@dataclass(frozen=True, eq=False)
class SubspaceSet:
    """A linear subspace viewed as an (unbounded) convex set."""

    subspace: Subspace

    @property
    def dim(self):
        return self.subspace.ambient


ConvexSetRep = Union[CoordBox, GroupBall, AtomPolytope, LinearImage, MinkowskiSum, SubspaceSet]


def is_bounded(C) -> bool:
    if isinstance(C, SubspaceSet):
        return C.subspace.dim == 0
    if isinstance(C, LinearImage):
        return is_bounded(C.base)
    if isinstance(C, MinkowskiSum):
        return all(is_bounded(c) for c in C.parts)
    return True


# ---------------------------------------------------------------------------
# Support function, faces, points
# ---------------------------------------------------------------------------


def _group_norms(x, groups, which):
    return np.array([np.linalg.norm(x[list(groups[g])]) for g in which])


def support_value(C: ConvexSetRep, x) -> float:
    """sup { y^T x : y in C }; ``inf`` when the supremum is unbounded."""
    x = _as_vector(x, C.dim)
    if isinstance(C, CoordBox):
        return float(np.abs(x[list(C.coords)]).sum())
    if isinstance(C, GroupBall):
        return float(_group_norms(x, C.groups, C.active).sum())
    if isinstance(C, AtomPolytope):
        return float(np.max(C.atoms @ x))
    if isinstance(C, LinearImage):
        return support_value(C.base, C.matrix.T @ x)
    if isinstance(C, MinkowskiSum):
        return float(sum(support_value(c, x) for c in C.parts))
    if isinstance(C, SubspaceSet):
        S = C.subspace
        if S.dim == 0:
            return 0.0
        r = np.linalg.norm(S.basis.T @ x)
        return 0.0 if r <= SPAN_TOL * max(1.0, np.linalg.norm(x)) else float("inf")
    raise UnsupportedError(f"unknown set variant {type(C).__name__}")


def _point_plus(point, rest):
    pt = AtomPolytope(point[None, :])
    if rest is None:
        return pt
    if not np.any(point):
        return rest
    return MinkowskiSum((pt, rest))


def support_face(C: ConvexSetRep, x, tol=1e-12) -> ConvexSetRep:
    """The exposed face { y in C : y^T x = h_C(x) } as a new set description.

    Components of ``x`` (or group norms) below ``tol * max|x|`` count as zero.
    """
    x = _as_vector(x, C.dim)
    scale = np.max(np.abs(x)) if x.size else 0.0
    thr = tol * scale
    if isinstance(C, CoordBox):
        point = np.zeros(C.dim)
        free = []
        for i in C.coords:
            if abs(x[i]) > thr:
                point[i] = np.sign(x[i])
            else:
                free.append(i)
        rest = CoordBox(C.dim, free) if free else None
        return _point_plus(point, rest) if (rest is None or np.any(point)) else rest
    if isinstance(C, GroupBall):
        point = np.zeros(C.dim)
        free = []
        for g in C.active:
            idx = list(C.groups[g])
            nrm = np.linalg.norm(x[idx])
            if nrm > thr and nrm > 0:
                point[idx] = x[idx] / nrm
            else:
                free.append(g)
        rest = GroupBall(C.groups, free) if free else None
        return _point_plus(point, rest) if (rest is None or np.any(point)) else rest
    if isinstance(C, AtomPolytope):
        vals = C.atoms @ x
        top = np.max(vals)
        keep = vals >= top - tol * max(1.0, abs(top))
        return AtomPolytope(C.atoms[keep])
    if isinstance(C, LinearImage):
        return LinearImage(C.matrix, support_face(C.base, C.matrix.T @ x, tol))
    if isinstance(C, MinkowskiSum):
        return MinkowskiSum(tuple(support_face(c, x, tol) for c in C.parts))
    raise UnsupportedError(f"support_face needs a bounded set, got {type(C).__name__}")


def support_point(C: ConvexSetRep, x) -> np.ndarray:
    """One maximizer of y^T x over C (a subgradient of h_C at x)."""
    x = _as_vector(x, C.dim)
    if isinstance(C, CoordBox):
        y = np.zeros(C.dim)
        idx = list(C.coords)
        y[idx] = np.sign(x[idx])
        return y
    if isinstance(C, GroupBall):
        y = np.zeros(C.dim)
        for g in C.active:
            idx = list(C.groups[g])
            nrm = np.linalg.norm(x[idx])
            if nrm > 0:
                y[idx] = x[idx] / nrm
        return y
    if isinstance(C, AtomPolytope):
        return C.atoms[int(np.argmax(C.atoms @ x))].copy()
    if isinstance(C, LinearImage):
        return C.matrix @ support_point(C.base, C.matrix.T @ x)
    if isinstance(C, MinkowskiSum):
        return sum(support_point(c, x) for c in C.parts)
    raise UnsupportedError(f"support_point needs a bounded set, got {type(C).__name__}")


def singleton_point(C: ConvexSetRep):
    """The unique element of C if C is a single point, else None."""
    if isinstance(C, AtomPolytope):
        if np.max(np.abs(C.atoms - C.atoms[0])) <= 1e-12:
            return C.atoms[0].copy()
        return None
    if isinstance(C, CoordBox):
        return np.zeros(C.dim) if not C.coords else None
    if isinstance(C, GroupBall):
        return np.zeros(C.dim) if not C.active else None
    if isinstance(C, LinearImage):
        pt = singleton_point(C.base)
        if pt is not None:
            return C.matrix @ pt
        return np.zeros(C.dim) if not np.any(C.matrix) else None
    if isinstance(C, MinkowskiSum):
        pts = [singleton_point(c) for c in C.parts]
        return None if any(p is None for p in pts) else sum(pts)
    if isinstance(C, SubspaceSet):
        return np.zeros(C.dim) if C.subspace.dim == 0 else None
    return None


# ---------------------------------------------------------------------------
# Lifted description
# ---------------------------------------------------------------------------


@dataclass
class _Piece:
    kind: str  # "box" | "ball" | "simplex" | "free"
    T: np.ndarray  # dim x d
    groups: list = None  # for "ball": index arrays into the piece's variables

    @property
    def size(self):
        return self.T.shape[1]


def _pieces(C) -> list:
    if isinstance(C, CoordBox):
        if not C.coords:
            return []
        return [_Piece("box", np.eye(C.dim)[:, list(C.coords)])]
    if isinstance(C, GroupBall):
        if not C.active:
            return []
        cols, groups, start = [], [], 0
        for g in C.active:
            idx = list(C.groups[g])
            cols.extend(idx)
            groups.append(np.arange(start, start + len(idx)))
            start += len(idx)
        return [_Piece("ball", np.eye(C.dim)[:, cols], groups)]
    if isinstance(C, AtomPolytope):
        return [_Piece("simplex", C.atoms.T.copy())]
    if isinstance(C, LinearImage):
        return [_Piece(p.kind, C.matrix @ p.T, p.groups) for p in _pieces(C.base)]
    if isinstance(C, MinkowskiSum):
        return [p for c in C.parts for p in _pieces(c)]
    if isinstance(C, SubspaceSet):
        if C.subspace.dim == 0:
            return []
        return [_Piece("free", C.subspace.basis.copy())]
    raise UnsupportedError(f"unknown set variant {type(C).__name__}")


def _proj_simplex(v, t):
    if t <= 0:
        return np.zeros_like(v)
    if v.size == 1:
        return np.array([t])
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - t
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


class _Lifted:
    """A set (optionally plus a free subspace) in lifted form, for generic numerics."""

    def __init__(self, pieces, dim):
        self.pieces = pieces
        self.dim = dim
        if pieces:
            self.T = np.hstack([p.T for p in pieces])
        else:
            self.T = np.zeros((dim, 0))
        self.slices = []
        start = 0
        for p in pieces:
            self.slices.append(slice(start, start + p.size))
            start += p.size

    @cached_property
    def T_pinv(self):
        return np.linalg.pinv(self.T, rcond=1e-12) if self.T.size else np.zeros((0, self.dim))

    @property
    def polyhedral(self):
        return all(p.kind in ("box", "simplex", "free") for p in self.pieces)

    def project(self, a, t):
        out = np.empty_like(a)
        for p, sl in zip(self.pieces, self.slices):
            v = a[sl]
            if p.kind == "box":
                out[sl] = np.clip(v, -t, t)
            elif p.kind == "ball":
                w = v.copy()
                for g in p.groups:
                    nrm = np.linalg.norm(w[g])
                    if nrm > t:
                        w[g] *= t / nrm
                out[sl] = w
            elif p.kind == "simplex":
                out[sl] = _proj_simplex(v, t)
            else:
                out[sl] = v
        return out

    def in_range(self, y):
        if not self.T.size:
            return np.linalg.norm(y) <= SPAN_TOL * max(1.0, np.linalg.norm(y)) or not np.any(y)
        r = self.T @ (self.T_pinv @ y) - y
        return np.linalg.norm(r) <= SPAN_TOL * max(1.0, np.linalg.norm(y))

    def membership(self, y, t, tol=MEMBERSHIP_TOL, max_iter=MEMBERSHIP_MAX_ITER, start=None):
        """Alternating projections between t*K and {a : T a = y}.

        Returns (status, a, residual) with status in {"member", "outside", "unknown"}.
        """
        if not self.T.size:
            res = np.linalg.norm(y)
            return ("member" if res <= tol else "outside"), np.zeros(0), res
        atol = tol * max(1.0, np.linalg.norm(y))
        if not self.in_range(y):
            return "outside", None, np.inf
        v = self.T_pinv @ y if start is None else start
        prev = np.inf
        stall = 0
        a = v
        for _ in range(max_iter):
            a = self.project(v, t)
            r = self.T @ a - y
            res = np.linalg.norm(r)
            if res <= atol:
                return "member", a, res
            if prev - res <= 1e-13 * prev:
                stall += 1
                if stall >= 25:
                    return "outside", a, res
            else:
                stall = 0
            prev = res
            v = a - self.T_pinv @ r
        return "unknown", a, prev

    # -- linear programming (polyhedral pieces only) --

    def _lp_blocks(self, scaled):
        """Bounds/equalities for variables (a, t) shared by gauge and membership LPs."""
        n = self.T.shape[1]
        bounds = []
        A_ub, A_eq_extra, b_eq_extra = [], [], []
        for p, sl in zip(self.pieces, self.slices):
            for j in range(sl.start, sl.stop):
                if p.kind == "box":
                    if scaled:
                        bounds.append((None, None))
                        row = np.zeros(n + 1)
                        row[j], row[n] = 1.0, -1.0
                        A_ub.append(row)
                        row = np.zeros(n + 1)
                        row[j], row[n] = -1.0, -1.0
                        A_ub.append(row)
                    else:
                        bounds.append((-1.0, 1.0))
                elif p.kind == "simplex":
                    bounds.append((0.0, None))
                else:
                    bounds.append((None, None))
            if p.kind == "simplex":
                row = np.zeros(n + 1)
                row[sl] = 1.0
                if scaled:
                    row[n] = -1.0
                    A_eq_extra.append(row)
                    b_eq_extra.append(0.0)
                else:
                    A_eq_extra.append(row)
                    b_eq_extra.append(1.0)
        return bounds, A_ub, A_eq_extra, b_eq_extra

    def lp_gauge(self, y):
        """min t s.t. y in t*K (free pieces unscaled); returns (t, a) or (inf, None)."""
        n = self.T.shape[1]
        bounds, A_ub, A_eq_x, b_eq_x = self._lp_blocks(scaled=True)
        bounds.append((0.0, None))
        A_eq = np.hstack([self.T, np.zeros((self.dim, 1))])
        b_eq = y
        if A_eq_x:
            A_eq = np.vstack([A_eq, np.array(A_eq_x)])
            b_eq = np.concatenate([y, b_eq_x])
        c = np.zeros(n + 1)
        c[n] = 1.0
        res = linprog(
            c,
            A_ub=np.array(A_ub) if A_ub else None,
            b_ub=np.zeros(len(A_ub)) if A_ub else None,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=bounds,
            method="highs",
            options=_LP_OPTIONS,
        )
        if res.status == 2:
            return float("inf"), None
        if res.status != 0:
            raise RuntimeError(f"LP solver failed: {res.message}")
        return float(res.x[n]), res.x[:n]

    def lp_member(self, y):
        n = self.T.shape[1]
        bounds, _, A_eq_x, b_eq_x = self._lp_blocks(scaled=False)
        A_eq = self.T
        b_eq = y
        if A_eq_x:
            A_eq = np.vstack([A_eq, np.array(A_eq_x)[:, :n]])
            b_eq = np.concatenate([y, b_eq_x])
        res = linprog(
            np.zeros(n), A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs", options=_LP_OPTIONS
        )
        return res.status == 0


def lifted(C: ConvexSetRep, extra_free: Subspace | None = None) -> _Lifted:
    pieces = _pieces(C)
    if extra_free is not None and extra_free.dim:
        pieces = pieces + [_Piece("free", extra_free.basis.copy())]
    return _Lifted(pieces, C.dim)


@dataclass
class GaugeResult:
    """Outcome of a generic gauge computation.

    ``value`` is the smallest scale at which membership was certified; ``lower``
    is the largest scale at which non-membership was established.  ``point`` is
    the lifted variable vector realizing membership at ``value``.
    """

    value: float
    lower: float
    upper: float
    point: np.ndarray | None
    determinate: bool
    method: str


def lifted_gauge(L: _Lifted, y, method="auto", rel_tol=1e-12) -> GaugeResult:
    """inf { t >= 0 : y in t*K + (free pieces) } for a lifted description."""
    if method == "auto" and L.polyhedral:
        t, a = L.lp_gauge(y)
        return GaugeResult(t, t, t, a, True, "lp")
    if not L.in_range(y):
        return GaugeResult(float("inf"), float("inf"), float("inf"), None, True, "range")
    status, a, _ = L.membership(y, 0.0)
    if status == "member":
        return GaugeResult(0.0, 0.0, 0.0, a, True, "bisection")
    hi, a_hi = 1.0, None
    for _ in range(80):
        status, a, _ = L.membership(y, hi)
        if status == "member":
            a_hi = a
            break
        hi *= 2.0
    if a_hi is None:
        return GaugeResult(float("inf"), hi, float("inf"), None, False, "bisection")
    lo, reliable_lo = 0.0, 0.0
    while hi - lo > rel_tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        status, a, _ = L.membership(y, mid, start=None)
        if status == "member":
            hi, a_hi = mid, a
        else:
            lo = mid
            if status == "outside":
                reliable_lo = mid
    determinate = hi - reliable_lo <= 1e-7 * max(1.0, hi)
    return GaugeResult(hi, reliable_lo, hi, a_hi, determinate, "bisection")


def origin_in_relint(C: ConvexSetRep) -> bool:
    if isinstance(C, (CoordBox, GroupBall, SubspaceSet)):
        return True
    if isinstance(C, LinearImage):
        return origin_in_relint(C.base)
    if isinstance(C, MinkowskiSum):
        return all(origin_in_relint(c) for c in C.parts)
    if isinstance(C, AtomPolytope):
        span = span_of(C)
        L = lifted(C)
        for b in span.basis.T:
            for s in (1.0, -1.0):
                t, _ = L.lp_gauge(s * b)
                if not np.isfinite(t):
                    return False
        return contains(C, np.zeros(C.dim))
    return False


def gauge_value(C: ConvexSetRep, z, method="auto") -> float:
    """inf { t >= 0 : z in t*C }; ``inf`` when z is outside the cone of C.

    ``method="bisection"`` forces the generic bisection/alternating-projection
    path even where a closed form exists.
    """
    z = _as_vector(z, C.dim)
    if method == "auto":
        closed = _gauge_closed(C, z)
        if closed is not None:
            return closed
    if not contains(C, np.zeros(C.dim)):
        raise InvalidSetError("gauge requires a set containing the origin")
    res = lifted_gauge(lifted(C), z, method=method)
    return res.value


def _gauge_closed(C, z):
    scale = max(1.0, np.max(np.abs(z))) if z.size else 1.0
    if isinstance(C, CoordBox):
        off = z.copy()
        off[list(C.coords)] = 0.0
        if np.max(np.abs(off), initial=0.0) > SPAN_TOL * scale:
            return float("inf")
        return float(np.max(np.abs(z[list(C.coords)]), initial=0.0))
    if isinstance(C, GroupBall):
        off = z.copy()
        for g in C.active:
            off[list(C.groups[g])] = 0.0
        if np.max(np.abs(off), initial=0.0) > SPAN_TOL * scale:
            return float("inf")
        return float(np.max(_group_norms(z, C.groups, C.active), initial=0.0))
    if isinstance(C, SubspaceSet):
        return 0.0 if C.subspace.contains(z) else float("inf")
    if isinstance(C, AtomPolytope):
        if not contains(C, np.zeros(C.dim)):
            raise InvalidSetError("gauge requires a set containing the origin")
        t, _ = lifted(C).lp_gauge(z)
        return t
    return None


def contains(C: ConvexSetRep, y, tol=MEMBERSHIP_TOL) -> bool:
    """Membership test, exact for closed-form and polyhedral variants."""
    y = _as_vector(y, C.dim)
    scale = max(1.0, np.max(np.abs(y))) if y.size else 1.0
    if isinstance(C, CoordBox):
        off = y.copy()
        off[list(C.coords)] = 0.0
        return bool(
            np.max(np.abs(off), initial=0.0) <= tol * scale
            and np.max(np.abs(y[list(C.coords)]), initial=0.0) <= 1.0 + tol
        )
    if isinstance(C, GroupBall):
        g = _gauge_closed(C, y)
        return g <= 1.0 + tol
    if isinstance(C, SubspaceSet):
        return C.subspace.contains(y, tol)
    L = lifted(C)
    if L.polyhedral:
        return L.lp_member(y)
    status, _, _ = L.membership(y, 1.0, tol=tol)
    return status == "member"


def span_of(C: ConvexSetRep) -> Subspace:
    pieces = _pieces(C)
    if not pieces:
        return Subspace.zero(C.dim)
    return Subspace.span(np.hstack([p.T for p in pieces]))


def atoms_of(C: ConvexSetRep, limit=1 << 14):
    """Candidate extreme points (rows) of a polytope, or None if unavailable.

    Returns None for non-polyhedral or unbounded sets and when enumeration
    would exceed ``limit`` points.
    """
    pieces = _pieces(C)
    pts = [np.zeros(C.dim)]
    for p in pieces:
        if p.kind == "box":
            if 2 ** p.size > limit:
                return None
            signs = np.array(list(itertools.product((-1.0, 1.0), repeat=p.size)))
            cand = signs @ p.T.T
        elif p.kind == "simplex":
            cand = p.T.T
        else:
            return None
        if len(pts) * len(cand) > limit:
            return None
        pts = [a + b for a in pts for b in cand]
    arr = np.array(pts)
    return np.unique(np.round(arr, 14), axis=0) if len(arr) > 1 else arr


def sample(C: ConvexSetRep, rng, size):
    """Random points of C (not uniformly distributed), shape (size, dim)."""
    pieces = _pieces(C)
    out = np.zeros((size, C.dim))
    for p in pieces:
        if p.kind == "box":
            a = rng.uniform(-1, 1, (size, p.size))
            # push some mass onto the boundary
            mask = rng.random((size, p.size)) < 0.3
            a[mask] = np.sign(a[mask])
        elif p.kind == "ball":
            a = rng.standard_normal((size, p.size))
            for g in p.groups:
                nrm = np.linalg.norm(a[:, g], axis=1, keepdims=True)
                nrm[nrm == 0] = 1.0
                r = rng.uniform(0, 1, (size, 1)) ** (1.0 / len(g))
                r[rng.random((size, 1)) < 0.3] = 1.0
                a[:, g] *= r / nrm
        elif p.kind == "simplex":
            a = rng.dirichlet(np.ones(p.size), size)
        else:
            a = rng.standard_normal((size, p.size))
        out += a @ p.T.T
    return out
