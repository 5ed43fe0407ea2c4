"""Geometrically decomposable penalties  rho = h_A + h_I + h_{S-perp}.

A penalty keeps its three pieces as set descriptions together with enough
bookkeeping (which coordinates or groups are penalized, which are active) to
dispatch to closed forms.  The model subspace M = span(I)-perp intersected
with S is computed once at construction.

Indices are zero-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, partial
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    InvalidSetError,
    OverlappingGroupsError,
    UnsupportedError,
)
from .geometry import (
    CoordBox,
    GroupBall,
    LinearImage,
    MinkowskiSum,
    Subspace,
    _as_vector,
    is_bounded,
    origin_in_relint,
    span_of,
    subspace_intersect,
    support_value,
)


class Separable:
    """l1 over some coordinates plus l2 over some disjoint groups.

    This is h_A + h_I for the lasso and group-lasso families when S is the
    whole space; it has an exact proximal map.
    """

    def __init__(self, p, l1=(), groups=()):
        self.p = int(p)
        self.l1 = np.asarray(sorted(l1), dtype=int)
        self.groups = [np.asarray(g, dtype=int) for g in groups]
        # groups bucketed by size so norms and shrinkage are vectorized
        buckets = {}
        for g in self.groups:
            buckets.setdefault(g.size, []).append(g)
        self._buckets = [np.vstack(b) for b in buckets.values()]

    def value(self, theta):
        v = float(np.abs(theta[self.l1]).sum()) if self.l1.size else 0.0
        for G in self._buckets:
            v += float(np.sqrt(np.sum(theta[G] ** 2, axis=1)).sum())
        return v

    def prox(self, v, t):
        out = np.array(v, dtype=float, copy=True)
        if t <= 0:
            return out
        if self.l1.size:
            x = out[self.l1]
            out[self.l1] = np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
        for G in self._buckets:
            x = out[G]
            nrm = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
            scale = np.where(nrm > t, 1.0 - t / np.where(nrm > 0, nrm, 1.0), 0.0)
            out[G] = x * scale
        return out

    def shifted(self, offset, p):
        return Separable(p, self.l1 + offset, [g + offset for g in self.groups])

    @staticmethod
    def concat(parts, p):
        l1, groups, off = [], [], 0
        for s in parts:
            l1.extend((s.l1 + off).tolist())
            groups.extend(g + off for g in s.groups)
            off += s.p
        return Separable(p, l1, groups)


@dataclass(eq=False)
class Penalty:
    """rho(theta) = h_A(theta) + h_I(theta) + h_{S-perp}(theta).

    Attributes
    ----------
    A, I : set descriptions (bounded, I with the origin in its relative interior)
    S : Subspace
    kind : "lasso" | "group_lasso" | "analysis" | "hybrid" | "custom"
    meta : dict of bookkeeping used for closed-form dispatch
    """

    A: object
    I: object
    S: Subspace
    kind: str = "custom"
    meta: dict = field(default_factory=dict)
    check: bool = True

    def __post_init__(self):
        p = self.S.ambient
        if self.A.dim != p or self.I.dim != p:
            raise DimensionError(p, (self.A.dim, self.I.dim), "penalty set")
        if self.check:
            if not (is_bounded(self.A) and is_bounded(self.I)):
                raise InvalidSetError("A and I must be bounded")
            if not origin_in_relint(self.I):
                raise InvalidSetError("I must contain the origin in its relative interior")

    @property
    def p(self):
        return self.S.ambient

    @cached_property
    def M(self) -> Subspace:
        return subspace_intersect(span_of(self.I).complement(), self.S)

    @property
    def separable(self) -> Separable | None:
        """Closed-form prox structure, or None when rho has none."""
        return self.meta.get("separable")

    @property
    def units(self):
        """Coordinate or group units used for support bookkeeping."""
        return self.meta.get("units")

    @property
    def unit_kind(self):
        return self.meta.get("unit_kind")

    @property
    def active_units(self):
        return tuple(self.meta.get("active", ()))

    def with_active(self, active):
        """Same family and penalized units, new active set."""
        builder = self.meta.get("rebuild")
        if builder is None:
            raise UnsupportedError(f"cannot change the active set of a {self.kind} penalty")
        return builder(active)

    def __repr__(self):
        return f"Penalty(kind={self.kind!r}, p={self.p}, dim M={self.M.dim})"


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def lasso(p, active, free=()) -> Penalty:
    """l1 norm with active coordinates in A and the other penalized ones in I."""
    active = sorted(set(int(i) for i in active))
    free = sorted(set(int(i) for i in free))
    if set(active) & set(free):
        raise ValueError("a coordinate cannot be both active and free")
    inactive = [i for i in range(p) if i not in set(active) | set(free)]
    meta = {
        "separable": Separable(p, active + inactive),
        "separable_part": Separable(p, active + inactive),
        "active_part": Separable(p, active),
        "units": [(i,) for i in range(p)],
        "unit_kind": "coord",
        "active": active,
        "free": free,
        "penalized": sorted(active + inactive),
        "rebuild": partial(_lasso_with, p, tuple(free)),
    }
    return Penalty(CoordBox(p, active), CoordBox(p, inactive), Subspace.full(p), "lasso", meta)


def _check_partition(groups):
    flat = [i for g in groups for i in g]
    if len(flat) != len(set(flat)):
        return False
    return sorted(flat) == list(range(len(flat)))


def group_lasso(groups, active, free_groups=(), subspace=None, overlap="error") -> Penalty:
    """Sum of group l2 norms with active groups in A and the other penalized ones in I.

    Overlapping groups are refused unless ``overlap="duplicate"``, in which
    case every group gets its own copy of its coordinates and equality of the
    copies is imposed through S.  ``meta["expansion"]`` then maps an original
    parameter to the duplicated one.
    """
    groups = [tuple(int(i) for i in g) for g in groups]
    active = sorted(set(int(a) for a in active))
    free_groups = sorted(set(int(a) for a in free_groups))
    if set(active) & set(free_groups):
        raise ValueError("a group cannot be both active and free")
    expansion = None
    if not _check_partition(groups):
        flat = [i for g in groups for i in g]
        if overlap != "duplicate":
            raise OverlappingGroupsError(
                "groups overlap or do not cover 0..p-1; duplicate the shared "
                "coordinates (overlap='duplicate') to obtain a decomposable penalty"
            )
        p0 = max(flat) + 1
        expansion = np.zeros((len(flat), p0))
        expansion[np.arange(len(flat)), flat] = 1.0
        new_groups, start = [], 0
        for g in groups:
            new_groups.append(tuple(range(start, start + len(g))))
            start += len(g)
        groups = new_groups
        dup_space = Subspace.span(expansion)
        subspace = dup_space if subspace is None else subspace_intersect(dup_space, subspace)
    p = sum(len(g) for g in groups)
    inactive = [g for g in range(len(groups)) if g not in set(active) | set(free_groups)]
    S = Subspace.full(p) if subspace is None else subspace
    if S.ambient != p:
        raise DimensionError(p, S.ambient, "subspace ambient")
    penalized = sorted(active + inactive)
    part = Separable(p, (), [groups[g] for g in penalized])
    meta = {
        "separable": part if S.dim == p else None,
        "separable_part": part,
        "active_part": Separable(p, (), [groups[g] for g in active]),
        "units": groups,
        "unit_kind": "group",
        "groups": groups,
        "active": active,
        "free": free_groups,
        "penalized": penalized,
        "expansion": expansion,
        "rebuild": partial(_group_lasso_with, groups, tuple(free_groups), subspace),
    }
    return Penalty(GroupBall(groups, active), GroupBall(groups, inactive), S, "group_lasso", meta)


def analysis(D, base: Penalty) -> Penalty:
    """rho(theta) = base(D theta), decomposed as h_{D^T A} + h_{D^T I} + h_{S'-perp}.

    S' = {theta : D theta in S_base}.
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if D.shape[0] == 0:
        raise ValueError("analysis operator D has no rows")
    if D.shape[0] != base.p:
        raise DimensionError(base.p, D.shape[0], "rows of D")
    p = D.shape[1]
    A = LinearImage(D.T, base.A)
    I = LinearImage(D.T, base.I)
    if base.S.dim == base.p:
        S = Subspace.full(p)
    else:
        # theta with D theta in S_base  <=>  P_{S_base-perp} D theta = 0
        comp = base.S.complement()
        K = comp.basis.T @ D
        _, s, Vt = np.linalg.svd(K, full_matrices=True)
        rank = int(np.sum(s > 1e-10 * (s[0] if s.size else 1.0)))
        S = Subspace(Vt[rank:].T, check=False) if rank < p else Subspace.zero(p)
    meta = {
        "D": D,
        "base": base,
        "units": base.units,
        "unit_kind": base.unit_kind,
        "active": base.active_units,
        "rebuild": partial(_analysis_with, D, base),
    }
    if base.kind == "lasso":
        meta["D_active"] = D[base.active_units, :]
        meta["D_inactive"] = D[[i for i in base.meta["penalized"] if i not in base.active_units], :]
    return Penalty(A, I, S, "analysis", meta)


# module-level rebuilders keep penalties picklable for worker processes
def _lasso_with(p, free, active):
    return lasso(p, active, free)


def _group_lasso_with(groups, free_groups, subspace, active):
    return group_lasso(groups, active, free_groups, subspace)


def _analysis_with(D, base, active):
    return analysis(D, base.with_active(active))


def _embed(C, offset, p_total):
    E = np.zeros((p_total, C.dim))
    E[offset:offset + C.dim] = np.eye(C.dim)
    return LinearImage(E, C)


def hybrid(rho1: Penalty, rho2: Penalty) -> Penalty:
    """Penalty on the stacked parameter (theta1, theta2): rho1(theta1) + rho2(theta2).

    Paired with :class:`gdpen.losses.SummedLoss` this gives the
    infimal-convolution estimator  min l(theta1 + theta2) + lam rho1 + lam rho2.
    """
    p1, p2 = rho1.p, rho2.p
    p = p1 + p2
    A = MinkowskiSum((_embed(rho1.A, 0, p), _embed(rho2.A, p1, p)))
    I = MinkowskiSum((_embed(rho1.I, 0, p), _embed(rho2.I, p1, p)))
    B = np.zeros((p, rho1.S.dim + rho2.S.dim))
    B[:p1, : rho1.S.dim] = rho1.S.basis
    B[p1:, rho1.S.dim:] = rho2.S.basis
    S = Subspace(B, check=False)
    sep = None
    if rho1.separable is not None and rho2.separable is not None:
        sep = Separable.concat([rho1.separable, rho2.separable], p)
    units1 = rho1.units or []
    units2 = [tuple(i + p1 for i in u) for u in (rho2.units or [])]
    meta = {
        "separable": sep,
        "parts": (rho1, rho2),
        "units": list(units1) + units2,
        "unit_kind": rho1.unit_kind if rho1.unit_kind == rho2.unit_kind else None,
        "active": list(rho1.active_units) + [a + len(units1) for a in rho2.active_units],
    }
    return Penalty(A, I, S, "hybrid", meta)


def custom(A, I, S: Subspace | None = None) -> Penalty:
    S = Subspace.full(A.dim) if S is None else S
    return Penalty(A, I, S, "custom", {})


def make_penalty(spec: dict, base_dir=".") -> Penalty:
    """Build a penalty from a JSON-style description.

    Recognized kinds:
      {"kind": "lasso", "p": int, "active": [...], "free": [...]}
      {"kind": "group_lasso", "groups": [[...], ...], "active": [...],
       "free": [...], "subspace": "basis.csv", "overlap": "error"|"duplicate"}
      {"kind": "analysis", "D": "D.csv" | [[...]], "base": {...}}
      {"kind": "hybrid", "parts": [{...}, {...}]}

    File references are resolved relative to ``base_dir``.
    """
    from .io import load_matrix

    base_dir = Path(base_dir)

    def matrix(ref):
        if isinstance(ref, str):
            return load_matrix(base_dir / ref)
        return np.atleast_2d(np.asarray(ref, dtype=float))

    kind = spec.get("kind")
    if kind == "lasso":
        return lasso(int(spec["p"]), spec.get("active", ()), spec.get("free", ()))
    if kind == "group_lasso":
        S = None
        if spec.get("subspace") is not None:
            S = Subspace.span(matrix(spec["subspace"]))
        return group_lasso(
            spec["groups"],
            spec.get("active", ()),
            spec.get("free", ()),
            subspace=S,
            overlap=spec.get("overlap", "error"),
        )
    if kind == "analysis":
        return analysis(matrix(spec["D"]), make_penalty(spec["base"], base_dir))
    if kind == "hybrid":
        parts = spec["parts"]
        if len(parts) != 2:
            raise ValueError("hybrid penalties take exactly two parts")
        return hybrid(make_penalty(parts[0], base_dir), make_penalty(parts[1], base_dir))
    raise ValueError(f"unknown penalty kind {kind!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def penalty_value(rho: Penalty, theta) -> float:
    theta = _as_vector(theta, rho.p)
    if not rho.S.contains(theta):
        return float("inf")
    sep = rho.separable
    if sep is not None:
        return sep.value(theta)
    return support_value(rho.A, theta) + support_value(rho.I, theta)


def model_subspace(rho: Penalty) -> Subspace:
    return rho.M


def prox(rho: Penalty, v, t) -> np.ndarray:
    """argmin_theta 0.5||theta - v||^2 + t rho(theta) for separable penalties."""
    v = _as_vector(v, rho.p)
    if t < 0:
        raise ValueError("prox step must be nonnegative")
    sep = rho.separable
    if sep is None:
        raise UnsupportedError(f"no closed-form prox for a {rho.kind} penalty; use the ADMM path")
    return sep.prox(v, t)


def splitting(rho: Penalty, active_only=False):
    """(L, g) with g separable such that (h_A + h_I)(theta) = g(L theta) on S.

    With ``active_only`` the identity is h_A(theta) = g(L theta) instead.
    Raises UnsupportedError for penalties without such a form.
    """
    key = "active_part" if active_only else "separable_part"
    if rho.kind in ("lasso", "group_lasso"):
        return np.eye(rho.p), rho.meta[key]
    if rho.kind == "analysis":
        L, g = splitting(rho.meta["base"], active_only)
        return L @ rho.meta["D"], g
    if rho.kind == "hybrid":
        (L1, g1), (L2, g2) = (splitting(r, active_only) for r in rho.meta["parts"])
        L = np.zeros((L1.shape[0] + L2.shape[0], L1.shape[1] + L2.shape[1]))
        L[: L1.shape[0], : L1.shape[1]] = L1
        L[L1.shape[0]:, L1.shape[1]:] = L2
        return L, Separable.concat([g1, g2], L.shape[0])
    raise UnsupportedError(f"no separable splitting for a {rho.kind} penalty")


def unit_measures(rho: Penalty, theta) -> np.ndarray:
    """|u_i| per coordinate unit or ||u_g||_2 per group unit, u = L theta.

    L is the identity except for analysis penalties, where units live on D theta.
    """
    units = rho.units
    if units is None:
        raise UnsupportedError("penalty has no unit bookkeeping")
    theta = np.asarray(theta, dtype=float)
    if rho.kind == "analysis":
        theta = splitting(rho)[0] @ theta
    return np.array([np.linalg.norm(theta[list(u)]) for u in units])


def support_of(rho: Penalty, theta, eps=1e-6) -> tuple:
    """Units whose measure exceeds ``eps``."""
    return tuple(int(k) for k in np.flatnonzero(unit_measures(rho, theta) > eps))


@dataclass
class EstimandSpec:
    """The true parameter and its active coordinates or groups."""

    p: int
    theta_star: np.ndarray | None = None
    active: tuple = ()
    units: list | None = None
    threshold: float = 1e-12

    def __post_init__(self):
        self.active = tuple(sorted(int(a) for a in self.active))
        if self.theta_star is None:
            return
        self.theta_star = np.asarray(self.theta_star, dtype=float)
        if self.theta_star.shape != (self.p,):
            raise DimensionError(self.p, self.theta_star.shape, "theta_star")
        units = self.units or [(i,) for i in range(self.p)]
        found = tuple(
            k for k, u in enumerate(units) if np.linalg.norm(self.theta_star[list(u)]) > self.threshold
        )
        if found != self.active:
            raise ValueError(f"support of theta_star {found} does not match active set {self.active}")
