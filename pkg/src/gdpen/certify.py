"""Irrepresentability, compatibility constants, the lambda window and witnesses.

Notation follows the rest of the package: M is the model subspace of the
penalty, B an orthonormal basis of M, and

    K = P_{M-perp} (Q B (B^T Q B)^{-1} B^T - I)

is the irrepresentable map.  V(y) = inf { gauge_I(u) : y - u in S-perp } is
the semi-norm measuring how far a dual vector on M-perp reaches toward the
boundary of I.

Whenever the inactive set I is a product of coordinate boxes and group balls
and S is the whole space, V is a max of block norms and most quantities have
closed forms.  Otherwise V comes from a linear program (polyhedral I) or from
bisection with alternating projections, and suprema come with an interval.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm as _normal

from .errors import (
    IndeterminateError,
    PreconditionError,
    RankDeficiencyError,
    UnsupportedError,
)
from .geometry import (
    AtomPolytope,
    CoordBox,
    GroupBall,
    LinearImage,
    MinkowskiSum,
    RestrictedInverse,
    _as_vector,
    atoms_of,
    lifted,
    lifted_gauge,
    sample,
    singleton_point,
    support_face,
    support_point,
    support_value,
)
from .penalties import Penalty, support_of

SAFETY_FACTOR = 1.1
ENUM_LIMIT = 14
EPS_SUPP = 1e-6


# ---------------------------------------------------------------------------
# Structure detection
# ---------------------------------------------------------------------------


def ball_structure(C):
    """(L, blocks) with C = { L u : u_b in unit l2 ball for every block b }.

    Coordinate boxes contribute singleton blocks.  Returns None for sets
    that are not linear images of such products.
    """
    if isinstance(C, CoordBox):
        L = np.eye(C.dim)[:, list(C.coords)]
        return L, [np.array([k]) for k in range(len(C.coords))]
    if isinstance(C, GroupBall):
        cols, blocks, start = [], [], 0
        for g in C.active:
            cols.extend(C.groups[g])
            blocks.append(np.arange(start, start + len(C.groups[g])))
            start += len(C.groups[g])
        return np.eye(C.dim)[:, cols], blocks
    if isinstance(C, LinearImage):
        inner = ball_structure(C.base)
        if inner is None:
            return None
        return C.matrix @ inner[0], inner[1]
    if isinstance(C, MinkowskiSum):
        Ls, blocks, off = [], [], 0
        for part in C.parts:
            s = ball_structure(part)
            if s is None:
                return None
            Ls.append(s[0])
            blocks.extend(b + off for b in s[1])
            off += s[0].shape[1]
        return np.hstack(Ls), blocks
    if isinstance(C, AtomPolytope) and singleton_point(C) is not None and not np.any(C.atoms):
        return np.zeros((C.dim, 0)), []
    return None


def v_blocks(rho: Penalty):
    """Coordinate blocks b with V(y) = max_b ||y_b||_2, or None.

    Requires S to be the whole space and I to be a product of unit balls on
    disjoint coordinate blocks.
    """
    if "v_blocks" in rho.meta:
        return rho.meta["v_blocks"]
    out = None
    if rho.S.dim == rho.p:
        s = ball_structure(rho.I)
        if s is not None:
            L, blocks = s
            ok = L.shape[1] == 0 or (
                np.all((L == 0) | (L == 1)) and np.all(L.sum(axis=0) == 1) and np.all(L.sum(axis=1) <= 1)
            )
            if ok:
                rows = np.argmax(L, axis=0) if L.shape[1] else np.zeros(0, dtype=int)
                out = [rows[b] for b in blocks]
    rho.meta["v_blocks"] = out
    return out


# ---------------------------------------------------------------------------
# The V semi-norm
# ---------------------------------------------------------------------------


@dataclass
class VSplit:
    """V(y) and the minimizing inactive part u_I (y - u_I lies in S-perp)."""

    value: float
    lower: float
    upper: float
    u_I: np.ndarray | None
    determinate: bool
    method: str


def _block_v(y, blocks):
    if not blocks:
        scale = max(1.0, np.max(np.abs(y), initial=0.0))
        return 0.0 if np.max(np.abs(y), initial=0.0) <= 1e-9 * scale else float("inf")
    covered = np.concatenate(blocks)
    off = y.copy()
    off[covered] = 0.0
    scale = max(1.0, np.max(np.abs(y)))
    if np.max(np.abs(off), initial=0.0) > 1e-9 * scale:
        return float("inf")
    return float(max(np.linalg.norm(y[b]) for b in blocks))


def V_split(rho: Penalty, y, method="auto") -> VSplit:
    """inf_u { gauge_I(u) + indicator_{S-perp}(y - u) } together with the minimizer."""
    y = _as_vector(y, rho.p)
    blocks = v_blocks(rho) if method == "auto" else None
    if blocks is not None:
        v = _block_v(y, blocks)
        u = y.copy() if np.isfinite(v) else None
        return VSplit(v, v, v, u, True, "closed-form")
    extra = rho.S.complement()
    Lf = lifted(rho.I, extra_free=extra)
    res = lifted_gauge(Lf, y, method=method)
    u = None
    if res.point is not None:
        n_extra = extra.dim
        a = res.point
        a_I = a[: a.size - n_extra] if n_extra else a
        T_I = Lf.T[:, : Lf.T.shape[1] - n_extra] if n_extra else Lf.T
        u = T_I @ a_I
    return VSplit(res.value, res.lower, res.upper, u, res.determinate, res.method)


def V_value(rho: Penalty, y, method="auto") -> float:
    """V(y); raises IndeterminateError when the generic test cannot decide."""
    s = V_split(rho, y, method)
    if not s.determinate:
        raise IndeterminateError("V could not be determined", s.lower, s.upper)
    return s.value


# ---------------------------------------------------------------------------
# Irrepresentable map and sup over products of balls
# ---------------------------------------------------------------------------


def irrepresentable_map(rho: Penalty, Q, tol=1e-10) -> np.ndarray:
    """K = P_{M-perp}(Q P_M (P_M Q P_M)^+ P_M - I) as a p x p matrix."""
    Q = np.asarray(Q, dtype=float)
    M = rho.M
    R = RestrictedInverse(Q, M, tol)
    if R.deficient:
        raise RankDeficiencyError(
            f"Q restricted to M has rank {R.rank} < dim M = {M.dim}"
        )
    if R.not_psd:
        raise RankDeficiencyError("Q is not positive semidefinite on M")
    p = rho.p
    B = M.basis
    Pperp = np.eye(p) - M.projector
    return Pperp @ (Q @ B @ R.inverse_in_basis @ B.T - np.eye(p))


def _ball_bound(cols):
    """Upper bound on sup ||sum_a C_a u_a||_2 over unit vectors u_a."""
    tri = float(sum(np.linalg.norm(c, 2) for c in cols))
    whole = float(np.linalg.norm(np.hstack(cols), 2)) * math.sqrt(len(cols))
    return min(tri, whole)


def _ascent(cols, rng, restarts=20, iters=200):
    """Lower bound on sup ||sum_a C_a u_a||_2 by block power steps, all restarts at once."""
    A = np.hstack(cols)
    splits = np.cumsum([c.shape[1] for c in cols])[:-1]

    def normalize(U):
        parts = []
        for P in np.split(U, splits, axis=0):
            n = np.linalg.norm(P, axis=0, keepdims=True)
            parts.append(P / np.where(n > 0, n, 1.0))
        return np.vstack(parts)

    U = rng.standard_normal((A.shape[1], restarts))
    # one restart starts from the dominant right singular vector
    U[:, 0] = np.linalg.svd(A, full_matrices=False)[2][0]
    U = normalize(U)
    best = np.linalg.norm(A @ U, axis=0)
    for _ in range(iters):
        U = normalize(A.T @ (A @ U))
        vals = np.linalg.norm(A @ U, axis=0)
        done = np.all(vals <= best * (1 + 1e-13))
        best = np.maximum(best, vals)
        if done:
            break
    return float(np.max(best))


def _sup_norm_over_balls(Kb, in_blocks, rng, restarts=20, iters=200):
    """sup ||Kb u||_2 over u in a product of unit balls; returns (lb, ub, exact)."""
    m = Kb.shape[0]
    if not in_blocks:
        return 0.0, 0.0, True
    cols = [Kb[:, b] for b in in_blocks]
    if m == 1:
        v = float(sum(np.linalg.norm(c) for c in cols))
        return v, v, True
    if len(in_blocks) == 1:
        v = float(np.linalg.norm(cols[0], 2))
        return v, v, True
    if all(len(b) == 1 for b in in_blocks) and len(in_blocks) <= ENUM_LIMIT:
        A = np.hstack(cols)
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=A.shape[1])))
        v = float(np.max(np.linalg.norm(signs @ A.T, axis=1)))
        return v, v, True
    ub = _ball_bound(cols)
    lb = _ascent(cols, rng, restarts, iters)
    return lb, max(lb, ub), bool(lb >= ub * (1 - 1e-12))


def _sup_block_v(Kt, in_blocks, out_blocks, rng, top=10):
    """sup over u in a product of balls of max_b ||(Kt u)_b||; (lb, ub, exact).

    Output blocks are visited by decreasing upper bound and ascent runs on
    at most ``top`` of them, since it can only raise the lower bound.
    """
    p = Kt.shape[0]
    covered = np.concatenate(out_blocks) if out_blocks else np.zeros(0, dtype=int)
    outside = np.setdiff1d(np.arange(p), covered)
    used = np.concatenate(in_blocks) if in_blocks else np.zeros(0, dtype=int)
    scale = max(1.0, np.max(np.abs(Kt), initial=0.0))
    if outside.size and used.size and np.max(np.abs(Kt[np.ix_(outside, used)])) > 1e-9 * scale:
        return float("inf"), float("inf"), True
    if not out_blocks or not in_blocks:
        return 0.0, 0.0, True
    # per block: [lb, ub, exact]
    est = []
    for b in out_blocks:
        cols = [Kt[np.ix_(b, a)] for a in in_blocks]
        if len(b) == 1 or len(in_blocks) == 1:
            v = (float(sum(np.linalg.norm(c) for c in cols)) if len(b) == 1
                 else float(np.linalg.norm(cols[0], 2)))
            est.append([v, v, True])
        elif all(len(a) == 1 for a in in_blocks) and len(in_blocks) <= ENUM_LIMIT:
            v = _sup_norm_over_balls(Kt[b], in_blocks, rng)[0]
            est.append([v, v, True])
        else:
            est.append([0.0, _ball_bound(cols), False])
    order = sorted((i for i, e in enumerate(est) if not e[2]), key=lambda i: -est[i][1])
    for i in order[:top]:
        if est[i][1] <= max(e[0] for e in est):
            break
        est[i] = list(_sup_norm_over_balls(Kt[out_blocks[i]], in_blocks, rng))
    lb = max(e[0] for e in est)
    ub = max(e[1] for e in est)
    return lb, ub, bool(lb >= ub * (1 - 1e-12))


@dataclass
class IrrepResult:
    lower: float
    upper: float
    tau: float
    verdict: str
    method: str
    exact: bool

    @property
    def interval(self):
        return (self.lower, self.upper)


def _verdict(lb, ub):
    if ub < 1.0:
        return "pass"
    if lb >= 1.0:
        return "fail"
    return "indeterminate"


def irrep_check(rho: Penalty, Q, seed=0, samples=200) -> IrrepResult:
    """sup over z in A of V(K z), as an interval, with a pass/fail verdict.

    The sup of the convex function V(K z) over the convex set A is attained
    at extreme points of A, so the sup over the subdifferential image of M
    (which contains A itself) equals the sup over A.
    """
    K = irrepresentable_map(rho, Q)
    rng = np.random.default_rng(seed)
    out_blocks = v_blocks(rho)
    a_struct = ball_structure(rho.A)
    if out_blocks is not None and a_struct is not None:
        La, in_blocks = a_struct
        lb, ub, exact = _sup_block_v(K @ La, in_blocks, out_blocks, rng)
        method = "closed-form" if exact else "ascent+bound"
    else:
        atoms = atoms_of(rho.A, limit=1 << 10)
        if atoms is not None:
            vals = [_v_bound(rho, K @ a) for a in atoms]
            lb = max(v[0] for v in vals)
            ub = max(v[1] for v in vals)
            exact = all(v[0] == v[1] for v in vals)
            method = "atoms"
        else:
            pts = _extreme_samples(rho.A, rng, samples)
            lb = max(_v_bound(rho, K @ z)[0] for z in pts)
            ub, exact, method = float("inf"), False, "sampled"
    tau = 1.0 - ub if ub < 1.0 else float("nan")
    return IrrepResult(float(lb), float(ub), tau, _verdict(lb, ub), method, exact)


def _v_bound(rho, y):
    s = V_split(rho, y)
    return (s.value, s.value) if s.determinate else (s.lower, s.upper)


def _extreme_samples(C, rng, count):
    pts = [support_point(C, d) for d in rng.standard_normal((count, C.dim))]
    return pts + list(sample(C, rng, count // 4))


# ---------------------------------------------------------------------------
# Error norms and compatibility constants
# ---------------------------------------------------------------------------


def _units_partition(rho: Penalty):
    units = rho.units
    p = rho.p
    if units is None or rho.kind == "analysis":
        return None
    flat = sorted(i for u in units for i in u)
    return [np.asarray(u) for u in units] if flat == list(range(p)) else None


def error_norm_blocks(rho: Penalty, error_norm):
    """Blocks whose max l2 norm is the error norm (its unit ball is their product)."""
    p = rho.p
    if error_norm == "linf":
        return [np.array([i]) for i in range(p)]
    if error_norm == "l2":
        return [np.arange(p)]
    if error_norm == "group_linf":
        parts = _units_partition(rho)
        if parts is None:
            raise UnsupportedError("group_linf error norm needs group units that partition the coordinates")
        return parts
    raise ValueError(f"unknown error norm {error_norm!r}")


def default_error_norm(rho: Penalty):
    return "group_linf" if rho.unit_kind == "group" and _units_partition(rho) is not None else "linf"


def norm_value(x, blocks):
    return float(max((np.linalg.norm(x[b]) for b in blocks), default=0.0))


def dual_norm_value(x, blocks):
    return float(sum(np.linalg.norm(x[b]) for b in blocks))


def _norm_bound(C):
    """An upper bound on sup { ||a||_2 : a in C }."""
    if isinstance(C, CoordBox):
        return math.sqrt(len(C.coords))
    if isinstance(C, GroupBall):
        return math.sqrt(len(C.active))
    if isinstance(C, AtomPolytope):
        return float(np.max(np.linalg.norm(C.atoms, axis=1)))
    if isinstance(C, LinearImage):
        return float(np.linalg.norm(C.matrix, 2)) * _norm_bound(C.base)
    if isinstance(C, MinkowskiSum):
        return float(sum(_norm_bound(c) for c in C.parts))
    raise UnsupportedError(f"no norm bound for {type(C).__name__}")


@dataclass
class Compatibility:
    kappa_err: float
    kappa_err_star: float
    kappa_A: float
    tau_bar: float
    exact: dict
    tau_bar_interval: tuple
    error_norm: str
    tau_bar_scope: str


def _max_block_sigma(B, blocks):
    return float(max((np.linalg.norm(B[b], 2) for b in blocks), default=0.0))


def _sup_dual_norm(B, blocks, rng, restarts=50):
    """sup { sum_b ||(B w)_b|| : ||w|| <= 1 }; (value, exact)."""
    if B.shape[1] == 0:
        return 0.0, True
    touched = [b for b in blocks if np.any(B[b])]
    ub = math.sqrt(len(touched))
    # exact when every touched block's rows span coordinates of M (coordinate M
    # aligned with the blocks): then the sup is sqrt(#touched).
    rows = np.concatenate(touched) if touched else np.zeros(0, dtype=int)
    if rows.size and np.allclose(B[rows] @ B[rows].T, np.eye(rows.size), atol=1e-12):
        return ub, True
    best = 0.0
    for r in range(restarts):
        w = rng.standard_normal(B.shape[1])
        w /= np.linalg.norm(w)
        for _ in range(200):
            x = B @ w
            s = np.zeros_like(x)
            for b in touched:
                n = np.linalg.norm(x[b])
                if n > 0:
                    s[b] = x[b] / n
            g = B.T @ s
            nw = g / max(np.linalg.norm(g), 1e-300)
            if np.allclose(nw, w, atol=1e-13):
                break
            w = nw
        best = max(best, dual_norm_value(B @ w, touched))
    return min(best * SAFETY_FACTOR, ub), best >= ub * (1 - 1e-12)


def _kappa_A(rho, rng, restarts=50):
    """sup { h_A(x) : x in M, ||x|| <= 1 } = sup { ||P_M a|| : a in A }."""
    M = rho.M
    if M.dim == 0:
        return 0.0, True
    s = ball_structure(rho.A)
    if s is not None:
        La, in_blocks = s
        PL = M.basis.T @ La
        lb, ub, exact = _sup_norm_over_balls(PL, in_blocks, rng)
        if exact:
            return lb, True
        return min(lb * SAFETY_FACTOR, ub), False
    atoms = atoms_of(rho.A)
    if atoms is not None:
        return float(np.max(np.linalg.norm(atoms @ M.basis, axis=1))), True
    ub = _norm_bound(rho.A)
    best = 0.0
    for _ in range(restarts):
        x = M.basis @ rng.standard_normal(M.dim)
        for _ in range(100):
            a = support_point(rho.A, x)
            y = M.project(a)
            n = np.linalg.norm(y)
            if n == 0:
                break
            x = y / n
        best = max(best, support_value(rho.A, x))
    return min(best * SAFETY_FACTOR, ub), False


def _in_blocks_for_scope(rho, blocks, scope):
    if scope == "full":
        return blocks
    coords = rho.M.coords
    if coords is None:
        raise UnsupportedError("model-scope tau_bar needs a coordinate model subspace")
    keep = set(coords)
    return [b for b in blocks if set(b.tolist()) <= keep]


def _tau_bar(rho, K, blocks, scope, rng, samples=400):
    in_blocks = _in_blocks_for_scope(rho, blocks, scope)
    used = np.concatenate(in_blocks) if in_blocks else np.zeros(0, dtype=int)
    Kt = K[:, used]
    shifted, off = [], 0
    for b in in_blocks:
        shifted.append(np.arange(off, off + len(b)))
        off += len(b)
    out_blocks = v_blocks(rho)
    if out_blocks is not None:
        lb, ub, exact = _sup_block_v(Kt, shifted, out_blocks, rng)
        return ub, lb, ub, exact
    # generic V: enumerate vertices of a small box, else sample
    if all(len(b) == 1 for b in shifted) and len(shifted) <= 10:
        signs = itertools.product((-1.0, 1.0), repeat=len(shifted))
        vals = [_v_bound(rho, Kt @ np.array(s)) for s in signs]
        lb, ub = max(v[0] for v in vals), max(v[1] for v in vals)
        return ub, lb, ub, lb == ub
    best = 0.0
    for _ in range(samples):
        u = np.concatenate([_unit(rng, len(b)) for b in shifted]) if shifted else np.zeros(0)
        best = max(best, _v_bound(rho, Kt @ u)[0])
    return best * SAFETY_FACTOR, best, float("inf"), False


def _unit(rng, k):
    if k == 1:
        return np.array([rng.choice((-1.0, 1.0))])
    x = rng.standard_normal(k)
    return x / np.linalg.norm(x)


def compatibility_constants(rho: Penalty, error_norm=None, Q=None, tau_bar_scope="full", seed=0) -> Compatibility:
    """kappa_err, kappa_err*, kappa_A and tau_bar.

    ``tau_bar_scope="full"`` takes the sup of V(K x) over the whole
    error-norm unit ball; ``"model"`` restricts x to the model subspace,
    which for the lasso gives the matrix infinity-norm of Q_IA Q_AA^{-1}.
    Constants obtained by ascent are multiplied by 1.1 (capped by a
    rigorous upper bound when one is known) and flagged in ``exact``.
    """
    error_norm = error_norm or default_error_norm(rho)
    blocks = error_norm_blocks(rho, error_norm)
    rng = np.random.default_rng(seed)
    M = rho.M
    B = M.basis
    if M.dim == 0:
        return Compatibility(0.0, 0.0, 0.0, 0.0, dict.fromkeys(["kappa_err", "kappa_err_star", "kappa_A", "tau_bar"], True),
                             (0.0, 0.0), error_norm, tau_bar_scope)
    kappa_err = _max_block_sigma(B, blocks)
    if error_norm == "l2":
        kappa_star, ks_exact = 1.0, True
    else:
        kappa_star, ks_exact = _sup_dual_norm(B, blocks, rng)
    kappa_A, kA_exact = _kappa_A(rho, rng)
    if M.dim == rho.p:
        tau_bar, tb_lb, tb_ub, tb_exact = 0.0, 0.0, 0.0, True
    else:
        if Q is None:
            raise ValueError("Q is required for tau_bar")
        K = irrepresentable_map(rho, Q)
        tau_bar, tb_lb, tb_ub, tb_exact = _tau_bar(rho, K, blocks, tau_bar_scope, rng)
    exact = {"kappa_err": True, "kappa_err_star": ks_exact, "kappa_A": kA_exact, "tau_bar": tb_exact}
    return Compatibility(kappa_err, kappa_star, kappa_A, tau_bar, exact, (tb_lb, tb_ub), error_norm, tau_bar_scope)


# ---------------------------------------------------------------------------
# Smoothness constants
# ---------------------------------------------------------------------------


@dataclass
class Smoothness:
    m_C: float
    L_C: float
    estimated: bool
    radius: float


def _restricted_min_eig(H, B):
    G = B.T @ H @ B
    return float(np.linalg.eigvalsh(0.5 * (G + G.T))[0]) if G.size else float("inf")


def smoothness_constants(loss, rho: Penalty, theta_star=None, radius=None, seed=0,
                         m_samples=25, pairs=50) -> Smoothness:
    """Restricted strong convexity m_C and Hessian Lipschitz constant L_C.

    C is the Euclidean ball in M of the given radius around theta_star.
    Quadratic losses are handled exactly; otherwise both constants are
    sampled estimates (``estimated=True``), and sampled points outside the
    loss domain are skipped.
    """
    B = rho.M.basis
    if theta_star is None:
        theta_star = getattr(loss, "theta_star", None)
    if theta_star is None:
        theta_star = np.zeros(loss.p)
    if loss.is_quadratic:
        return Smoothness(_restricted_min_eig(loss.hessian(theta_star), B), 0.0, False, float("inf"))
    if radius is None:
        radius = 0.1 * max(1.0, np.linalg.norm(theta_star))
    rng = np.random.default_rng(seed)
    k = B.shape[1]

    def draw():
        for _ in range(100):
            w = rng.standard_normal(k)
            w *= radius * rng.random() ** (1.0 / max(k, 1)) / max(np.linalg.norm(w), 1e-300)
            th = theta_star + B @ w
            if getattr(loss, "in_domain", lambda t: True)(th):
                return th
        return theta_star

    m = _restricted_min_eig(loss.hessian(theta_star), B)
    for _ in range(m_samples):
        m = min(m, _restricted_min_eig(loss.hessian(draw()), B))
    L = 0.0
    for _ in range(pairs):
        t1, t2 = draw(), draw()
        d = np.linalg.norm(t1 - t2)
        if d > 0:
            L = max(L, float(np.linalg.norm(loss.hessian(t1) - loss.hessian(t2), 2)) / d)
    return Smoothness(m, L, True, float(radius))


# ---------------------------------------------------------------------------
# Window, bound, report
# ---------------------------------------------------------------------------


@dataclass
class CertificateReport:
    irrep_lower: float
    irrep_upper: float
    tau: float
    tau_bar: float
    kappa_err: float
    kappa_err_star: float
    kappa_A: float
    m_C: float
    L_C: float
    lambda_lo: float
    lambda_hi: float
    error_bound_coefficient: float
    verdicts: dict
    error_norm: str
    grad_norm: float | None = None
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def irrep_sup(self):
        return (self.irrep_lower, self.irrep_upper)

    @property
    def lambda_window(self):
        return (self.lambda_lo, self.lambda_hi)

    def error_bound_at(self, lam):
        return self.error_bound_coefficient * lam

    @property
    def passed(self):
        return self.verdicts["irrepresentable"] == "pass" and self.verdicts["rss"] == "pass"

    def to_dict(self):
        return {
            "irrep_sup": [self.irrep_lower, self.irrep_upper],
            "tau": self.tau,
            "tau_bar": self.tau_bar,
            "kappa_err": self.kappa_err,
            "kappa_err_star": self.kappa_err_star,
            "kappa_A": self.kappa_A,
            "m_C": self.m_C,
            "L_C": self.L_C,
            "lambda_window": [self.lambda_lo, self.lambda_hi],
            "error_bound_coefficient": self.error_bound_coefficient,
            "verdicts": dict(self.verdicts),
            "error_norm": self.error_norm,
            "grad_norm": self.grad_norm,
            "notes": list(self.notes),
            "details": dict(self.details),
        }


class Window(tuple):
    """(lo, hi) with an ``empty`` flag."""

    def __new__(cls, lo, hi):
        obj = super().__new__(cls, (lo, hi))
        obj.empty = not lo < hi
        return obj

    @property
    def lo(self):
        return self[0]

    @property
    def hi(self):
        return self[1]


def lambda_window_from(tau, tau_bar, kappa_err, kappa_err_star, kappa_A, m_C, L_C, grad_norm):
    if not (tau > 0):
        return Window(float("inf"), float("-inf"))
    if tau_bar == 0:
        if grad_norm:
            warnings.warn("tau_bar is zero; using lambda lower limit 0", RuntimeWarning, stacklevel=2)
        lo = 0.0
    else:
        lo = 2.0 * tau_bar / tau * (grad_norm or 0.0)
    if L_C == 0:
        hi = float("inf")
    else:
        ratio = tau / tau_bar if tau_bar > 0 else float("inf")
        denom = kappa_err * (2.0 * kappa_A + ratio * kappa_err_star) ** 2 * tau_bar
        hi = float("inf") if denom == 0 else (m_C ** 2 / L_C) * tau / denom
    return Window(lo, hi)


def lambda_window(report: CertificateReport, grad_norm: float) -> Window:
    return lambda_window_from(report.tau, report.tau_bar, report.kappa_err, report.kappa_err_star,
                              report.kappa_A, report.m_C, report.L_C, grad_norm)


class Bound(tuple):
    """(value, certified)."""

    def __new__(cls, value, certified):
        return super().__new__(cls, (value, certified))

    @property
    def value(self):
        return self[0]

    @property
    def certified(self):
        return self[1]


def error_bound_coefficient(m_C, kappa_A, kappa_err_star, tau, tau_bar):
    ratio = tau / (2.0 * tau_bar) if tau_bar > 0 else 0.0
    if m_C <= 0:
        return float("inf")
    return 2.0 / m_C * (kappa_A + ratio * kappa_err_star)


def theorem_error_bound(report: CertificateReport, lam) -> Bound:
    """(2/m_C)(kappa_A + tau/(2 tau_bar) kappa_err*) lam, flagged when lam is outside the window."""
    value = report.error_bound_coefficient * lam if lam else 0.0
    inside = report.passed and report.lambda_lo < lam < report.lambda_hi
    return Bound(float(value), bool(inside))


def certify(rho: Penalty, Q=None, loss=None, theta_star=None, grad=None, error_norm=None,
            tau_bar_scope="full", radius=None, seed=0) -> CertificateReport:
    """Compute all constants, the lambda window and the verdicts for one instance.

    Q defaults to the Hessian of ``loss`` at theta_star.  The gradient used
    for the window's lower limit is ``grad`` if given, else the loss gradient
    at theta_star when both are available.
    """
    if theta_star is None and loss is not None:
        theta_star = getattr(loss, "theta_star", None)
    if Q is None:
        if loss is None:
            raise ValueError("either Q or a loss is required")
        at = theta_star if theta_star is not None else np.zeros(loss.p)
        Q = loss.hessian(at)
    Q = np.asarray(Q, dtype=float)
    error_norm = error_norm or default_error_norm(rho)
    notes = ["sup over the subdifferential image of M is taken over all of A"]
    irrep = irrep_check(rho, Q, seed=seed)
    comp = compatibility_constants(rho, error_norm, Q, tau_bar_scope, seed=seed)
    if loss is not None:
        sm = smoothness_constants(loss, rho, theta_star, radius, seed=seed)
    else:
        sm = Smoothness(_restricted_min_eig(Q, rho.M.basis) if rho.M.dim else float("inf"), 0.0, False, float("inf"))
    if sm.estimated:
        notes.append("m_C and L_C are sampled estimates")
    if not all(comp.exact.values()):
        notes.append("some compatibility constants come from ascent and carry a 1.1 safety factor")
    tau = irrep.tau if irrep.verdict == "pass" else float("nan")
    tau_bar = comp.tau_bar
    if irrep.verdict == "pass" and tau_bar <= tau:
        tau_bar = tau * (1.0 + 1e-6)
        notes.append("tau_bar enlarged to tau (1 + 1e-6)")
    if grad is None and loss is not None and theta_star is not None:
        grad = loss.gradient(theta_star)
    blocks = error_norm_blocks(rho, error_norm)
    grad_norm = None if grad is None else norm_value(np.asarray(grad, dtype=float), blocks)
    rss = "pass" if sm.m_C > 1e-12 else "fail"
    if irrep.verdict == "pass":
        win = lambda_window_from(tau, tau_bar, comp.kappa_err, comp.kappa_err_star, comp.kappa_A,
                                 sm.m_C, sm.L_C, grad_norm)
        coef = error_bound_coefficient(sm.m_C, comp.kappa_A, comp.kappa_err_star, tau, tau_bar)
    else:
        win = Window(float("inf"), float("-inf"))
        coef = float("nan")
    verdicts = {"irrepresentable": irrep.verdict, "rss": rss}
    if grad_norm is not None:
        verdicts["window"] = "empty" if win.empty else "nonempty"
    details = {
        "irrep_method": irrep.method,
        "constants_exact": comp.exact,
        "tau_bar_interval": list(comp.tau_bar_interval),
        "tau_bar_scope": tau_bar_scope,
        "smoothness_estimated": sm.estimated,
        "smoothness_radius": sm.radius,
    }
    return CertificateReport(
        irrep.lower, irrep.upper, tau, tau_bar, comp.kappa_err, comp.kappa_err_star, comp.kappa_A,
        sm.m_C, sm.L_C, win.lo, win.hi, coef, verdicts, error_norm, grad_norm, notes, details,
    )


# ---------------------------------------------------------------------------
# Primal-dual witness
# ---------------------------------------------------------------------------


@dataclass
class WitnessReport:
    theta_hat: np.ndarray
    u_A: np.ndarray
    u_I: np.ndarray | None
    u_S_perp: np.ndarray | None
    gauge_I_of_u_I: float
    gauge_interval: tuple
    stationarity_residual: float
    certified_unique: bool
    determinate: bool
    lam: float

    def to_dict(self):
        return {
            "theta_hat": self.theta_hat,
            "u_A": self.u_A,
            "u_I": self.u_I,
            "u_S_perp": self.u_S_perp,
            "gauge_I_of_u_I": self.gauge_I_of_u_I,
            "gauge_interval": list(self.gauge_interval),
            "stationarity_residual": self.stationarity_residual,
            "certified_unique": self.certified_unique,
            "determinate": self.determinate,
            "lambda": self.lam,
        }


def _best_face_point(face, target, M, iters=2000):
    """v in face minimizing ||P_M (target + v)||, by projected gradient on the lifted face."""
    pt = singleton_point(face)
    if pt is not None:
        return pt
    L = lifted(face)
    T = L.T
    PT = M.basis.T @ T
    step = 1.0 / max(np.linalg.norm(PT, 2) ** 2, 1e-300)
    a = L.project(np.zeros(T.shape[1]), 1.0)
    c = M.basis.T @ target
    for _ in range(iters):
        r = c + PT @ a
        an = L.project(a - step * (PT.T @ r), 1.0)
        if np.linalg.norm(an - a) <= 1e-15 * max(1.0, np.linalg.norm(a)):
            a = an
            break
        a = an
    return T @ a


def dual_certificate(loss, rho: Penalty, lam, theta_hat) -> WitnessReport:
    """Build dual variables for the full problem from a restricted solution.

    v_A is chosen in the face of A exposed by theta_hat, v_{M-perp} is what
    stationarity forces, and it is split as u_I + u_{S-perp} by the
    minimizing decomposition of V.  The solution is certified unique when
    gauge_I(u_I) < 1 and the stationarity residual is at most 1e-7 (1 + lam).
    """
    theta_hat = _as_vector(theta_hat, rho.p)
    g = loss.gradient(theta_hat)
    M = rho.M
    face = support_face(rho.A, theta_hat)
    v_A = _best_face_point(face, g / lam, M)
    residual = float(np.linalg.norm(M.project(g + lam * v_A)))
    v_perp = -g / lam - v_A
    v_perp = v_perp - M.project(v_perp)
    split = V_split(rho, v_perp)
    u_I = split.u_I
    u_S = None if u_I is None else v_perp - u_I
    gauge = split.value
    certified = bool(split.determinate and gauge < 1.0 and residual <= 1e-7 * (1.0 + lam))
    return WitnessReport(theta_hat, v_A, u_I, u_S, float(gauge), (split.lower, split.upper), residual,
                         certified, split.determinate, float(lam))


def witness(loss, rho: Penalty, lam, tol=1e-10):
    """Solve the restricted problem and build its dual certificate."""
    from .solvers import solve_restricted

    est = solve_restricted(loss, rho, lam, tol=tol)
    return est, dual_certificate(loss, rho, lam, est.theta_hat)


# ---------------------------------------------------------------------------
# Converse
# ---------------------------------------------------------------------------


def wilson_interval(successes, trials, confidence=0.95):
    if trials == 0:
        return (0.0, 1.0)
    z = _normal.ppf(0.5 + confidence / 2.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (float(max(0.0, centre - half)), float(min(1.0, centre + half)))


@dataclass
class ConverseReport:
    violation: float
    applicable: bool
    trials: int
    n: int
    lambdas: list
    success_counts: list
    best_lambda: float | None
    best_fraction: float | None
    wilson: tuple | None
    seed: int

    def to_dict(self):
        return {
            "violation": self.violation,
            "applicable": self.applicable,
            "trials": self.trials,
            "n": self.n,
            "lambdas": self.lambdas,
            "success_counts": self.success_counts,
            "best_lambda": self.best_lambda,
            "best_fraction": self.best_fraction,
            "wilson95": None if self.wilson is None else list(self.wilson),
            "seed": self.seed,
        }


def _is_polyhedral(C):
    return lifted(C).polyhedral


def fixed_design(Q, n, rng):
    """n x p matrix X with X^T X / n = Q exactly."""
    Q = np.asarray(Q, dtype=float)
    p = Q.shape[0]
    if n < p:
        raise ValueError("fixed design needs n >= p")
    U, _ = np.linalg.qr(rng.standard_normal((n, p)))
    evals, evecs = np.linalg.eigh(Q)
    root = (evecs * np.sqrt(np.maximum(evals, 0.0))) @ evecs.T
    return math.sqrt(n) * U @ root


def converse_violation(rho: Penalty, Q, theta_star):
    """V(K z*) with z* the unique point of the face of A exposed by theta_star."""
    if not _is_polyhedral(rho.A):
        raise UnsupportedError("the converse test needs a polyhedral A")
    theta_star = _as_vector(theta_star, rho.p)
    z = singleton_point(support_face(rho.A, theta_star))
    if z is None:
        raise PreconditionError("theta_star lies on a face boundary: its face of A is not a single point")
    K = irrepresentable_map(rho, Q)
    return V_value(rho, K @ z), z


def _trial_success(rho, theta_hat, z_star, eps):
    if np.linalg.norm(theta_hat - rho.M.project(theta_hat), np.inf) > eps:
        return False
    face = support_face(rho.A, np.where(np.abs(theta_hat) > eps, theta_hat, 0.0))
    z = singleton_point(face)
    return z is not None and np.allclose(z, z_star, atol=1e-9)


def _converse_trial(args):
    from .losses import SquaredLoss
    from .solvers import solve

    X, theta_star, sigma, lambdas, rho_fit, rho, z_star, seed, eps = args
    rng = np.random.default_rng(seed)
    y = X @ theta_star + sigma * rng.standard_normal(X.shape[0])
    loss = SquaredLoss(X, y)
    return [bool(_trial_success(rho, solve(loss, rho_fit, lam).theta_hat, z_star, eps)) for lam in lambdas]


def converse_check(rho: Penalty, Q, theta_star, trials=400, n=200, sigma=1.0, seed=0,
                   n_lambdas=20, lambda_range=None, eps_supp=EPS_SUPP, workers=None) -> ConverseReport:
    """Empirical model-selection probability when the irrepresentable condition fails.

    Trials share one fixed design with X^T X / n = Q; trial t uses noise
    seeded by ``seed + t``.  The lambda grid is 20 log-spaced values between
    ``lambda_range`` (default 1e-3 and 1 times max |Q theta_star|).
    """
    from ._parallel import map_ordered

    violation, z_star = converse_violation(rho, Q, theta_star)
    theta_star = np.asarray(theta_star, dtype=float)
    if violation < 1.0:
        return ConverseReport(violation, False, 0, n, [], [], None, None, None, seed)
    if lambda_range is None:
        top = float(np.max(np.abs(np.asarray(Q) @ theta_star)))
        lambda_range = (1e-3 * top, top)
    lambdas = np.geomspace(lambda_range[0], lambda_range[1], n_lambdas).tolist()
    X = fixed_design(Q, n, np.random.default_rng([seed, 2**31 - 1]))
    rho_fit = rho
    tasks = [(X, theta_star, sigma, lambdas, rho_fit, rho, z_star, seed + t, eps_supp) for t in range(trials)]
    results = map_ordered(_converse_trial, tasks, workers)
    counts = np.sum(np.array(results, dtype=int), axis=0).tolist()
    best = int(np.argmax(counts))
    return ConverseReport(violation, True, trials, n, lambdas, counts, lambdas[best], counts[best] / trials,
                          wilson_interval(counts[best], trials), seed)
