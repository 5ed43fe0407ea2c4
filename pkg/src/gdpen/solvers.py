"""Solvers for  min l(theta) + lam * rho(theta)  and its restriction to M.

Separable penalties (lasso / group lasso, and hybrids of them) go through
accelerated proximal gradient with backtracking.  Everything else with a
separable splitting rho = g(L theta) on S goes through ADMM on the split
z = L B w, theta = B w, where B is a basis of the feasible subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DomainError, UnsupportedError
from .losses import LogDetLoss
from .penalties import Penalty, Separable, penalty_value, splitting, support_of

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50_000
EPS_SUPP = 1e-6


@dataclass
class EstimateResult:
    theta_hat: np.ndarray
    objective: float
    iterations: int
    stationarity_residual: float
    support: tuple
    solver: str
    converged: bool
    lam: float
    eps_supp: float = EPS_SUPP
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "theta_hat": self.theta_hat,
            "objective": self.objective,
            "iterations": self.iterations,
            "stationarity_residual": self.stationarity_residual,
            "support": list(self.support),
            "solver": self.solver,
            "converged": self.converged,
            "lambda": self.lam,
            "eps_supp": self.eps_supp,
        }


class RestrictedLoss:
    """w -> loss(B w) for a fixed basis B."""

    def __init__(self, loss, B):
        self.loss = loss
        self.B = B
        self.is_quadratic = loss.is_quadratic

    @property
    def p(self):
        return self.B.shape[1]

    def value(self, w):
        return self.loss.value(self.B @ w)

    def gradient(self, w):
        return self.B.T @ self.loss.gradient(self.B @ w)

    def value_and_gradient(self, w):
        return _value_and_gradient(self.loss, self.B @ w, self.B)

    def hessian(self, w):
        return self.B.T @ self.loss.hessian(self.B @ w) @ self.B

    @property
    def lipschitz(self):
        H = self.hessian(np.zeros(self.p))
        return float(np.linalg.eigvalsh(H)[-1]) if self.p else 0.0


def _value_and_gradient(loss, theta, B=None):
    if hasattr(loss, "value_and_gradient") and not isinstance(loss, RestrictedLoss):
        f, g = loss.value_and_gradient(theta)
    else:
        f, g = loss.value(theta), loss.gradient(theta)
    return (f, g) if B is None else (f, B.T @ g)


def _default_init(loss, p):
    if isinstance(loss, LogDetLoss):
        return loss.from_matrix(np.diag(1.0 / np.maximum(np.diag(loss.sigma_hat), 1e-8)))
    return np.zeros(p)


def _initial_step(loss):
    if loss.is_quadratic:
        L = getattr(loss, "lipschitz", None)
        if L is None:
            L = float(np.linalg.eigvalsh(loss.hessian(np.zeros(loss.p)))[-1])
        return 1.0 / L if L > 0 else 1.0
    return 1.0


def _safe_value(loss, x):
    try:
        return _value_and_gradient(loss, x)
    except DomainError:
        return None


def fista(loss, sep: Separable, lam, x0, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, step=None):
    """Accelerated proximal gradient with backtracking and function-value restart.

    Accepted iterates never increase the objective by more than 1e-12
    relative; a rejected extrapolation resets the momentum.  Stops when the
    composite gradient map at the returned point is at most ``tol``.
    Returns (x, iterations, residual, converged, step).
    """
    t = _initial_step(loss) if step is None else step
    x = np.array(x0, dtype=float)
    fg = _safe_value(loss, x)
    if fg is None:
        raise DomainError("initial point outside the loss domain")
    fx, gx = fg
    Fx = fx + lam * sep.value(x)
    y, fy, gy = x, fx, gx
    mom = 1.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        while True:
            xn = sep.prox(y - t * gy, t * lam)
            fg = _safe_value(loss, xn)
            if fg is not None:
                fxn, gxn = fg
                d = xn - y
                if fxn <= fy + gy @ d + (d @ d) / (2 * t) + 1e-12 * max(1.0, abs(fy)):
                    break
            t *= 0.5
            if t < 1e-20:
                return x, it, residual, False, t
        gmap = np.linalg.norm(xn - y) / t
        Fn = fxn + lam * sep.value(xn)
        if Fn > Fx + 1e-12 * max(1.0, abs(Fx)) and y is not x:
            # extrapolation overshot: restart from x without momentum
            y, fy, gy, mom = x, fx, gx, 1.0
            continue
        if gmap <= tol:
            # confirm at the new point itself
            xr = sep.prox(xn - t * gxn, t * lam)
            residual = np.linalg.norm(xn - xr) / t
            if residual <= tol:
                return xn, it, residual, True, t
            x, fx, gx, Fx = xn, fxn, gxn, Fn
            y, fy, gy, mom = x, fx, gx, 1.0
            continue
        mom_n = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * mom * mom))
        yn = xn + ((mom - 1.0) / mom_n) * (xn - x)
        x, fx, gx, Fx, mom = xn, fxn, gxn, Fn, mom_n
        fg = _safe_value(loss, yn)
        if fg is None:
            y, fy, gy, mom = x, fx, gx, 1.0
        else:
            y, (fy, gy) = yn, fg
    xr = sep.prox(x - t * gx, t * lam)
    residual = np.linalg.norm(x - xr) / t
    return x, max_iter, residual, residual <= tol, t


def _solve_linear(A, rhs):
    try:
        c = scipy.linalg.cho_factor(A, check_finite=False)
        return lambda r: scipy.linalg.cho_solve(c, r, check_finite=False)
    except np.linalg.LinAlgError:
        P = np.linalg.pinv(A, hermitian=True)
        return lambda r: P @ r


def admm(loss, B, C, sep: Separable, lam, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, w0=None):
    """ADMM for  min_w loss(B w) + lam * g(C w)  via the split z = C w.

    The penalty parameter starts at 1 and is doubled or halved when the
    primal and dual residuals differ by more than a factor 10.
    Returns (w, z, iterations, residual, converged).
    """
    k = B.shape[1]
    w = np.zeros(k) if w0 is None else np.array(w0, dtype=float)
    z = C @ w
    u = np.zeros_like(z)
    rho = 1.0
    quadratic = loss.is_quadratic
    CtC = C.T @ C
    if quadratic:
        H = B.T @ loss.hessian(np.zeros(loss.p)) @ B
        h0 = B.T @ loss.gradient(np.zeros(loss.p))
        solver = _solve_linear(H + rho * CtC, None)
    r_norm = s_norm = np.inf
    for it in range(1, max_iter + 1):
        if quadratic:
            w = solver(-h0 + rho * C.T @ (z - u))
        else:
            w = _newton_w(loss, B, C, rho, z - u, w)
        Cw = C @ w
        z_old = z
        z = sep.prox(Cw + u, lam / rho)
        u = u + Cw - z
        r_norm = np.linalg.norm(Cw - z)
        s_norm = rho * np.linalg.norm(C.T @ (z - z_old))
        eps_pri = tol * max(1.0, np.linalg.norm(Cw), np.linalg.norm(z))
        eps_dual = tol * max(1.0, rho * np.linalg.norm(C.T @ u))
        if r_norm <= eps_pri and s_norm <= eps_dual:
            return w, z, it, max(r_norm, s_norm), True
        if r_norm > 10.0 * s_norm:
            rho *= 2.0
            u /= 2.0
        elif s_norm > 10.0 * r_norm:
            rho /= 2.0
            u *= 2.0
        else:
            continue
        if quadratic:
            solver = _solve_linear(H + rho * CtC, None)
    return w, z, max_iter, max(r_norm, s_norm), False


def _newton_w(loss, B, C, rho, target, w, iters=20):
    """Damped Newton on  loss(B w) + rho/2 ||C w - target||^2."""
    def obj(v):
        try:
            return loss.value(B @ v) + 0.5 * rho * np.sum((C @ v - target) ** 2)
        except DomainError:
            return np.inf

    f = obj(w)
    for _ in range(iters):
        g = B.T @ loss.gradient(B @ w) + rho * C.T @ (C @ w - target)
        if np.linalg.norm(g) <= 1e-12 * max(1.0, abs(f)):
            break
        H = B.T @ loss.hessian(B @ w) @ B + rho * C.T @ C
        step = -np.linalg.lstsq(H, g, rcond=None)[0]
        s = 1.0
        while s > 1e-12:
            fn = obj(w + s * step)
            if fn <= f + 1e-4 * s * (g @ step):
                break
            s *= 0.5
        w, f = w + s * step, fn
    return w


def _objective(loss, rho, lam, theta):
    try:
        return float(loss.value(theta) + lam * penalty_value(rho, theta))
    except DomainError:
        return float("inf")


def solve(loss, rho: Penalty, lam, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, init=None,
          eps_supp=EPS_SUPP) -> EstimateResult:
    """Minimize loss(theta) + lam * rho(theta)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if loss.p != rho.p:
        raise ValueError(f"loss dimension {loss.p} does not match penalty dimension {rho.p}")
    sep = rho.separable
    if sep is not None:
        x0 = _default_init(loss, rho.p) if init is None else init
        x, it, res, ok, _ = fista(loss, sep, lam, x0, tol, max_iter)
        name = "fista"
    else:
        L, g = splitting(rho)
        B = rho.S.basis
        w, _, it, res, ok = admm(loss, B, L @ B, g, lam, tol, max_iter)
        x = B @ w
        name = "admm"
    return EstimateResult(
        x, _objective(loss, rho, lam, x), it, float(res), _support(rho, x, eps_supp), name, bool(ok),
        float(lam), eps_supp,
    )


def _support(rho, x, eps):
    try:
        return support_of(rho, x, eps)
    except UnsupportedError:
        return tuple(int(i) for i in np.flatnonzero(np.abs(x) > eps))


def _restrict_separable(sep: Separable, coords):
    """g(B w) for B = identity columns ``coords`` as a separable function of w."""
    pos = {c: k for k, c in enumerate(coords)}
    l1 = [pos[i] for i in sep.l1.tolist() if i in pos]
    groups = []
    for g in sep.groups:
        sub = [pos[i] for i in g.tolist() if i in pos]
        if sub:
            groups.append(sub)
    return Separable(len(coords), l1, groups)


def solve_restricted(loss, rho: Penalty, lam, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                     eps_supp=EPS_SUPP) -> EstimateResult:
    """Minimize loss(theta) + lam * h_A(theta) over theta in the model subspace M.

    The result lies in M by construction (theta = basis(M) w).
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    M = rho.M
    B = M.basis
    L, g = splitting(rho, active_only=True)
    rl = RestrictedLoss(loss, B)
    direct = M.coords is not None and L.shape[0] == L.shape[1] and np.array_equal(L, np.eye(L.shape[0]))
    if M.dim == 0:
        w, it, res, ok, name = np.zeros(0), 0, 0.0, True, "trivial"
    elif direct:
        gw = _restrict_separable(g, list(M.coords))
        w0 = B.T @ _default_init(loss, rho.p)
        w, it, res, ok, _ = fista(rl, gw, lam, w0, tol, max_iter)
        name = "fista"
    else:
        w, _, it, res, ok = admm(loss, B, L @ B, g, lam, tol, max_iter)
        name = "admm"
    x = B @ w
    try:
        obj = float(loss.value(x) + lam * g.value(L @ x))
    except DomainError:
        obj = float("inf")
    return EstimateResult(x, obj, it, float(res), _support(rho, x, eps_supp), name + "-restricted",
                          bool(ok), float(lam), eps_supp)


def objective(loss, rho, lam, theta):
    """loss(theta) + lam * rho(theta)."""
    return _objective(loss, rho, lam, np.asarray(theta, dtype=float))
