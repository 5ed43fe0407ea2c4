"""Smooth losses with value, gradient and Hessian.

Every loss exposes ``value``, ``gradient``, ``hessian``, ``p`` and
``is_quadratic``; ``in_domain`` tells the solvers where the loss is finite.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import DimensionError, DomainError
from .geometry import _as_vector

PD_EIG_FLOOR = 1e-10


class QuadraticLoss:
    """0.5 theta^T Q theta - b^T theta + c."""

    is_quadratic = True

    def __init__(self, Q, b=None, c=0.0, n=None, theta_star=None):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        self.Q = 0.5 * (Q + Q.T)
        self.b = np.zeros(Q.shape[0]) if b is None else _as_vector(b, Q.shape[0])
        self.c = float(c)
        self.n = n
        self.theta_star = None if theta_star is None else _as_vector(theta_star, Q.shape[0])

    @property
    def p(self):
        return self.Q.shape[0]

    def in_domain(self, theta):
        return True

    def value(self, theta):
        theta = _as_vector(theta, self.p)
        return float(0.5 * theta @ (self.Q @ theta) - self.b @ theta + self.c)

    def gradient(self, theta):
        theta = _as_vector(theta, self.p)
        return self.Q @ theta - self.b

    def hessian(self, theta=None):
        return self.Q

    @cached_property
    def lipschitz(self):
        return float(np.linalg.eigvalsh(self.Q)[-1]) if self.p else 0.0


class SquaredLoss(QuadraticLoss):
    """(1 / 2n) ||y - X theta||^2.

    With ``normalize=True`` the columns of X are rescaled to Euclidean norm
    sqrt(n); the scale factors are kept in ``column_scale`` so that a fit on
    the normalized design can be mapped back via ``theta / column_scale``.
    """

    def __init__(self, X, y, normalize=False, theta_star=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n, p = X.shape
        y = _as_vector(y, n, "response")
        scale = np.ones(p)
        if normalize:
            norms = np.linalg.norm(X, axis=0)
            norms[norms == 0] = 1.0
            scale = np.sqrt(n) / norms
            X = X * scale
        self.X = X
        self.y = y
        self.column_scale = scale
        super().__init__(X.T @ X / n, X.T @ y / n, 0.5 * float(y @ y) / n, n=n, theta_star=theta_star)

    def value(self, theta):
        theta = _as_vector(theta, self.p)
        r = self.y - self.X @ theta
        return float(0.5 * (r @ r) / self.n)


class ExpFamilyLoss:
    """Negative log-likelihood A(theta) - phi_bar^T theta of an exponential family.

    ``log_partition``, ``grad`` and ``hess`` are callables of theta.
    """

    def __init__(self, phi_bar, log_partition, grad, hess, n=None, theta_star=None, quadratic=False):
        self.phi_bar = np.asarray(phi_bar, dtype=float)
        self._A = log_partition
        self._grad = grad
        self._hess = hess
        self.n = n
        self.theta_star = None if theta_star is None else _as_vector(theta_star, self.phi_bar.size)
        self.is_quadratic = quadratic

    @property
    def p(self):
        return self.phi_bar.size

    def in_domain(self, theta):
        return True

    def value(self, theta):
        theta = _as_vector(theta, self.p)
        return float(self._A(theta) - self.phi_bar @ theta)

    def gradient(self, theta):
        theta = _as_vector(theta, self.p)
        return np.asarray(self._grad(theta), dtype=float) - self.phi_bar

    def hessian(self, theta):
        theta = _as_vector(theta, self.p)
        return np.asarray(self._hess(theta), dtype=float)


def gaussian_family(phi_bar, cov=None, n=None, theta_star=None):
    """Gaussian with known covariance C in natural parameters: A(theta) = 0.5 theta^T C theta."""
    phi_bar = np.asarray(phi_bar, dtype=float)
    C = np.eye(phi_bar.size) if cov is None else np.asarray(cov, dtype=float)
    return ExpFamilyLoss(
        phi_bar,
        lambda t: 0.5 * t @ C @ t,
        lambda t: C @ t,
        lambda t: C,
        n=n,
        theta_star=theta_star,
        quadratic=True,
    )


def bernoulli_family(phi_bar, n=None, theta_star=None):
    """Independent Bernoulli coordinates: A(theta) = sum log(1 + exp(theta_i))."""
    phi_bar = np.asarray(phi_bar, dtype=float)

    def mean(t):
        return 0.5 * (1.0 + np.tanh(0.5 * t))

    return ExpFamilyLoss(
        phi_bar,
        lambda t: float(np.logaddexp(0.0, t).sum()),
        mean,
        lambda t: np.diag(mean(t) * (1.0 - mean(t))),
        n=n,
        theta_star=theta_star,
    )


def vech_indices(d):
    """Row/column indices of the upper triangle (diagonal included), row-major."""
    return np.triu_indices(d)


def glasso_groups(d, block_size=2):
    """Groups of upper-triangle coordinates for a node-blocked precision matrix.

    Returns ``(groups, diag_groups, pairs)``: one group per unordered node
    pair (the b x b off-diagonal block), one per node (the diagonal block,
    upper triangle only), and the node pair behind each off-diagonal group.
    Off-diagonal groups come first.
    """
    if d % block_size:
        raise ValueError("dimension must be a multiple of the block size")
    nodes = d // block_size
    iu, ju = vech_indices(d)
    lookup = {(int(i), int(j)): k for k, (i, j) in enumerate(zip(iu, ju))}
    groups, pairs, diag = [], [], []
    for a in range(nodes):
        for c in range(a + 1, nodes):
            idx = [
                lookup[(a * block_size + r, c * block_size + s)]
                for r in range(block_size)
                for s in range(block_size)
            ]
            groups.append(tuple(sorted(idx)))
            pairs.append((a, c))
    for a in range(nodes):
        idx = [
            lookup[(a * block_size + r, a * block_size + s)]
            for r in range(block_size)
            for s in range(r, block_size)
        ]
        diag.append(tuple(sorted(idx)))
    return groups, diag, pairs


class LogDetLoss:
    """trace(Sigma_hat Theta) - log det Theta over symmetric Theta.

    Theta is parameterized by its upper triangle (``vech``), so gradients of
    off-diagonal entries count both mirrored positions.
    """

    is_quadratic = False

    def __init__(self, sigma_hat, block_size=2, n=None, theta_star=None):
        S = np.asarray(sigma_hat, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("sample covariance must be square")
        if np.max(np.abs(S - S.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(S))):
            raise ValueError("sample covariance must be symmetric")
        self.sigma_hat = 0.5 * (S + S.T)
        self.d = S.shape[0]
        self.block_size = block_size
        self.n = n
        self._iu, self._ju = vech_indices(self.d)
        self._weight = np.where(self._iu == self._ju, 1.0, 2.0)
        self.theta_star = None
        if theta_star is not None:
            ts = np.asarray(theta_star, dtype=float)
            self.theta_star = self.from_matrix(ts) if ts.ndim == 2 else _as_vector(ts, self.p)

    @property
    def p(self):
        return self._iu.size

    def to_matrix(self, theta):
        theta = _as_vector(theta, self.p)
        T = np.zeros((self.d, self.d))
        T[self._iu, self._ju] = theta
        T[self._ju, self._iu] = theta
        return T

    def from_matrix(self, T):
        return np.asarray(T, dtype=float)[self._iu, self._ju].copy()

    def _factor(self, theta):
        T = self.to_matrix(theta)
        try:
            c, low = scipy.linalg.cho_factor(T, lower=False, check_finite=False)
        except np.linalg.LinAlgError:
            return None
        if np.min(np.abs(np.diag(c))) ** 2 <= PD_EIG_FLOOR:
            return None
        return T, c

    def in_domain(self, theta):
        f = self._factor(theta)
        if f is None:
            return False
        return float(np.linalg.eigvalsh(f[0])[0]) > PD_EIG_FLOOR

    def _checked(self, theta):
        f = self._factor(theta)
        if f is None:
            raise DomainError("precision matrix is not positive definite")
        return f

    def value(self, theta):
        T, c = self._checked(theta)
        logdet = 2.0 * np.sum(np.log(np.diag(c)))
        return float(np.sum(self.sigma_hat * T) - logdet)

    def inverse(self, theta):
        T, c = self._checked(theta)
        W = scipy.linalg.cho_solve((c, False), np.eye(self.d), check_finite=False)
        return 0.5 * (W + W.T)

    def gradient(self, theta):
        W = self.inverse(theta)
        G = self.sigma_hat - W
        return self._weight * G[self._iu, self._ju]

    def value_and_gradient(self, theta):
        T, c = self._checked(theta)
        logdet = 2.0 * np.sum(np.log(np.diag(c)))
        W = scipy.linalg.cho_solve((c, False), np.eye(self.d), check_finite=False)
        W = 0.5 * (W + W.T)
        G = self.sigma_hat - W
        return float(np.sum(self.sigma_hat * T) - logdet), self._weight * G[self._iu, self._ju]

    def hessian(self, theta):
        """D^T (W kron W) D with D the duplication matrix and W = Theta^{-1}."""
        W = self.inverse(theta)
        i, j = self._iu, self._ju
        H = W[np.ix_(i, i)] * W[np.ix_(j, j)] + W[np.ix_(i, j)] * W[np.ix_(j, i)]
        return 0.5 * np.outer(self._weight, self._weight) * H


class SummedLoss:
    """theta = (theta_1, ..., theta_k) -> base(theta_1 + ... + theta_k)."""

    def __init__(self, base, copies=2):
        self.base = base
        self.copies = copies
        self.is_quadratic = base.is_quadratic
        self.n = getattr(base, "n", None)
        self.theta_star = None

    @property
    def p(self):
        return self.base.p * self.copies

    def _sum(self, theta):
        theta = _as_vector(theta, self.p)
        return theta.reshape(self.copies, self.base.p).sum(axis=0)

    def in_domain(self, theta):
        return self.base.in_domain(self._sum(theta))

    def value(self, theta):
        return self.base.value(self._sum(theta))

    def gradient(self, theta):
        return np.tile(self.base.gradient(self._sum(theta)), self.copies)

    def hessian(self, theta):
        return np.tile(self.base.hessian(self._sum(theta)), (self.copies, self.copies))


def loss_eval(loss, theta, hessian=False):
    """(value, gradient) or (value, gradient, Hessian) at theta."""
    if hasattr(loss, "theta_star") and theta is None:
        theta = loss.theta_star
    if theta is None:
        raise DimensionError(loss.p, None, "theta")
    out = (loss.value(theta), loss.gradient(theta))
    if hessian:
        return out + (loss.hessian(theta),)
    return out
