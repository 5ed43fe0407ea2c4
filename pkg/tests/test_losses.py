import numpy as np
import pytest

from gdpen.errors import DomainError
from gdpen.losses import (
    LogDetLoss,
    QuadraticLoss,
    SquaredLoss,
    SummedLoss,
    bernoulli_family,
    gaussian_family,
    glasso_groups,
)

from oracles import fd_gradient, fd_jacobian, relative_error


def _logdet_instance(rng, d=4):
    A = rng.standard_normal((d, d))
    S = A @ A.T / d + 0.5 * np.eye(d)
    L = LogDetLoss(S, block_size=2)
    B = rng.standard_normal((d, d))
    T = B @ B.T / d + np.eye(d)
    return L, L.from_matrix(T)


def test_squared_loss_by_hand():
    L = SquaredLoss(np.eye(2), [1.0, 2.0])
    assert L.value([0.0, 0.0]) == pytest.approx(1.25)
    np.testing.assert_allclose(L.gradient([0.0, 0.0]), [-0.5, -1.0])


def test_logdet_stationary_at_inverse():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 4))
    S = A.T @ A / 6
    L = LogDetLoss(S)
    theta = L.from_matrix(np.linalg.inv(S))
    assert np.abs(L.gradient(theta)).max() < 1e-9


def test_gaussian_family_gradient():
    phi = np.array([0.5, -1.0, 2.0])
    L = gaussian_family(phi)
    t = np.array([1.0, 1.0, 1.0])
    np.testing.assert_allclose(L.gradient(t), t - phi)


@pytest.mark.parametrize("which", ["squared", "quadratic", "logdet", "bernoulli", "gaussian", "summed"])
def test_gradient_and_hessian_finite_differences(which):
    rng = np.random.default_rng(5)
    if which == "squared":
        L = SquaredLoss(rng.standard_normal((20, 5)), rng.standard_normal(20))
        x = rng.standard_normal(5)
    elif which == "quadratic":
        A = rng.standard_normal((4, 4))
        L = QuadraticLoss(A @ A.T, rng.standard_normal(4), 0.3)
        x = rng.standard_normal(4)
    elif which == "logdet":
        L, x = _logdet_instance(rng)
    elif which == "bernoulli":
        L = bernoulli_family(rng.uniform(0, 1, 5))
        x = rng.standard_normal(5)
    elif which == "gaussian":
        A = rng.standard_normal((3, 3))
        L = gaussian_family(rng.standard_normal(3), cov=A @ A.T + np.eye(3))
        x = rng.standard_normal(3)
    else:
        L = SummedLoss(bernoulli_family(rng.uniform(0, 1, 3)))
        x = rng.standard_normal(6)
    assert relative_error(L.gradient(x), fd_gradient(L.value, x)) < 1e-5
    assert relative_error(L.hessian(x), fd_jacobian(L.gradient, x)) < 1e-5


def test_logdet_hessian_at_identity_is_identity_on_diagonal_entries():
    L = LogDetLoss(np.eye(3), block_size=1)
    H = L.hessian(L.from_matrix(np.eye(3)))
    # vech coordinates: diagonal entries have curvature 1, off-diagonal 2
    diag_idx = [k for k, (i, j) in enumerate(zip(*np.triu_indices(3))) if i == j]
    off_idx = [k for k in range(6) if k not in diag_idx]
    np.testing.assert_allclose(np.diag(H)[diag_idx], 1.0)
    np.testing.assert_allclose(np.diag(H)[off_idx], 2.0)
    assert np.linalg.eigvalsh(H)[0] == pytest.approx(1.0)


def test_logdet_domain():
    L = LogDetLoss(np.eye(2), block_size=1)
    bad = L.from_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not L.in_domain(bad)
    with pytest.raises(DomainError):
        L.value(bad)


def test_glasso_groups_cover_upper_triangle():
    groups, diag, pairs = glasso_groups(6, 2)
    flat = sorted(i for g in groups + diag for i in g)
    assert flat == list(range(21))
    assert len(groups) == 3 and all(len(g) == 4 for g in groups)
    assert pairs == [(0, 1), (0, 2), (1, 2)]
