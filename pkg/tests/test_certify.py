import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gdpen.certify import (
    V_split,
    V_value,
    certify,
    compatibility_constants,
    converse_check,
    converse_violation,
    dual_certificate,
    error_bound_coefficient,
    fixed_design,
    irrep_check,
    lambda_window_from,
    smoothness_constants,
    theorem_error_bound,
    wilson_interval,
    witness,
)
from gdpen.experiments import difference_matrix
from gdpen.geometry import Subspace
from gdpen.losses import LogDetLoss, QuadraticLoss, SquaredLoss
from gdpen.penalties import analysis, group_lasso, lasso

from oracles import irrep_by_signs, random_pd

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
Q_HALF = np.array([[1.0, 0.5], [0.5, 1.0]])


# -- V ---------------------------------------------------------------------


def test_V_closed_forms_and_bisection():
    rho = lasso(3, [0])
    z = np.array([0.0, 0.3, -0.7])
    assert V_value(rho, z) == pytest.approx(0.7)
    assert V_value(rho, z, method="bisection") == pytest.approx(0.7, abs=1e-8)
    assert V_value(rho, np.zeros(3)) == 0.0
    g = group_lasso([[0, 1], [2, 3]], [0])
    assert V_value(g, [0.0, 0.0, 3.0, 4.0]) == pytest.approx(5.0)
    assert V_value(g, [0.0, 0.0, 3.0, 4.0], method="bisection") == pytest.approx(5.0, rel=1e-8)


def test_V_with_subspace_absorbs_S_perp():
    # S = span{(1,1,0), (0,0,1)}: the direction (1,-1,0) is free
    S = Subspace.span(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    rho = group_lasso([[0, 1], [2]], [1], subspace=S)
    s = V_split(rho, [1.0, -1.0, 0.0])
    assert s.value == pytest.approx(0.0, abs=1e-8)
    # (1,1,0)/sqrt2 has gauge 1 and no part in S-perp
    assert V_value(rho, [1.0, 1.0, 0.0]) == pytest.approx(np.sqrt(2), rel=1e-7)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite), st.floats(0, 4))
def test_V_is_a_seminorm(z, w, a):
    # V is finite exactly on M-perp, so draw the arguments there
    D = difference_matrix(5)
    for rho in (lasso(4, [1]), group_lasso([[0, 1], [2, 3]], [0]), analysis(D, lasso(4, [0]))):
        P = rho.M.complement()
        zz = P.project(np.resize(z, rho.p))
        ww = P.project(np.resize(w, rho.p))
        vz, vw = V_value(rho, zz), V_value(rho, ww)
        assert V_value(rho, a * zz) == pytest.approx(a * vz, rel=1e-7, abs=1e-9)
        assert V_value(rho, zz + ww) <= vz + vw + 1e-8 * (1 + vz + vw)


# -- irrepresentability ----------------------------------------------------


def test_irrep_2x2():
    r = irrep_check(lasso(2, [0]), Q_HALF)
    assert (r.lower, r.upper) == pytest.approx((0.5, 0.5))
    assert r.tau == pytest.approx(0.5) and r.verdict == "pass"
    r = irrep_check(lasso(2, [0]), np.eye(2))
    assert r.upper == 0.0 and r.verdict == "pass"


def test_irrep_matches_sign_enumeration():
    rng = np.random.default_rng(0)
    Q = random_pd(rng, 6)
    r = irrep_check(lasso(6, [0, 2, 4]), Q)
    oracle = irrep_by_signs(Q, [0, 2, 4])
    assert r.lower == pytest.approx(oracle, abs=1e-8)
    assert r.upper == pytest.approx(oracle, abs=1e-8)


def test_irrep_group_interval_brackets_sampling():
    rng = np.random.default_rng(2)
    Q = random_pd(rng, 6, cond=5.0)
    rho = group_lasso([[0, 1], [2, 3], [4, 5]], [0, 1])
    r = irrep_check(rho, Q)
    assert r.lower <= r.upper + 1e-12
    # Monte Carlo lower estimate never exceeds the reported upper bound
    from gdpen.certify import irrepresentable_map

    K = irrepresentable_map(rho, Q)
    best = 0.0
    for _ in range(2000):
        z = rng.standard_normal(6)
        z[[0, 1]] /= np.linalg.norm(z[[0, 1]])
        z[[2, 3]] /= np.linalg.norm(z[[2, 3]])
        z[[4, 5]] = 0.0
        best = max(best, np.linalg.norm((K @ z)[[4, 5]]))
    assert best <= r.upper + 1e-9
    assert r.lower >= best - 0.05


def test_irrep_fail_verdict():
    Q = np.array([[1.0, 1.25], [1.25, 2.0]])
    r = irrep_check(lasso(2, [0]), Q)
    assert r.verdict == "fail" and r.lower == pytest.approx(1.25)


# -- constants -------------------------------------------------------------


def test_compatibility_lasso():
    rho = lasso(3, [0, 1])
    c = compatibility_constants(rho, "linf", np.eye(3))
    assert c.kappa_A == pytest.approx(np.sqrt(2))
    assert c.kappa_err == pytest.approx(1.0)
    assert c.kappa_err_star == pytest.approx(np.sqrt(2))


def test_tau_bar_scopes():
    rho = lasso(2, [0])
    assert compatibility_constants(rho, "linf", Q_HALF, "model").tau_bar == pytest.approx(0.5)
    # over the whole error ball the identity part of K contributes too
    assert compatibility_constants(rho, "linf", Q_HALF, "full").tau_bar == pytest.approx(1.5)
    full = lasso(2, [0, 1])
    assert compatibility_constants(full, "linf", Q_HALF).tau_bar == 0.0


def test_smoothness_quadratic_and_logdet():
    loss = QuadraticLoss(np.diag([2.0, 3.0]))
    s = smoothness_constants(loss, lasso(2, [0]), np.zeros(2))
    assert (s.m_C, s.L_C) == (pytest.approx(2.0), 0.0)
    assert smoothness_constants(QuadraticLoss(np.eye(4)), lasso(4, [1, 2]), np.zeros(4)).m_C == pytest.approx(1.0)
    L = LogDetLoss(np.eye(3), block_size=1)
    rho = lasso(6, range(6))
    s = smoothness_constants(L, rho, L.from_matrix(np.eye(3)), radius=1e-6)
    assert s.m_C == pytest.approx(1.0, rel=1e-4)


def test_window_arithmetic():
    w = lambda_window_from(0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 0.0, 0.1)
    assert w.lo == pytest.approx(0.2) and w.hi == np.inf
    assert lambda_window_from(0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0).lo == 0.0


def test_error_bound_arithmetic():
    s2 = np.sqrt(2)
    coef = error_bound_coefficient(2.0, s2, s2, 0.5, 0.5)
    assert coef * 0.1 == pytest.approx(0.1 * (s2 + 0.5 * s2))
    assert coef * 0.1 == pytest.approx(0.2121, abs=1e-4)


def test_certify_example():
    rep = certify(lasso(2, [0]), Q_HALF, theta_star=np.array([1.0, 0.0]), grad=np.array([0.1, 0.0]),
                  tau_bar_scope="model")
    assert rep.tau == pytest.approx(0.5)
    # tau_bar equals tau here and is nudged up to keep the window well defined
    assert rep.tau_bar == pytest.approx(0.5 * (1 + 1e-6))
    assert rep.lambda_lo == pytest.approx(0.2, rel=1e-5)
    assert rep.lambda_hi == np.inf
    assert rep.passed
    assert not theorem_error_bound(rep, 0.1).certified
    assert theorem_error_bound(rep, 0.3).certified
    assert theorem_error_bound(rep, 0.0).value == 0.0


# -- witness ---------------------------------------------------------------


def test_witness_noiseless_orthonormal():
    n, p = 12, 5
    U, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((n, p)))
    X = np.sqrt(n) * U
    theta = np.array([1.0, -1.0, 0.0, 0.0, 0.0])
    loss = SquaredLoss(X, X @ theta)
    est, rep = witness(loss, lasso(p, [0, 1]), 0.05)
    assert rep.gauge_I_of_u_I == pytest.approx(0.0, abs=1e-8)
    assert rep.certified_unique


def test_witness_gauge_bounded_by_one_minus_half_tau():
    theta = np.array([1.0, 0.0])
    rho = lasso(2, [0])
    rng = np.random.default_rng(0)
    X = fixed_design(Q_HALF, 200, rng)
    tau = 0.5
    worst = 0.0
    for t in range(100):
        r = np.random.default_rng(1000 + t)
        y = X @ theta + 0.05 * r.standard_normal(200)
        loss = SquaredLoss(X, y)
        rep = certify(rho, Q_HALF, theta_star=theta, grad=loss.gradient(theta))
        lam = 1.5 * rep.lambda_lo
        _, w = witness(loss, rho, lam)
        worst = max(worst, w.gauge_I_of_u_I)
    assert worst <= 1 - tau / 2


def test_below_window_flagged():
    theta = np.array([1.0, 0.0])
    rho = lasso(2, [0])
    X = fixed_design(Q_HALF, 100, np.random.default_rng(1))
    y = X @ theta + np.random.default_rng(2).standard_normal(100)
    loss = SquaredLoss(X, y)
    rep = certify(rho, Q_HALF, theta_star=theta, grad=loss.gradient(theta))
    lam = 0.01 * rep.lambda_lo
    assert not theorem_error_bound(rep, lam).certified


def test_dual_certificate_uses_given_point():
    loss = QuadraticLoss(np.eye(2), [1.0, 0.2])
    rep = dual_certificate(loss, lasso(2, [0]), 0.5, np.array([0.5, 0.0]))
    assert rep.gauge_I_of_u_I == pytest.approx(0.4)
    assert rep.stationarity_residual < 1e-12


# -- converse --------------------------------------------------------------


def test_converse_violation():
    v, z = converse_violation(lasso(2, [0]), np.array([[1.0, 1.2], [1.2, 2.0]]), [1.0, 0.0])
    assert v == pytest.approx(1.2)
    v, _ = converse_violation(lasso(2, [0]), np.eye(2), [1.0, 0.0])
    assert v == 0.0
    rep = converse_check(lasso(2, [0]), np.eye(2), [1.0, 0.0], trials=5)
    assert not rep.applicable


def test_converse_small_run_is_deterministic():
    Q = np.array([[1.0, 1.25], [1.25, 2.0]])
    a = converse_check(lasso(2, [0]), Q, [1.0, 0.0], trials=20, seed=3, workers=1)
    b = converse_check(lasso(2, [0]), Q, [1.0, 0.0], trials=20, seed=3, workers=2)
    assert a.to_dict() == b.to_dict()


def test_wilson():
    lo, hi = wilson_interval(0, 10)
    assert lo == 0.0 and 0.25 < hi < 0.35
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(1 - hi)
