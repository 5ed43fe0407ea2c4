import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize, minimize_scalar

from gdpen.errors import InvalidSetError, OverlappingGroupsError, UnsupportedError
from gdpen.geometry import AtomPolytope, CoordBox, Subspace
from gdpen.penalties import (
    EstimandSpec,
    Penalty,
    analysis,
    custom,
    group_lasso,
    hybrid,
    lasso,
    make_penalty,
    penalty_value,
    prox,
    splitting,
    support_of,
)
from gdpen.geometry import support_value

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def test_values():
    rho = lasso(3, [0])
    assert penalty_value(rho, [2.0, 0.0, 0.0]) == 2.0
    assert support_value(rho.I, [2.0, 0.0, 0.0]) == 0.0
    assert penalty_value(group_lasso([[0, 1], [2, 3]], [0]), [3.0, 4.0, 0.0, 0.0]) == 5.0
    D = np.diff(np.eye(3), axis=0)
    assert penalty_value(analysis(D, lasso(2, [])), [1.0, 1.0, 2.0]) == 1.0


def test_value_zero_and_outside_S():
    S = Subspace.span(np.array([[1.0], [1.0], [0.0]]))
    rho = group_lasso([[0, 1], [2]], [0], subspace=S)
    assert penalty_value(rho, np.zeros(3)) == 0.0
    assert penalty_value(rho, [1.0, 0.0, 0.0]) == np.inf


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 5, elements=finite))
def test_value_on_model_is_active_norm(x):
    rho = lasso(5, [1, 3])
    theta = rho.M.project(x)
    assert penalty_value(rho, theta) == pytest.approx(np.abs(theta[[1, 3]]).sum(), abs=1e-12)


def test_model_subspaces():
    M = lasso(3, [0, 2]).M
    assert M.coords == (0, 2)
    rho = analysis(np.array([[1.0, -1.0]]), lasso(1, []))
    assert rho.M.dim == 1
    v = rho.M.basis[:, 0]
    assert abs(abs(v @ np.array([1.0, 1.0]) / np.sqrt(2)) - 1.0) < 1e-12
    assert lasso(4, range(4)).M.dim == 4


def _brute_prox_1d(v, t):
    return minimize_scalar(lambda x: 0.5 * (x - v) ** 2 + t * abs(x), bounds=(-10, 10),
                           method="bounded", options={"xatol": 1e-12}).x


def test_prox_lasso():
    rho = lasso(1, [])
    assert prox(rho, [1.0], 0.4)[0] == pytest.approx(0.6)
    for v, t in [(1.0, 0.4), (-2.3, 0.5), (0.1, 0.3), (3.0, 0.0)]:
        assert prox(rho, [v], t)[0] == pytest.approx(_brute_prox_1d(v, t), abs=1e-7)


def test_prox_group():
    rho = group_lasso([[0, 1]], [])
    v = np.array([1.2, -1.6])
    np.testing.assert_allclose(prox(rho, v, 0.5), 0.75 * v)
    np.testing.assert_array_equal(prox(rho, v, 0.0), v)
    for v in (np.array([0.3, -0.2]), np.array([2.0, 1.0]), np.array([-0.1, 4.0])):
        t = 0.7
        f = lambda x: 0.5 * np.sum((x - v) ** 2) + t * np.linalg.norm(x)
        # brute force on a fine grid, polished by Nelder-Mead
        g = np.linspace(-5, 5, 401)
        X, Y = np.meshgrid(g, g)
        vals = 0.5 * ((X - v[0]) ** 2 + (Y - v[1]) ** 2) + t * np.hypot(X, Y)
        k = np.unravel_index(np.argmin(vals), vals.shape)
        res = minimize(f, [X[k], Y[k]], method="Nelder-Mead",
                       options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 4000})
        assert f(prox(rho, v, t)) <= res.fun + 1e-12
        np.testing.assert_allclose(prox(rho, v, t), res.x, atol=1e-5)


def test_prox_needs_separable():
    rho = analysis(np.diff(np.eye(3), axis=0), lasso(2, []))
    with pytest.raises(UnsupportedError):
        prox(rho, np.zeros(3), 0.1)


def test_overlap_policy():
    with pytest.raises(OverlappingGroupsError):
        group_lasso([[0, 1], [1, 2]], [0])
    rho = group_lasso([[0, 1], [1, 2]], [0], overlap="duplicate")
    assert rho.p == 4


def test_I_must_contain_origin():
    with pytest.raises(InvalidSetError):
        custom(CoordBox(2, (0,)), AtomPolytope([[1.0, 0.0], [0.0, 1.0]]))


def test_hybrid_value():
    rho = hybrid(lasso(2, [0]), group_lasso([[0, 1]], []))
    assert penalty_value(rho, [1.0, -2.0, 3.0, 4.0]) == pytest.approx(3.0 + 5.0)
    L, g = splitting(rho)
    x = np.array([1.0, -2.0, 3.0, 4.0])
    assert g.value(L @ x) == pytest.approx(8.0)


def test_analysis_splitting_matches_value():
    rng = np.random.default_rng(0)
    D = rng.standard_normal((4, 3))
    rho = analysis(D, lasso(4, [0, 2]))
    L, g = splitting(rho)
    for _ in range(5):
        x = rng.standard_normal(3)
        assert g.value(L @ x) == pytest.approx(np.abs(D @ x).sum())
        assert penalty_value(rho, x) == pytest.approx(np.abs(D @ x).sum(), rel=1e-9)


def test_make_penalty_roundtrip(tmp_path):
    np.savetxt(tmp_path / "D.csv", np.diff(np.eye(4), axis=0), delimiter=",")
    spec = {"kind": "analysis", "D": "D.csv", "base": {"kind": "lasso", "p": 3, "active": [1]}}
    (tmp_path / "pen.json").write_text(json.dumps(spec))
    rho = make_penalty(json.loads((tmp_path / "pen.json").read_text()), base_dir=tmp_path)
    assert rho.kind == "analysis" and rho.p == 4
    g = make_penalty({"kind": "group_lasso", "groups": [[0, 1], [2]], "active": [1]})
    assert g.active_units == (1,)


def test_support_and_estimand():
    rho = lasso(4, [1])
    assert support_of(rho, [0.0, 2.0, 1e-8, -1.0]) == (1, 3)
    spec = EstimandSpec(4, [0.0, 1.0, 0.0, 0.0], [1])
    assert spec.active == (1,)
    with pytest.raises(ValueError):
        EstimandSpec(4, [0.0, 1.0, 0.0, 0.0], [2])


def test_with_active_keeps_family():
    rho = group_lasso([[0, 1], [2, 3]], [0])
    assert rho.with_active([1]).active_units == (1,)
    assert isinstance(rho.with_active(()), Penalty)
