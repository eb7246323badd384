import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from eventlqg.errors import DimensionMismatch, NonPositiveHorizon, NotPD, NotPSD
from eventlqg.model import (
    MatrixWorkspace, SystemModel, cholesky_factor, double_integrator, load_model,
    model_from_dict, quadratic_form, trace_product, validate_model,
)


def _di_model(**kw):
    d = dict(A=np.eye(2), B=[[0], [1]], Q=np.eye(2), QT=np.eye(2), R=1, Sigma_w=0.5 * np.eye(2),
             lam=100, T=25, x0_mean=np.zeros(2), x0_cov=np.eye(2))
    d.update(kw)
    return SystemModel(**d)


def test_case_study_parameters_accepted():
    m = validate_model(_di_model())
    assert m.T == 25 and m.lam == 100 and m.n == 2 and m.m == 1


def test_zero_R_rejected():
    with pytest.raises(NotPD):
        validate_model(_di_model(R=0))


def test_indefinite_Q_rejected():
    with pytest.raises(NotPSD) as exc:
        validate_model(_di_model(Q=np.diag([1.0, -0.5])))
    assert exc.value.name == "Q"


@pytest.mark.parametrize("kw, err", [
    (dict(B=[[0], [1], [2]]), DimensionMismatch),
    (dict(Q=np.eye(3)), DimensionMismatch),
    (dict(x0_mean=np.zeros(3)), DimensionMismatch),
    (dict(T=0), NonPositiveHorizon),
])
def test_invalid_models(kw, err):
    with pytest.raises(err):
        validate_model(_di_model(**kw))


def test_validate_symmetrizes_and_is_idempotent():
    Q = np.array([[2.0, 1.0], [0.0, 2.0]])
    m = validate_model(_di_model(Q=Q))
    np.testing.assert_array_equal(m.Q, [[2.0, 0.5], [0.5, 2.0]])
    m2 = validate_model(m)
    for name in ("A", "B", "Q", "QT", "R", "Sigma_w", "x0_mean", "x0_cov"):
        np.testing.assert_array_equal(getattr(m, name), getattr(m2, name))


def test_model_arrays_are_read_only():
    m = validate_model(_di_model())
    with pytest.raises(ValueError):
        m.A[0, 0] = 5.0


@pytest.mark.parametrize("x, M, expected", [
    ([1, 0], np.diag([3.0, 5.0]), 3.0),
    ([1, 1], [[1, 2], [2, 1]], 6.0),
    ([2], [[0.9]], 3.6),
])
def test_quadratic_form_examples(x, M, expected):
    assert quadratic_form(x, M) == pytest.approx(expected, rel=1e-15)


def test_quadratic_form_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        quadratic_form([1, 2], np.eye(3))


@pytest.mark.parametrize("M1, M2, expected", [
    (np.eye(2), np.diag([2.0, 3.0]), 5.0),
    ([[0, 1], [0, 0]], [[0, 0], [1, 0]], 1.0),
    ([[0.5]], [[0.5]], 0.25),
])
def test_trace_product_examples(M1, M2, expected):
    assert trace_product(M1, M2) == pytest.approx(expected, rel=1e-15)


def test_trace_product_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        trace_product(np.eye(2), np.eye(3))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8).flatmap(lambda n: st.tuples(
    arrays(float, n, elements=st.floats(-10, 10)),
    arrays(float, (n, n), elements=st.floats(-10, 10)))))
def test_quadratic_form_equals_trace_of_outer(data):
    x, M = data
    q = quadratic_form(x, M)
    t = trace_product(0.5 * (M + M.T), np.outer(x, x))
    assert abs(q - t) <= 1e-12 * max(1.0, np.sum(np.abs(M)) * np.sum(x * x))


@pytest.mark.parametrize("M, L", [
    (np.eye(3), np.eye(3)),
    (np.diag([4.0, 9.0]), np.diag([2.0, 3.0])),
    (np.zeros((2, 2)), np.zeros((2, 2))),
])
def test_cholesky_examples(M, L):
    np.testing.assert_allclose(cholesky_factor(M), L, atol=1e-15)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPSD):
        cholesky_factor(np.diag([1.0, -1.0]))


def test_cholesky_reconstructs_random_psd(rng):
    for i in range(1000):
        n = int(rng.integers(1, 9))
        r = int(rng.integers(0, n + 1)) if i % 2 else n
        G = rng.standard_normal((n, r))
        M = G @ G.T
        L = cholesky_factor(M)
        assert np.allclose(L, np.tril(L))
        assert np.linalg.norm(L @ L.T - M) <= 1e-10 * max(1.0, np.linalg.norm(M))


def test_workspace_shapes():
    ws = MatrixWorkspace(3, 2)
    assert ws.nn.shape == (3, 3) and ws.nm.shape == (3, 2)


def test_json_defaults(tmp_path):
    doc = {"A": [[1, 0.1], [0, 1]], "B": [[0.005], [0.1]], "Q": [[1, 0], [0, 1]], "R": [[1]],
           "Sigma_w": [[0.5, 0], [0, 0.5]], "lambda": 100, "T": 25}
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    m = load_model(p)
    np.testing.assert_array_equal(m.QT, m.Q)
    np.testing.assert_array_equal(m.x0_mean, [0, 0])
    np.testing.assert_array_equal(m.x0_cov, np.eye(2))
    assert m.seed is None


def test_json_round_trip():
    m = double_integrator()
    m2 = model_from_dict(json.loads(json.dumps(m.to_dict())))
    for name in ("A", "B", "Q", "QT", "R", "Sigma_w", "x0_mean", "x0_cov"):
        np.testing.assert_array_equal(getattr(m, name), getattr(m2, name))
    assert m2.lam == m.lam and m2.T == m.T


def test_json_scalar_entries():
    m = model_from_dict({"A": 1, "B": 1, "Q": 1, "R": 1, "Sigma_w": 0.5, "lambda": 0.3, "T": 2,
                         "seed": 7})
    assert m.A.shape == (1, 1) and m.seed == 7
