import numpy as np
import pytest

from cgstop.exceptions import ProblemError
from cgstop.problem import (
    SignalKind, SourceCondition, apply_adjoint, apply_forward, gravity_matrix, load_matrix,
    make_dense_problem, make_gravity_problem, make_polynomial_decay_problem, make_test_signal,
    minimum_norm_solution, save_matrix, source_norm, to_spectral,
)


def test_singular_values_examples():
    pr = make_polynomial_decay_problem(10000, 0.5, signal=np.ones(10000))
    lam = pr.singular_values
    assert lam[0] == 1.0 and lam[3] == 0.5 and lam[-1] == pytest.approx(0.01, rel=1e-15)
    assert np.all(make_polynomial_decay_problem(7, 0.0, scale=3.0, signal=np.ones(7)).singular_values == 3.0)
    np.testing.assert_allclose(
        make_polynomial_decay_problem(5, 1.0, scale=2.0, signal=np.ones(5)).singular_values,
        [2, 1, 2 / 3, 1 / 2, 2 / 5], rtol=1e-15)


def test_test_signals_first_coefficient():
    assert make_test_signal(SignalKind.SUPERSMOOTH, 5)[0] == pytest.approx(5 * np.exp(-0.1), rel=1e-12)
    assert make_test_signal("smooth", 5)[0] == pytest.approx(5000 * abs(np.sin(0.01)), rel=1e-12)
    assert make_test_signal("rough", 5)[0] == pytest.approx(250 * abs(np.sin(0.002)), rel=1e-12)
    assert make_test_signal("rough", 5)[0] == pytest.approx(0.5, abs=1e-3)


def test_unknown_signal_rejected():
    with pytest.raises((ProblemError, ValueError)):
        make_test_signal("wiggly", 10)


def test_diagonal_forward_and_adjoint():
    pr = make_polynomial_decay_problem(6, 1.0, signal=np.ones(6))
    e1 = np.eye(6)[0]
    np.testing.assert_array_equal(apply_forward(pr, e1), pr.singular_values[0] * e1)
    iso = make_polynomial_decay_problem(6, 0.0, signal=np.ones(6))
    x = np.arange(6.0)
    np.testing.assert_array_equal(apply_adjoint(iso, apply_forward(iso, x)), x)
    np.testing.assert_allclose(pr.g, pr.singular_values * pr.signal)


def test_minimum_norm_solution_square_and_tail():
    sig = np.arange(1.0, 7.0)
    pr = make_polynomial_decay_problem(6, 0.5, signal=sig)
    np.testing.assert_array_equal(minimum_norm_solution(pr), sig)
    tail = make_polynomial_decay_problem(4, 0.5, signal=sig)
    fd = minimum_norm_solution(tail)
    np.testing.assert_array_equal(fd[:4], sig[:4])
    assert np.all(fd[4:] == 0)


def test_source_norm_and_condition():
    pr = make_polynomial_decay_problem(4, 1.0, signal=np.array([1.0, 1.0, 0.0, 0.0]))
    # lambda_2 = 1/2, lambda^{-4 mu} with mu = 1/4 is 1/lambda
    assert source_norm(pr, 0.25) == pytest.approx(np.sqrt(1 + 2.0))
    assert SourceCondition(0.25, 2.0).holds_for(pr)
    assert not SourceCondition(0.25, 1.5).holds_for(pr)
    with pytest.raises(ProblemError):
        SourceCondition(0.25, 0.5)


def test_gravity_leading_singular_value_matches_power_iteration():
    A = gravity_matrix(64, 0.25)
    pr = make_gravity_problem(64, 0.25)
    v = np.ones(64)
    for _ in range(2000):
        v = A.T @ (A @ v)
        v /= np.linalg.norm(v)
    lam1 = np.linalg.norm(A @ v)
    assert pr.singular_values[0] == pytest.approx(lam1, rel=1e-8)
    assert np.all(np.diff(pr.singular_values) <= 0)


def test_gravity_kernel_vanishes_with_depth():
    assert np.linalg.norm(gravity_matrix(32, 50.0), 2) < 1e-3 * np.linalg.norm(gravity_matrix(32, 0.25), 2)


def test_dense_problem_spectral_round_trip():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((12, 12))
    sig = rng.standard_normal(12)
    pr = make_dense_problem(M, sig)
    np.testing.assert_allclose(pr.g, M @ sig, atol=1e-12)
    np.testing.assert_allclose(to_spectral(pr, pr.g), pr.g_coeffs, atol=1e-12)
    np.testing.assert_allclose(minimum_norm_solution(pr), sig, atol=1e-10)


def test_matrix_cache_round_trip(tmp_path):
    A = gravity_matrix(16, 0.25)
    path = tmp_path / "g.bin"
    save_matrix(path, A, 0.25)
    B, header = load_matrix(path)
    np.testing.assert_array_equal(A, B)
    assert header == (16, 0.25)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ProblemError):
        load_matrix(path)


def test_invalid_construction():
    with pytest.raises(ProblemError):
        make_polynomial_decay_problem(0, 0.5)
    with pytest.raises(ProblemError):
        make_polynomial_decay_problem(5, 0.5, signal=np.ones(3))
