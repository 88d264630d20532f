import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgstop.exceptions import AssumptionYViolated, ProblemError
from cgstop.noise import NoiseModel, NoiseSpec, check_assumption_y, observe, sample_noise, standard_normals
from cgstop.problem import make_polynomial_decay_problem


def test_expected_noise_energy():
    # E|xi|^2 = delta^2 D = 1 for delta = 0.01, D = 10000
    energies = np.array([
        np.sum(sample_noise(NoiseSpec("gaussian", 0.01, 7, i), 10000) ** 2) for i in range(1000)
    ])
    se = energies.std(ddof=1) / np.sqrt(energies.size)
    assert abs(energies.mean() - 1.0) <= 3 * se


def test_standard_normal_moments():
    z = standard_normals(1, 2, 200001)
    assert z.size == 200001
    assert abs(z.mean()) < 5 / np.sqrt(z.size)
    assert abs(z.var() - 1) < 0.02


@given(st.integers(0, 2**63), st.integers(0, 2**40), st.integers(1, 50))
@settings(max_examples=30, deadline=None)
def test_replay_is_bitwise_identical(seed, run, n):
    a = standard_normals(seed, run, n)
    b = standard_normals(seed, run, n)
    assert a.tobytes() == b.tobytes()
    assert np.all(np.isfinite(a))


def test_runs_are_distinct():
    assert not np.array_equal(standard_normals(0, 0, 8), standard_normals(0, 1, 8))
    assert not np.array_equal(standard_normals(0, 0, 8), standard_normals(1, 0, 8))


def test_noise_scales_linearly_in_delta():
    a = sample_noise(NoiseSpec("gaussian", 1.0, 3, 4), 50)
    b = sample_noise(NoiseSpec("gaussian", 1e-6, 3, 4), 50)
    np.testing.assert_allclose(b, 1e-6 * a, rtol=1e-15)


def test_deterministic_noise_has_exact_norm():
    xi = sample_noise(NoiseSpec(NoiseModel.DETERMINISTIC, 0.3, 0, 0), 40)
    assert np.linalg.norm(xi) == pytest.approx(0.3, rel=1e-14)
    d = np.zeros(5)
    d[2] = -4.0
    np.testing.assert_allclose(sample_noise(NoiseSpec("deterministic", 0.5), 5, direction=d), [0, 0, -0.5, 0, 0])
    with pytest.raises(ProblemError):
        sample_noise(NoiseSpec("deterministic", 0.5), 5, direction=np.zeros(5))


def test_noise_spec_validation():
    for bad in (0.0, -1.0, np.inf, np.nan):
        with pytest.raises(ProblemError):
            NoiseSpec("gaussian", bad)
    with pytest.raises(ValueError):
        NoiseSpec("laplace", 0.1)


def test_observe_noiseless_and_diagonal_coordinates():
    pr = make_polynomial_decay_problem(6, 0.5, signal=np.arange(1.0, 7.0))
    run = observe(pr, np.zeros(6))
    np.testing.assert_array_equal(run.y, pr.singular_values * pr.signal)
    xi = standard_normals(0, 0, 6)
    run = observe(pr, xi)
    np.testing.assert_array_equal(run.y_svd, run.y)
    assert run.y_perp_sq == 0.0
    with pytest.raises(ProblemError):
        observe(pr, np.zeros(5))


def test_assumption_y_blocks():
    lam = np.array([1.0, 0.5, 0.5, 0.2])
    check_assumption_y(lam, np.array([1.0, 0.0, 1e-3, 2.0]))
    with pytest.raises(AssumptionYViolated) as err:
        check_assumption_y(lam, np.array([1.0, 0.0, 0.0, 2.0]))
    assert err.value.indices == (1, 2)
    assert err.value.singular_value == 0.5
