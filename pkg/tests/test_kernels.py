import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgstop import _kernels
from cgstop.experiments import ExperimentConfig, ProblemSpec, simulate_run

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not importable")
IMPLS = [_kernels.numpy_impl] + ([_kernels.numba_impl] if _kernels.HAVE_NUMBA else [])


def cg_inputs(D, seed):
    rng = np.random.default_rng(seed)
    lam = np.arange(1, D + 1, dtype=float) ** -0.5
    r = rng.standard_normal(D)
    p = lam * r
    return lam, np.zeros(D), r, p, float(p @ p), np.empty(D)


@pytest.mark.parametrize("impl", IMPLS, ids=lambda i: i.name)
def test_cg_advance_single_step(impl):
    lam, f, r, p, gamma, s = cg_inputs(30, 0)
    r0 = r.copy()
    alpha, rsq, qq = impl.diag_cg_advance(lam, f, r, p, gamma, s)
    assert qq == pytest.approx(np.sum((lam * p) ** 2), rel=1e-13)
    assert alpha == pytest.approx(gamma / qq, rel=1e-13)
    np.testing.assert_allclose(f, alpha * p, rtol=1e-14)
    np.testing.assert_allclose(r, r0 - alpha * lam * p, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(s, lam * r, rtol=1e-14)
    assert rsq == pytest.approx(r @ r, rel=1e-13)


@pytest.mark.parametrize("impl", IMPLS, ids=lambda i: i.name)
def test_cg_advance_zero_curvature_leaves_state(impl):
    lam, f, r, p, gamma, s = cg_inputs(5, 1)
    p[:] = 0.0
    before = (f.copy(), r.copy())
    alpha, rsq, qq = impl.diag_cg_advance(lam, f, r, p, gamma, s)
    assert np.isnan(alpha) and qq == 0.0
    np.testing.assert_array_equal(f, before[0])
    np.testing.assert_array_equal(r, before[1])


@needs_numba
@given(st.integers(1, 400), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_backends_agree_on_cg_step(D, seed):
    a = cg_inputs(D, seed)
    b = cg_inputs(D, seed)
    out_a = _kernels.numpy_impl.diag_cg_advance(*a)
    out_b = _kernels.numba_impl.diag_cg_advance(*b)
    np.testing.assert_allclose(out_a, out_b, rtol=1e-12)
    for x, y in zip(a[1:4], b[1:4]):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-15)


@needs_numba
@given(st.lists(st.floats(1e-4, 1.0), min_size=0, max_size=20), st.integers(1, 200))
@settings(max_examples=40, deadline=None)
def test_backends_agree_on_product_form(zeros, n):
    z = np.sort(np.array(zeros, dtype=float))
    x = np.linspace(0, 1.2, n)
    a = _kernels.numpy_impl.product_form(z, x)
    b = _kernels.numba_impl.product_form(z, x)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)
    if z.size == 0:
        np.testing.assert_array_equal(a, 1.0)


@needs_numba
@given(st.integers(1, 30), st.integers(1, 100), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_backends_agree_on_interval_minima(rows, cols, seed):
    rng = np.random.default_rng(seed)
    e0, d = rng.standard_normal((rows, cols)), rng.standard_normal((rows, cols))
    d[0] = 0.0
    a1, v1 = _kernels.numpy_impl.interval_minima(e0, d)
    a2, v2 = _kernels.numba_impl.interval_minima(e0, d)
    np.testing.assert_allclose(a1, a2, rtol=1e-10, atol=1e-14)
    floor = 1e-13 * np.max(np.sum(e0 * e0, axis=1) + np.sum(d * d, axis=1))
    np.testing.assert_allclose(v1, v2, rtol=1e-10, atol=floor)
    assert a1[0] == 0.0
    assert np.all((a1 >= 0) & (a1 <= 1))
    # brute force over a fine grid never beats the exact minimum
    grid = np.linspace(0, 1, 2001)
    brute = np.min(np.sum((e0[:, None, :] + grid[None, :, None] * d[:, None, :]) ** 2, axis=2), axis=1)
    assert np.all(v1 <= brute * (1 + 1e-12) + floor)


@needs_numba
def test_full_run_backend_equivalence(monkeypatch):
    cfg = ExperimentConfig(problem=ProblemSpec(signal="rough", D=10000), n_runs=1)
    problem = cfg.problem.build()
    out = []
    for impl in (_kernels.numpy_impl, _kernels.numba_impl):
        for name in ("diag_cg_advance", "product_form", "interval_minima"):
            monkeypatch.setattr(_kernels, name, getattr(impl, name))
        rec = simulate_run(problem, cfg, 3)
        out.append(np.array([rec.tau, rec.pred_err_tau, rec.rec_err_tau, rec.t_w, rec.t_s]))
    np.testing.assert_allclose(out[0], out[1], rtol=1e-10)


def test_env_var_selects_numpy_backend():
    env = dict(os.environ, CGSTOP_DISABLE_NUMBA="1")
    res = subprocess.run([sys.executable, "-c", "from cgstop import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "numpy"
