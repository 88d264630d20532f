"""Error decomposition along the interpolated CG path.

All spectral quantities are computed in SVD coordinates. With
``rho_i = r_t(lambda_i^2) 1(lambda_i^2 < x_{1,t})`` the stochastic and
approximation error terms are

    S_t = sum_i (1 - rho_i) xi_i^2
    A_t = sum_i rho_i g_i^2 + R_t^2 - sum_i rho_i Y_i^2

and the prediction error splits exactly as ``A_t + S_t - 2 <xi, r_{t,>} Y>``.

Below ``x_{1,t}`` every factor of the product form of ``r_t`` lies in
(0, 1], so ``rho`` is evaluated from the zeros. Above it the product form
loses all accuracy once Ritz values have converged (a tiny factor times a
huge one), so ``r_{t,>} Y`` is taken from the recorded residual vector,
which equals ``r_t(AA^T) Y`` by construction.

For dense problems whose SVD was rank-truncated the residual part outside
the retained singular vectors (``run.y_perp_sq``) is subtracted from ``R_t^2``
so that every identity refers to the same spectral data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cgne import CgTrajectory, interpolated_estimate, interpolated_residual, residual_sq_at
from .exceptions import NotBalanced
from .export import write_csv
from .noise import ObservationRun
from .problem import ForwardProblem, minimum_norm_solution
from .respoly import ResidualPolyDiag, eval_rt, smallest_zero
from . import _kernels


class SpectralTerms(NamedTuple):
    """Per-coordinate values of ``r_t`` split at its smallest zero."""

    r: np.ndarray
    below: np.ndarray  # lambda_i^2 < x_{1,t}
    above: np.ndarray  # lambda_i^2 > x_{1,t}
    x1: float


def spectral_residual_sq(run: ObservationRun, traj: CgTrajectory, t) -> float:
    return residual_sq_at(traj, t) - run.y_perp_sq


def spectral_terms(problem: ForwardProblem, diag: ResidualPolyDiag, t) -> SpectralTerms:
    lam_sq = problem.singular_values ** 2
    if t == 0:
        ones = np.ones_like(lam_sq)
        return SpectralTerms(ones, np.ones(lam_sq.shape, bool), np.zeros(lam_sq.shape, bool), math.inf)
    x1 = smallest_zero(diag, t)
    r = np.asarray(eval_rt(diag, t, lam_sq))
    return SpectralTerms(r, lam_sq < x1, lam_sq > x1, x1)


def _terms(problem, run, traj, diag, t):
    sp = spectral_terms(problem, diag, t)
    rho = np.where(sp.below, sp.r, 0.0)
    xi, y, g = run.xi_svd, run.y_svd, problem.g_coeffs
    S = float(np.sum((1.0 - rho) * xi * xi))
    A = float(np.sum(rho * g * g) + spectral_residual_sq(run, traj, t) - np.sum(rho * y * y))
    res = _spectral(problem, interpolated_residual(traj, t))
    remainder = float(np.sum(np.where(sp.above, xi * res, 0.0)))
    return S, A, remainder


def error_terms_at(problem, run, traj, diag, t) -> tuple[float, float]:
    """Stochastic and approximation error terms ``(S_t, A_t)``."""
    S, A, _ = _terms(problem, run, traj, diag, t)
    return S, A


class DecompositionCheck(NamedTuple):
    lhs: float  # |A(f_t - f)|^2 in spectral coordinates
    rhs: float  # A_t + S_t
    remainder: float  # <xi, r_{t,>} Y>

    @property
    def gap(self) -> float:
        return self.lhs - (self.rhs - 2.0 * self.remainder)

    def holds(self, scale, rel_tol=1e-9) -> bool:
        """Identity to ``rel_tol * scale`` and the bound ``lhs <= 2 (A + S)``."""
        tol = rel_tol * scale
        return abs(self.gap) <= tol and self.lhs <= 2.0 * self.rhs + tol


def decomposition_check(problem, run, traj, diag, t) -> DecompositionCheck:
    """Evaluate both sides of ``|A(f_t - f)|^2 = A_t + S_t - 2 <xi, r_{t,>} Y>``.

    The left side is computed from the interpolated residual vector, not from
    the polynomial, so the identity is a genuine cross-check.
    """
    S, A, remainder = _terms(problem, run, traj, diag, t)
    fitted = run.y_svd - _spectral(problem, interpolated_residual(traj, t))
    e = fitted - problem.g_coeffs
    return DecompositionCheck(float(e @ e), S + A, remainder)


def _spectral(problem, v):
    if problem.is_diagonal:
        return v
    return problem.left_vectors.T @ v


def balanced_identity_gap(problem, run, traj, diag, grid) -> float:
    """Max over ``grid`` of ``|R_t^2 - |xi|^2 - 2<xi, r_{t,<} g> - (A_t - S_t)|``."""
    worst = 0.0
    xi, g = run.xi_svd, problem.g_coeffs
    for t in grid:
        S, A = error_terms_at(problem, run, traj, diag, t)
        sp = spectral_terms(problem, diag, t)
        rho = np.where(sp.below, sp.r, 0.0)
        lhs = spectral_residual_sq(run, traj, t) - float(xi @ xi) - 2.0 * float(np.sum(xi * rho * g))
        worst = max(worst, abs(lhs - (A - S)))
    return worst


def balanced_oracle(problem, run, traj, diag, points_per_interval=20, tol=1e-10) -> float:
    """First ``t`` with ``A_t <= S_t``.

    Each unit interval is scanned on ``points_per_interval`` sub-points; the
    first sign change of ``A_t - S_t`` is then refined by bisection to
    ``tol``. Raises :class:`NotBalanced` if no crossing is found on [0, T].
    """
    def gap(t):
        S, A = error_terms_at(problem, run, traj, diag, t)
        return A - S

    if gap(0.0) <= 0.0:
        return 0.0
    T = traj.terminal_index
    prev = 0.0
    for k in range(T):
        for j in range(1, points_per_interval + 1):
            t = k + j / points_per_interval
            if gap(t) <= 0.0:
                lo, hi = prev, t
                while hi - lo > tol:
                    mid = 0.5 * (lo + hi)
                    if gap(mid) <= 0.0:
                        hi = mid
                    else:
                        lo = mid
                return hi
            prev = t
    raise NotBalanced(T)


def prediction_error(problem, run, traj, t) -> float:
    """``|A f_t - g|^2`` in native coordinates."""
    e = run.y - interpolated_residual(traj, t) - problem.g
    return float(e @ e)


def reconstruction_error(problem, run, traj, t) -> float:
    """``|f_t - f^+|^2`` in native coordinates."""
    e = interpolated_estimate(traj, t) - minimum_norm_solution(problem)
    return float(e @ e)


def _argmin_path(e0_rows, d_rows):
    """Exact minimiser over ``t`` of ``|e_k + a d_k|^2`` for all unit intervals."""
    a, val = _kernels.interval_minima(np.ascontiguousarray(e0_rows), np.ascontiguousarray(d_rows))
    j = int(np.argmin(val))
    # ties resolve to the smaller t; a = 1 on interval j equals a = 0 on j + 1
    return j + float(a[j]), float(max(val[j], 0.0))


def oracle_indices(problem, run, traj) -> tuple[float, float]:
    """Path-optimal indices ``(t_w, t_s)`` for prediction and reconstruction error."""
    (t_w, _), (t_s, _) = oracle_minima(problem, run, traj)
    return t_w, t_s


def oracle_minima(problem, run, traj):
    """``((t_w, min pred err^2), (t_s, min rec err^2))`` over ``[0, T]``."""
    T = traj.terminal_index
    fitted = run.y[None, :] - traj.residuals
    pe = fitted - problem.g[None, :]
    re = traj.iterates - minimum_norm_solution(problem)[None, :]
    if T == 0:
        return (0.0, float(pe[0] @ pe[0])), (0.0, float(re[0] @ re[0]))
    w = _argmin_path(pe[:-1], np.diff(pe, axis=0))
    s = _argmin_path(re[:-1], np.diff(re, axis=0))
    return w, s


def showalter_estimate(problem, run, s) -> np.ndarray:
    """Gradient-flow estimator ``A^+ (1 - exp(-s AA^T)) Y`` in native coordinates."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    lam = problem.singular_values
    coeffs = -np.expm1(-s * lam * lam) * run.y_svd / lam
    if problem.is_diagonal:
        out = np.zeros(problem.P)
        out[: problem.D] = coeffs
        return out
    return problem.right_vectors @ coeffs


def showalter_bias_variance(problem, run, s) -> tuple[float, float]:
    """Squared bias ``|e^{-sx} g|^2`` and noise part ``|(1 - e^{-sx}) xi|^2``."""
    lam_sq = problem.singular_values ** 2
    damp = np.exp(-s * lam_sq)
    return float(np.sum((damp * problem.g_coeffs) ** 2)), float(np.sum(((1.0 - damp) * run.xi_svd) ** 2))


@dataclass(frozen=True, eq=False)
class ErrorCurves:
    grid_t: np.ndarray
    S: np.ndarray
    A: np.ndarray
    pred_err: np.ndarray
    rec_err: np.ndarray
    cross_gt: np.ndarray
    tau: float | None = None
    balanced_oracle: float | None = None
    t_pred_oracle: float | None = None
    t_rec_oracle: float | None = None
    flags: dict = field(default_factory=dict)

    @property
    def M(self) -> np.ndarray:
        """``max(A_t, S_t)``."""
        return np.maximum(self.A, self.S)


def default_grid(T, points_per_interval=20) -> np.ndarray:
    if T == 0:
        return np.zeros(1)
    n = points_per_interval + 1
    pieces = [np.linspace(k, k + 1, n)[:-1] for k in range(T)]
    return np.append(np.concatenate(pieces), float(T))


def error_curves(problem, run, traj, diag, grid=None, points_per_interval=20, tau=None) -> ErrorCurves:
    if grid is None:
        grid = default_grid(traj.terminal_index, points_per_interval)
    grid = np.asarray(grid, dtype=np.float64)
    S = np.empty(grid.size)
    A = np.empty(grid.size)
    cross = np.empty(grid.size)
    pred = np.empty(grid.size)
    rec = np.empty(grid.size)
    for i, t in enumerate(grid):
        S[i], A[i], cross[i] = _terms(problem, run, traj, diag, t)
        pred[i] = prediction_error(problem, run, traj, t)
        rec[i] = reconstruction_error(problem, run, traj, t)
    flags = {}
    try:
        t_b = balanced_oracle(problem, run, traj, diag, points_per_interval)
    except NotBalanced:
        t_b = float(traj.terminal_index)
        flags["not_balanced"] = True
    t_w, t_s = oracle_indices(problem, run, traj)
    return ErrorCurves(grid, S, A, pred, rec, cross, tau, t_b, t_w, t_s, flags)


CURVE_COLUMNS = ("t", "S", "A", "pred_err", "rec_err", "cross")


def write_curves_csv(path, curves: ErrorCurves, header_line=None):
    rows = zip(curves.grid_t, curves.S, curves.A, curves.pred_err, curves.rec_err, curves.cross_gt)
    write_csv(path, CURVE_COLUMNS, rows, header_line)
