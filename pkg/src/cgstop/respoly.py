"""Residual polynomials of the CG iteration.

The residual ``Y - A f_k`` equals ``r_k(AA^T) Y`` for the degree-``k``
polynomial ``r_k`` with ``r_k(0) = 1`` minimising ``|p(AA^T) Y|``. Its zeros
are the Ritz values of the Lanczos process on ``A^T A`` started at
``A^T Y``; they are read off the tridiagonal matrix assembled from the CG
step and conjugation coefficients. Interpolated polynomials
``r_t = (1 - a) r_k + a r_{k+1}`` are evaluated in product form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal
from scipy.optimize import brentq

from . import _kernels
from .cgne import CgTrajectory
from .exceptions import DiagnosticsError, ProblemError
from .export import write_csv

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ResidualPolyDiag:
    """Zeros, ``|r_k'(0)|`` and leading coefficients for ``k = 0..T``.

    ``zeros[k]`` is the ascending array of the ``k`` zeros of ``r_k``
    (empty for ``k = 0``).
    """

    zeros: tuple
    deriv0_per_k: np.ndarray
    leading_coeff_per_k: np.ndarray
    terminal_index: int
    scale: float

    def smallest_zero_per_k(self) -> np.ndarray:
        return np.array([z[0] if z.size else np.inf for z in self.zeros])


def lanczos_tridiagonal(alphas, betas):
    """Diagonal and off-diagonal of the Lanczos matrix implied by CG coefficients."""
    alphas = np.asarray(alphas, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    n = alphas.size
    diag = 1.0 / alphas
    diag[1:] += betas[: n - 1] / alphas[: n - 1]
    off = np.sqrt(betas[: n - 1]) / alphas[: n - 1]
    return diag, off


def build_diagnostics(traj: CgTrajectory) -> ResidualPolyDiag:
    T = traj.terminal_index
    diag, off = lanczos_tridiagonal(traj.alphas[:T], traj.betas[:T])
    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(off))):
        raise DiagnosticsError("non-finite CG coefficients")
    zeros = [np.empty(0)]
    deriv = np.zeros(T + 1)
    lead = np.ones(T + 1)
    for k in range(1, T + 1):
        try:
            z = eigvalsh_tridiagonal(diag[:k], off[: k - 1])
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise DiagnosticsError(f"tridiagonal eigen-solve failed at k={k}") from exc
        z = np.sort(z)
        z.setflags(write=False)
        zeros.append(z)
        deriv[k] = float(np.sum(1.0 / z))
        lead[k] = float(np.prod(-1.0 / z))
    scale = float(zeros[T][-1]) if T > 0 else 1.0
    return ResidualPolyDiag(
        zeros=tuple(zeros),
        deriv0_per_k=deriv,
        leading_coeff_per_k=lead,
        terminal_index=T,
        scale=scale,
    )


def eval_rk(diag: ResidualPolyDiag, k: int, x) -> np.ndarray:
    return _kernels.product_form(diag.zeros[k], x)


def _split(diag: ResidualPolyDiag, t):
    T = diag.terminal_index
    t = float(t)
    if not (0.0 <= t <= T):
        raise ValueError(f"t={t} outside [0, {T}]")
    k = min(int(math.floor(t)), T)
    return k, t - k


def eval_rt(diag: ResidualPolyDiag, t, x):
    """``r_t(x) = (1 - a) r_k(x) + a r_{k+1}(x)`` for ``t = k + a``."""
    k, a = _split(diag, t)
    x = np.asarray(x, dtype=np.float64)
    if a == 0.0:
        out = eval_rk(diag, k, x)
    else:
        out = (1.0 - a) * eval_rk(diag, k, x) + a * eval_rk(diag, k + 1, x)
    return out if out.ndim else float(out)


def smallest_zero(diag: ResidualPolyDiag, t) -> float:
    """Smallest positive zero ``x_{1,t}`` of the interpolated polynomial.

    Inside ``(k, k+1)`` the zero lies strictly between ``x_{1,k+1}`` and
    ``x_{1,k}``; a bracket without sign change means the zeros do not
    interlace and is reported as :class:`DiagnosticsError`.
    """
    k, a = _split(diag, t)
    if k == 0 and a == 0.0:
        raise ValueError("r_0 has no zeros")
    if a == 0.0:
        return float(diag.zeros[k][0])
    if k == 0:
        return float(diag.zeros[1][0] / a)
    lo = float(diag.zeros[k + 1][0])
    hi = float(diag.zeros[k][0])
    xtol = 1e-13 * diag.scale
    if hi - lo <= xtol:
        log.info("degenerate zero bracket at t=%g (width %.3g)", t, hi - lo)
        return 0.5 * (lo + hi)

    def fn(x):
        return (1.0 - a) * float(eval_rk(diag, k, x)) + a * float(eval_rk(diag, k + 1, x))

    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if not (flo > 0.0 > fhi):
        raise DiagnosticsError(
            f"no sign change of r_t on [{lo:.6g}, {hi:.6g}] at t={t} (values {flo:.3g}, {fhi:.3g})"
        )
    return float(brentq(fn, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))


def deriv0(diag: ResidualPolyDiag, t) -> float:
    """``|r_t'(0)|``, linear in ``a`` between integer indices."""
    k, a = _split(diag, t)
    d = diag.deriv0_per_k
    if a == 0.0:
        return float(d[k])
    return float((1.0 - a) * d[k] + a * d[k + 1])


def zeros_at(diag: ResidualPolyDiag, t) -> np.ndarray:
    """All zeros of ``r_t`` below ``|AA^T|``; interior points solved by bracketing."""
    k, a = _split(diag, t)
    if a == 0.0:
        return np.array(diag.zeros[k])
    if k == 0:
        return np.array([diag.zeros[1][0] / a])
    zk, zk1 = diag.zeros[k], diag.zeros[k + 1]
    uppers = np.append(zk, np.inf)

    def fn(x):
        return (1.0 - a) * float(eval_rk(diag, k, x)) + a * float(eval_rk(diag, k + 1, x))

    out = []
    for i in range(k + 1):
        lo, hi = float(zk1[i]), float(uppers[i])
        if not np.isfinite(hi):
            # r_t is a polynomial of degree k+1 whose largest zero exceeds x_{k+1,k+1}
            hi = lo * 2.0
            while np.sign(fn(hi)) == np.sign(fn(lo)) and hi < 1e300:
                hi *= 2.0
        flo, fhi = fn(lo), fn(hi)
        if flo == 0.0:
            out.append(lo)
            continue
        if np.sign(flo) == np.sign(fhi):
            raise DiagnosticsError(f"zero {i} of r_t not bracketed at t={t}")
        out.append(brentq(fn, lo, hi, xtol=1e-13 * diag.scale, rtol=4 * np.finfo(float).eps))
    return np.array(out)


def penalised_alpha(lambda_pen, R_k_sq, R_k1_sq, leading) -> float:
    """Interpolation weight of the leading-coefficient-penalised minimiser."""
    if lambda_pen < 0:
        raise ValueError("penalty must be nonnegative")
    drop = R_k_sq - R_k1_sq
    if not drop > 0:
        raise ValueError("requires R_k^2 > R_{k+1}^2")
    if math.isinf(lambda_pen):
        return 0.0
    return float(drop / (drop + lambda_pen * leading * leading))


class BruteForcePoly(NamedTuple):
    coeffs: np.ndarray
    roots: np.ndarray
    min_value: float


def brute_force_residual_poly(problem, run, k, dps=60) -> BruteForcePoly:
    """Minimise ``sum_i p(lambda_i^2)^2 Y_i^2`` over ``p(0) = 1``, ``deg p <= k``.

    Independent of CG: the normal equations in the monomial basis of
    ``x / lambda_1^2`` are formed explicitly and solved in ``dps``-digit
    arithmetic. Only for problems with at most 12 distinct singular values.

    Returns
    -------
    BruteForcePoly
        ``coeffs[j]`` multiplies ``x**j`` (``coeffs[0] == 1``); ``roots``
        sorted ascending; ``min_value`` the attained minimum.
    """
    import mpmath

    d = problem.distinct_count()
    if d > 12:
        raise ProblemError(f"brute-force oracle limited to d <= 12 distinct singular values, got {d}")
    k = int(k)
    if not 0 <= k <= d:
        raise ProblemError(f"need 0 <= k <= d={d}, got {k}")
    lam = problem.singular_values
    y = run.y_svd
    if k == 0:
        return BruteForcePoly(np.array([1.0]), np.empty(0), float(y @ y))
    with mpmath.workdps(dps):
        s = mpmath.mpf(float(lam[0])) ** 2
        z = [mpmath.mpf(float(v)) ** 2 / s for v in lam]
        w = [mpmath.mpf(float(v)) ** 2 for v in y]
        # p(z) = 1 + sum_j c_j z^j; normal system M c = -b
        M = mpmath.matrix(k, k)
        b = mpmath.matrix(k, 1)
        for j in range(1, k + 1):
            b[j - 1] = mpmath.fsum(wi * zi**j for wi, zi in zip(w, z))
            for l in range(1, k + 1):
                M[j - 1, l - 1] = mpmath.fsum(wi * zi ** (j + l) for wi, zi in zip(w, z))
        c = mpmath.lu_solve(M, -b)
        scaled = [mpmath.mpf(1)] + [c[j] for j in range(k)]
        val = mpmath.fsum(
            wi * (mpmath.fsum(scaled[j] * zi**j for j in range(k + 1))) ** 2 for wi, zi in zip(w, z)
        )
        roots = mpmath.polyroots(list(reversed(scaled)), maxsteps=400, extraprec=4 * dps)
        roots = sorted(float(mpmath.re(r)) * float(s) for r in roots)
        coeffs = np.array([float(scaled[j] / s**j) for j in range(k + 1)])
    return BruteForcePoly(coeffs, np.array(roots), float(val))


DIAGNOSTIC_COLUMNS = ("k", "x1", "deriv0", "leading_coeff")


def write_diagnostics_csv(path, diag: ResidualPolyDiag, header_line=None):
    rows = (
        (k, diag.zeros[k][0] if k else float("nan"), diag.deriv0_per_k[k], diag.leading_coeff_per_k[k])
        for k in range(diag.terminal_index + 1)
    )
    write_csv(path, DIAGNOSTIC_COLUMNS, rows, header_line)
