"""Conjugate gradients on the normal equation with interpolated iterates.

The recursion is the standard CGLS form of CG applied to
``A^T A f = A^T Y`` started at ``f_0 = 0``. Besides the iterates, every run
records the residual vectors ``Y - A f_k``, the squared residual and normal
residual norms, and the step/conjugation coefficients that the
residual-polynomial diagnostics need.

By default each new normal residual ``A^T r_k`` is reorthogonalised against
all previous ones (classical Gram-Schmidt, applied twice). Without it,
rounding errors are amplified once the first Ritz values converge and the
iterates drift far from the exact-arithmetic Krylov iterates the stopping
theory describes (relative residual errors of 10-25 % after 15 steps on the
``i^-1/2`` test spectrum, against 1e-16 with reorthogonalisation).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exceptions import ProblemError, StoppingNotReached
from .export import write_csv
from .noise import ObservationRun
from .problem import ForwardProblem

log = logging.getLogger(__name__)


class Termination(str, enum.Enum):
    MAX_INDEX = "MaxIndexReached"
    EMERGENCY = "EmergencyStop"
    HORIZON = "HorizonReached"


@dataclass(frozen=True)
class StoppingConfig:
    """Stopping threshold and iteration budget.

    The engine iterates at least until the residual first drops to
    ``kappa``, then ``extra_iterations`` further steps and at least up to
    ``min_index``. It always stops at ``max_index`` (default: the
    observation dimension) or when the squared normal residual falls below
    ``emergency_threshold``. ``reorthogonalize=False`` gives plain
    finite-precision CG.
    """

    kappa: float = 0.0
    emergency_threshold: float = 1e-8
    max_index: int | None = None
    extra_iterations: int = 0
    min_index: int = 0
    keep_iterates: bool = True
    reorthogonalize: bool = True

    def __post_init__(self):
        if self.kappa < 0:
            raise ProblemError(f"kappa must be nonnegative, got {self.kappa}")
        if self.emergency_threshold < 0:
            raise ProblemError("emergency_threshold must be nonnegative")
        if self.max_index is not None and self.max_index < 0:
            raise ProblemError("max_index must be nonnegative")
        if self.extra_iterations < 0 or self.min_index < 0:
            raise ProblemError("extra_iterations and min_index must be nonnegative")


@dataclass(frozen=True, eq=False)
class CgTrajectory:
    """All integer CGNE iterates of one run.

    ``iterates[k]`` is ``f_k``; with ``keep_iterates=False`` only the last
    two rows are real and the others are NaN. ``alphas[k]``/``betas[k]`` are
    the coefficients of the step from ``k`` to ``k + 1``.
    """

    iterates: np.ndarray
    residuals: np.ndarray
    residual_sq: np.ndarray
    normal_residual_sq: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    termination: Termination
    d_distinct: int
    kappa: float
    crossing_index: int | None

    @property
    def terminal_index(self) -> int:
        return self.residual_sq.shape[0] - 1

    @property
    def y_norm_sq(self) -> float:
        return float(self.residual_sq[0])


def run_cgne(problem: ForwardProblem, run: ObservationRun, cfg: StoppingConfig | None = None) -> CgTrajectory:
    """Run CGNE from zero and record the trajectory.

    A vanishing or non-finite curvature ``|A p_k|^2`` ends the run with
    :attr:`Termination.EMERGENCY` at the last valid index.
    """
    cfg = cfg or StoppingConfig()
    y = np.asarray(run.y, dtype=np.float64)
    if y.shape != (problem.obs_dim,):
        raise ProblemError("observation does not match the problem dimension")
    max_index = problem.obs_dim if cfg.max_index is None else min(cfg.max_index, problem.obs_dim)

    diagonal = problem.is_diagonal
    if diagonal:
        lam = np.ascontiguousarray(problem.singular_values)
        f = np.zeros(problem.D)
        r = y.copy()
        s = lam * r
    else:
        A = problem.matrix
        f = np.zeros(problem.P)
        r = y.copy()
        s = A.T @ r
    p = s.copy()
    gamma = float(s @ s)

    iterates = [f.copy()]
    residuals = [r.copy()]
    rsq = [float(r @ r)]
    nrsq = [gamma]
    alphas, betas = [], []
    basis = _Basis(s, gamma, max_index) if cfg.reorthogonalize else None
    crossing = 0 if rsq[0] <= cfg.kappa else None
    k = 0
    while True:
        if crossing is not None and k >= max(crossing + cfg.extra_iterations, cfg.min_index):
            reason = Termination.HORIZON
            break
        if k >= max_index:
            reason = Termination.MAX_INDEX
            break
        if gamma < cfg.emergency_threshold:
            reason = Termination.EMERGENCY
            break
        if diagonal:
            alpha, r2, qq = _kernels.diag_cg_advance(lam, f, r, p, gamma, s)
        else:
            alpha, r2, qq = _dense_advance(A, f, r, p, gamma, s)
        if not (math.isfinite(alpha) and math.isfinite(r2) and qq > 0):
            log.info("CG breakdown at k=%d (curvature %r); emergency stop", k, qq)
            reason = Termination.EMERGENCY
            break
        if basis is not None:
            basis.orthogonalize(s)
        gamma_new = float(s @ s)
        if not math.isfinite(gamma_new):
            log.info("non-finite normal residual at k=%d; emergency stop", k)
            reason = Termination.EMERGENCY
            break
        beta = gamma_new / gamma
        p *= beta
        p += s
        if basis is not None and gamma_new > 0.0:
            basis.append(s, gamma_new)
        k += 1
        alphas.append(alpha)
        betas.append(beta)
        rsq.append(r2)
        nrsq.append(gamma_new)
        residuals.append(r.copy())
        if cfg.keep_iterates:
            iterates.append(f.copy())
        else:
            iterates = iterates[-1:] + [f.copy()]
        gamma = gamma_new
        if crossing is None and r2 <= cfg.kappa:
            crossing = k

    if not cfg.keep_iterates:
        full = np.full((k + 1, f.shape[0]), np.nan)
        full[-len(iterates):] = iterates
        it = full
    else:
        it = np.array(iterates)
    if diagonal and problem.P > problem.D:
        it = np.hstack([it, np.zeros((it.shape[0], problem.P - problem.D))])
    it.setflags(write=False)
    return CgTrajectory(
        iterates=it,
        residuals=np.array(residuals),
        residual_sq=np.array(rsq),
        normal_residual_sq=np.array(nrsq),
        alphas=np.array(alphas),
        betas=np.array(betas),
        termination=reason,
        d_distinct=problem.distinct_count(),
        kappa=float(cfg.kappa),
        crossing_index=crossing,
    )


class _Basis:
    """Orthonormal copies of the accepted normal residuals."""

    def __init__(self, s, gamma, max_index):
        cap = min(int(max_index), s.shape[0]) + 1
        self.Q = np.empty((max(cap, 1), s.shape[0]))
        self.n = 0
        if gamma > 0.0:
            self.append(s, gamma)

    def append(self, s, gamma):
        if self.n < self.Q.shape[0]:
            self.Q[self.n] = s / math.sqrt(gamma)
            self.n += 1

    def orthogonalize(self, s):
        Q = self.Q[: self.n]
        for _ in range(2):
            s -= Q.T @ (Q @ s)


def _dense_advance(A, f, r, p, gamma, s):
    q = A @ p
    qq = float(q @ q)
    if not qq > 0.0:
        return math.nan, math.nan, qq
    alpha = gamma / qq
    f += alpha * p
    r -= alpha * q
    s[:] = A.T @ r
    return alpha, float(r @ r), qq


def split_index(traj: CgTrajectory, t) -> tuple[int, float]:
    """Write ``t = k + alpha`` with ``alpha`` in [0, 1) (``alpha = 0`` at ``t = T``)."""
    T = traj.terminal_index
    t = float(t)
    if not (0.0 <= t <= T):
        raise ValueError(f"t={t} outside the recorded range [0, {T}]")
    k = min(int(math.floor(t)), T)
    return k, t - k


def interpolated_estimate(traj: CgTrajectory, t) -> np.ndarray:
    """``(1 - alpha) f_k + alpha f_{k+1}`` for ``t = k + alpha``."""
    k, a = split_index(traj, t)
    if a == 0.0:
        return traj.iterates[k].copy()
    return (1.0 - a) * traj.iterates[k] + a * traj.iterates[k + 1]


def interpolated_residual(traj: CgTrajectory, t) -> np.ndarray:
    """Residual vector ``Y - A f_t`` (affine in ``alpha`` like the iterate)."""
    k, a = split_index(traj, t)
    if a == 0.0:
        return traj.residuals[k].copy()
    return (1.0 - a) * traj.residuals[k] + a * traj.residuals[k + 1]


def residual_sq_at(traj: CgTrajectory, t) -> float:
    """Squared residual norm on the interpolated path.

    Uses ``R_t^2 = (1-a)^2 R_k^2 + (1 - (1-a)^2) R_{k+1}^2``, which holds
    because ``r_k`` is orthogonal to ``r_{k+1} - r_k`` in the data inner
    product.
    """
    k, a = split_index(traj, t)
    R = traj.residual_sq
    if a == 0.0:
        return float(R[k])
    w = (1.0 - a) ** 2
    return float(w * R[k] + (1.0 - w) * R[k + 1])


def stop_tau(traj: CgTrajectory, kappa) -> float:
    """First ``t`` with ``R_t^2 <= kappa`` on the interpolated path.

    Raises
    ------
    StoppingNotReached
        If the recorded trajectory never reaches ``kappa``; the exception
        carries the terminal index as fallback.
    """
    kappa = float(kappa)
    R = traj.residual_sq
    if kappa >= R[0]:
        return 0.0
    hits = np.flatnonzero(R[1:] <= kappa)
    if hits.size == 0:
        raise StoppingNotReached(kappa, traj.terminal_index, R[-1])
    k = int(hits[0])
    drop = R[k] - R[k + 1]
    alpha = 1.0 - math.sqrt(max(kappa - R[k + 1], 0.0) / drop)
    return k + alpha


def stop_tau_dn(traj: CgTrajectory, c, delta) -> float:
    """Discrepancy principle: :func:`stop_tau` with ``kappa = c^2 delta^2``."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    return stop_tau(traj, (c * delta) ** 2)


TRAJECTORY_COLUMNS = ("run_index", "k", "residual_sq", "normal_residual_sq", "termination_reason")


def trajectory_rows(traj: CgTrajectory, run_index=0):
    for k in range(traj.terminal_index + 1):
        yield (run_index, k, traj.residual_sq[k], traj.normal_residual_sq[k], traj.termination.value)


def write_trajectory_csv(path, trajectories, header_line=None):
    """Write ``(run_index, trajectory)`` pairs as CSV rows."""
    rows = (row for run_index, traj in trajectories for row in trajectory_rows(traj, run_index))
    write_csv(path, TRAJECTORY_COLUMNS, rows, header_line)
