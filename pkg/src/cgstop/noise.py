"""Reproducible noise generation and observation assembly.

Gaussian draws come from a Philox counter-based generator whose 128-bit key
is ``(master_seed, run_index)``, so run ``i`` of an experiment always sees the
same noise regardless of how runs are scheduled. Uniforms are formed from the
top 53 bits of each raw 64-bit output and mapped to normals by the Box-Muller
transform; no numpy distribution code is involved, which keeps the stream
fixed across numpy releases.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import AssumptionYViolated, ProblemError
from .problem import ForwardProblem, to_spectral

_MASK64 = (1 << 64) - 1


class NoiseModel(str, enum.Enum):
    GAUSSIAN = "gaussian"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class NoiseSpec:
    model: NoiseModel
    delta: float
    master_seed: int = 0
    run_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", NoiseModel(self.model))
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ProblemError(f"noise level must be positive and finite, got {self.delta}")


@dataclass(frozen=True, eq=False)
class ObservationRun:
    """One noisy observation ``Y = g + xi``.

    ``y_svd``/``xi_svd`` are coordinates in the retained left singular
    vectors; ``y_perp_sq`` is the energy of ``Y`` outside their span (zero for
    diagonal problems and for dense problems without rank truncation).
    """

    y: np.ndarray
    xi: np.ndarray
    y_svd: np.ndarray
    xi_svd: np.ndarray
    y_perp_sq: float = 0.0
    seed_used: int | None = None
    run_index: int | None = None


def standard_normals(master_seed, run_index, n) -> np.ndarray:
    """``n`` standard normal variates keyed by ``(master_seed, run_index)``."""
    key = np.array([int(master_seed) & _MASK64, int(run_index) & _MASK64], dtype=np.uint64)
    bitgen = np.random.Philox(key=key)
    m = (int(n) + 1) // 2
    raw = bitgen.random_raw(2 * m)
    # (0, 1]: avoids log(0)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    radius = np.sqrt(-2.0 * np.log(u[:m]))
    angle = 2.0 * np.pi * u[m:]
    z = np.empty(2 * m)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[: int(n)]


def sample_noise(spec: NoiseSpec, D, direction=None) -> np.ndarray:
    """Draw the noise vector ``xi`` of length ``D``.

    Gaussian: ``xi = delta * Z``. Deterministic: ``direction`` is rescaled to
    norm exactly ``delta``; if omitted, a direction is drawn from the keyed
    Gaussian stream so crafted runs stay reproducible.
    """
    D = int(D)
    if D < 1:
        raise ProblemError(f"noise dimension must be >= 1, got {D}")
    if spec.model is NoiseModel.GAUSSIAN:
        return spec.delta * standard_normals(spec.master_seed, spec.run_index, D)
    if direction is None:
        direction = standard_normals(spec.master_seed, spec.run_index, D)
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (D,):
        raise ProblemError(f"direction must have length {D}")
    norm = np.linalg.norm(direction)
    if not norm > 0:
        raise ProblemError("direction must be nonzero")
    return direction * (spec.delta / norm)


def check_assumption_y(singular_values, y_svd):
    """Raise :class:`AssumptionYViolated` if a singular-value block has no energy."""
    lam = np.asarray(singular_values)
    y2 = np.asarray(y_svd) ** 2
    values, inverse = np.unique(lam, return_inverse=True)
    energy = np.bincount(inverse, weights=y2, minlength=values.size)
    bad = np.flatnonzero(energy <= 0.0)
    if bad.size:
        idx = np.flatnonzero(inverse == bad[-1])
        raise AssumptionYViolated(values[bad[-1]], idx)


def observe(problem: ForwardProblem, xi, seed_used=None, run_index=None) -> ObservationRun:
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (problem.obs_dim,):
        raise ProblemError(f"noise must have length {problem.obs_dim}, got shape {xi.shape}")
    y = problem.g + xi
    y_svd = to_spectral(problem, y)
    xi_svd = to_spectral(problem, xi)
    check_assumption_y(problem.singular_values, y_svd)
    y_perp_sq = 0.0
    if not problem.is_diagonal:
        y_perp = y - problem.left_vectors @ y_svd
        y_perp_sq = float(y_perp @ y_perp)
    for a in (y, xi, y_svd, xi_svd):
        a.setflags(write=False)
    return ObservationRun(
        y=y, xi=xi, y_svd=y_svd, xi_svd=xi_svd, y_perp_sq=y_perp_sq,
        seed_used=seed_used, run_index=run_index,
    )


def draw_observation(problem: ForwardProblem, spec: NoiseSpec, direction=None) -> ObservationRun:
    xi = sample_noise(spec, problem.obs_dim, direction=direction)
    return observe(problem, xi, seed_used=spec.master_seed, run_index=spec.run_index)
