"""Discretised forward problems in singular-value form.

Two kinds are supported: diagonal problems, where the operator is already
given in its SVD basis, and dense problems, where a matrix is stored together
with its (rank-truncated) SVD. For dense problems CG acts on the matrix, while
the spectral diagnostics use the SVD factors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ProblemError, SvdFailure


class ProblemKind(str, enum.Enum):
    DIAGONAL = "DiagonalSvd"
    DENSE = "DenseSvd"


class SignalKind(str, enum.Enum):
    SUPERSMOOTH = "supersmooth"
    SMOOTH = "smooth"
    ROUGH = "rough"


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ForwardProblem:
    """Operator, signal and derived noiseless data of an inverse problem.

    Attributes
    ----------
    kind : ProblemKind
    singular_values : ndarray, shape (D,)
        Nonincreasing, strictly positive. ``D`` is the (effective) rank.
    signal : ndarray, shape (P,)
        True signal in native coordinates.
    signal_coeffs : ndarray, shape (P,)
        Coefficients ``<f, v_i>``; entries beyond ``D`` are the part of the
        signal invisible to the operator.
    g : ndarray, shape (obs_dim,)
        Noiseless data ``A f`` in native coordinates.
    matrix, left_vectors, right_vectors : ndarray or None
        Dense operator and its SVD factors ``U`` (obs_dim x D) and
        ``V`` (P x D). ``None`` for diagonal problems.
    """

    kind: ProblemKind
    singular_values: np.ndarray
    signal: np.ndarray
    signal_coeffs: np.ndarray
    g: np.ndarray
    matrix: np.ndarray | None = None
    left_vectors: np.ndarray | None = None
    right_vectors: np.ndarray | None = None
    depth: float | None = None

    @property
    def D(self) -> int:
        return self.singular_values.shape[0]

    @property
    def P(self) -> int:
        return self.signal.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.g.shape[0]

    @property
    def g_coeffs(self) -> np.ndarray:
        return self.singular_values * self.signal_coeffs[: self.D]

    @property
    def is_diagonal(self) -> bool:
        return self.kind is ProblemKind.DIAGONAL

    def distinct_count(self) -> int:
        """Number ``d`` of distinct singular values."""
        return int(np.unique(self.singular_values).size)


@dataclass(frozen=True)
class SourceCondition:
    """Sobolev-type smoothness ``|f|_mu <= radius`` plus polynomial decay bounds."""

    mu: float
    radius: float
    decay_p: float = 0.0
    c_A: float = 0.0
    C_A: float = np.inf

    def __post_init__(self):
        if not self.mu > 0:
            raise ProblemError(f"mu must be positive, got {self.mu}")
        if not self.radius >= 1:
            raise ProblemError(f"radius must be >= 1, got {self.radius}")
        if self.decay_p < 0:
            raise ProblemError(f"decay_p must be >= 0, got {self.decay_p}")
        if self.c_A > self.C_A:
            raise ProblemError("c_A must not exceed C_A")

    def holds_for(self, problem: ForwardProblem) -> bool:
        return source_norm(problem, self.mu) <= self.radius


def source_norm(problem: ForwardProblem, mu: float) -> float:
    """``(sum_i lambda_i^{-4 mu} f_i^2)^{1/2}`` over the identifiable coefficients."""
    lam = problem.singular_values
    f = problem.signal_coeffs[: problem.D]
    return float(np.sqrt(np.sum(lam ** (-4.0 * mu) * f * f)))


def make_polynomial_decay_problem(D, p, scale=1.0, signal=None) -> ForwardProblem:
    """Diagonal problem with singular values ``scale * i**-p``, ``i = 1..D``.

    ``signal`` holds the coefficients ``f_i``; it may be longer than ``D``,
    in which case the tail is not seen by the operator.
    """
    D = int(D)
    if D < 3:
        raise ProblemError(f"observation dimension must be >= 3, got {D}")
    if not scale > 0:
        raise ProblemError(f"scale must be positive, got {scale}")
    if p < 0:
        raise ProblemError(f"decay exponent must be >= 0, got {p}")
    if signal is None:
        signal = np.zeros(D)
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.shape[0] < D:
        raise ProblemError(f"signal must be a vector of length >= D={D}")
    i = np.arange(1, D + 1, dtype=np.float64)
    lam = scale * i ** (-float(p)) if p != 0 else np.full(D, float(scale))
    return ForwardProblem(
        kind=ProblemKind.DIAGONAL,
        singular_values=_frozen(lam),
        signal=_frozen(signal),
        signal_coeffs=_frozen(signal),
        g=_frozen(lam * signal[:D]),
    )


def make_test_signal(kind, D) -> np.ndarray:
    """Coefficient sequences of the supersmooth, smooth and rough test signals."""
    D = int(D)
    if D < 1:
        raise ProblemError(f"signal length must be >= 1, got {D}")
    kind = SignalKind(kind)
    i = np.arange(1, D + 1, dtype=np.float64)
    if kind is SignalKind.SUPERSMOOTH:
        return 5.0 * np.exp(-0.1 * i)
    if kind is SignalKind.SMOOTH:
        return 5000.0 * np.abs(np.sin(0.01 * i)) * i ** -1.6
    return 250.0 * np.abs(np.sin(0.002 * i)) * i ** -0.8


def gravity_matrix(D, depth=0.25) -> np.ndarray:
    """Midpoint-rule discretisation of the gravity-surveying kernel on [0, 1]."""
    D = int(D)
    if D < 3:
        raise ProblemError(f"grid dimension must be >= 3, got {D}")
    if not depth > 0:
        raise ProblemError(f"depth must be positive, got {depth}")
    s = (np.arange(1, D + 1) - 0.5) / D
    diff = s[:, None] - s[None, :]
    return depth * (depth * depth + diff * diff) ** -1.5 / D


def gravity_signal(D) -> np.ndarray:
    t = (np.arange(1, int(D) + 1) - 0.5) / int(D)
    return np.sin(np.pi * t) + 0.5 * np.sin(2.0 * np.pi * t)


def make_dense_problem(matrix, signal, rel_floor=1e-14, depth=None) -> ForwardProblem:
    """Dense problem with SVD truncated below ``rel_floor * lambda_1``."""
    A = np.asarray(matrix, dtype=np.float64)
    signal = np.asarray(signal, dtype=np.float64)
    if A.ndim != 2:
        raise ProblemError("matrix must be two-dimensional")
    m, P = A.shape
    if signal.shape != (P,):
        raise ProblemError(f"signal must have length {P}, got {signal.shape}")
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(f"SVD of {m}x{P} operator did not converge") from exc
    if not np.all(np.isfinite(s)) or s.size == 0 or not s[0] > 0:
        raise SvdFailure("operator has no positive singular values")
    r = int(np.count_nonzero(s > rel_floor * s[0]))
    if r < 3:
        raise ProblemError(f"effective rank {r} below the minimum of 3")
    coeffs = Vt @ signal
    return ForwardProblem(
        kind=ProblemKind.DENSE,
        singular_values=_frozen(s[:r]),
        signal=_frozen(signal),
        signal_coeffs=_frozen(coeffs),
        g=_frozen(A @ signal),
        matrix=_frozen(A),
        left_vectors=_frozen(U[:, :r]),
        right_vectors=_frozen(Vt[:r].T),
        depth=depth,
    )


def make_gravity_problem(D, depth=0.25, rel_floor=1e-14, cache=None) -> ForwardProblem:
    """Gravity surveying test problem with signal ``sin(pi t) + sin(2 pi t)/2``.

    If ``cache`` names a file written by :func:`save_matrix` with matching
    header it is loaded instead of recomputing the matrix; otherwise the
    matrix is computed and written there.
    """
    A = None
    if cache is not None and Path(cache).exists():
        A, header = load_matrix(cache)
        if header != (int(D), float(depth)):
            A = None
    if A is None:
        A = gravity_matrix(D, depth)
        if cache is not None:
            save_matrix(cache, A, depth)
    return make_dense_problem(A, gravity_signal(D), rel_floor=rel_floor, depth=float(depth))


def save_matrix(path, matrix, depth):
    """Write a square matrix as a one-line ``D depth`` header plus raw float64 data."""
    A = np.ascontiguousarray(matrix, dtype="<f8")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ProblemError("only square matrices can be cached")
    with open(path, "wb") as fh:
        fh.write(f"{A.shape[0]} {float(depth)!r}\n".encode("ascii"))
        fh.write(A.tobytes())


def load_matrix(path):
    """Inverse of :func:`save_matrix`; returns ``(matrix, (D, depth))``."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        try:
            D, depth = int(header[0]), float(header[1])
        except (IndexError, ValueError) as exc:
            raise ProblemError(f"bad matrix cache header in {path}") from exc
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != D * D:
        raise ProblemError(f"matrix cache {path} holds {data.size} values, expected {D * D}")
    return data.reshape(D, D).astype(np.float64), (D, depth)


def apply_forward(problem: ForwardProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.P,):
        raise ProblemError(f"expected a vector of length P={problem.P}, got shape {x.shape}")
    if problem.is_diagonal:
        return problem.singular_values * x[: problem.D]
    return problem.matrix @ x


def apply_adjoint(problem: ForwardProblem, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (problem.obs_dim,):
        raise ProblemError(f"expected a vector of length {problem.obs_dim}, got shape {y.shape}")
    if problem.is_diagonal:
        out = np.zeros(problem.P)
        out[: problem.D] = problem.singular_values * y
        return out
    return problem.matrix.T @ y


def to_spectral(problem: ForwardProblem, y) -> np.ndarray:
    """Coordinates ``<y, u_i>`` of an observation-space vector."""
    y = np.asarray(y, dtype=np.float64)
    if problem.is_diagonal:
        return y.copy()
    return problem.left_vectors.T @ y


def minimum_norm_solution(problem: ForwardProblem) -> np.ndarray:
    """``A^+ g`` in native coordinates: the signal with its invisible part removed."""
    coeffs = problem.signal_coeffs[: problem.D]
    if problem.is_diagonal:
        out = np.zeros(problem.P)
        out[: problem.D] = coeffs
        return out
    return problem.right_vectors @ coeffs
