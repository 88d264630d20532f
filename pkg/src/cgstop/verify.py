"""Property suite run by ``cgstop verify`` and by the test-suite.

Each check draws small random diagonal instances, evaluates one family of
inequalities or identities over many ``(instance, t)`` pairs and reports the
worst normalised violation. A check passes when that worst value is <= 0,
i.e. every draw satisfied the property within its tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .cgne import (
    StoppingConfig, interpolated_estimate, interpolated_residual, residual_sq_at, run_cgne, stop_tau,
)
from .errors import (
    balanced_identity_gap, balanced_oracle, decomposition_check, error_terms_at, oracle_indices,
    prediction_error, reconstruction_error, showalter_bias_variance, showalter_estimate,
)
from .noise import NoiseModel, NoiseSpec, draw_observation
from .problem import make_polynomial_decay_problem, source_norm
from .respoly import brute_force_residual_poly, build_diagnostics, deriv0, eval_rk, eval_rt, smallest_zero


class CheckResult(NamedTuple):
    name: str
    passed: bool
    worst: float  # largest normalised violation; <= 0 means pass
    draws: int


@dataclass(frozen=True, eq=False)
class Instance:
    problem: object
    run: object
    traj: object
    diag: object

    @property
    def lam2(self):
        return self.problem.singular_values ** 2

    @property
    def y_norm_sq(self):
        return float(self.run.y_svd @ self.run.y_svd)

    def rho(self, t):
        """``r_t(lambda_i^2)`` on coordinates below ``x_{1,t}``, 0 elsewhere."""
        if t == 0:
            return np.ones_like(self.lam2)
        x1 = smallest_zero(self.diag, t)
        r = np.asarray(eval_rt(self.diag, t, self.lam2))
        return np.where(self.lam2 < x1, r, 0.0)


def make_instance(rng, D=None, p=None, delta=None, crafted=False, full=False, seed=0) -> Instance:
    """Random diagonal instance.

    ``full`` iterates to the end without emergency stop. Finite-precision CG
    only reproduces all ``d`` Ritz values on well-conditioned spectra, so
    full instances default to the mild decay ``p = 0.3``.
    """
    D = int(rng.integers(8, 51)) if D is None else D
    if p is None:
        p = 0.3 if full else float(rng.choice([0.3, 0.5, 1.0]))
    delta = float(rng.choice([0.01, 0.1])) if delta is None else delta
    decay = rng.uniform(0.5, 2.0)
    signal = rng.standard_normal(D) * np.arange(1, D + 1) ** -decay
    problem = make_polynomial_decay_problem(D, p, signal=signal)
    model = NoiseModel.DETERMINISTIC if crafted else NoiseModel.GAUSSIAN
    run = draw_observation(problem, NoiseSpec(model, delta, seed, int(rng.integers(1 << 31))))
    cfg = StoppingConfig(emergency_threshold=0.0) if full else StoppingConfig()
    traj = run_cgne(problem, run, cfg)
    return Instance(problem, run, traj, build_diagnostics(traj))


def _draws(rng, inst, n):
    return rng.uniform(0.0, inst.traj.terminal_index, n)


def _result(name, worst, draws):
    return CheckResult(name, bool(worst <= 0.0), float(worst), int(draws))


def check_residual_monotone(rng, n_inst=10, n_t=20):
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng)
        R = inst.traj.residual_sq
        R0 = R[0]
        # strict decrease across integers
        worst = max(worst, float(np.max(R[1:] - (R[:-1] - 1e-14 * R0))) / R0)
        ts = np.sort(_draws(rng, inst, n_t))
        vals = np.array([residual_sq_at(inst.traj, t) for t in ts])
        worst = max(worst, float(np.max(np.diff(vals))) / R0 - 1e-15)
        for t in ts:
            res = inst.run.y - inst.problem.singular_values * interpolated_estimate(inst.traj, t)[: inst.problem.D]
            gap = abs(residual_sq_at(inst.traj, t) - float(res @ res)) / R0 - 1e-9
            worst = max(worst, gap)
        draws += n_t
    return _result("residual monotone and consistent", worst, draws)


def check_orthogonality(rng, n_inst=10, k_max=6):
    """Orthogonality to ``(AA^T)^j Y`` and ``AA^T``-conjugacy of residuals."""
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng, p=0.5)
        y, lam2 = inst.run.y_svd, inst.lam2
        res = inst.traj.residuals
        K = min(k_max, inst.traj.terminal_index)
        ynorm = inst.y_norm_sq
        for k in range(1, K + 1):
            for j in range(1, k + 1):
                v = abs(float(np.sum(res[k] * lam2**j * y)))
                worst = max(worst, v / (ynorm * lam2[0] ** j) - 1e-8)
                draws += 1
            for l in range(k):
                v = abs(float(np.sum(res[k] * lam2 * res[l])))
                worst = max(worst, v / (ynorm * lam2[0]) - 1e-8)
                draws += 1
    return _result("residual orthogonality and conjugacy", worst, draws)


def check_interlacing(rng, n_inst=10):
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng, full=True, D=int(rng.integers(4, 11)))
        z = inst.diag.zeros
        lam2 = inst.lam2  # decreasing
        tol = 1e-12 * inst.diag.scale
        for k in range(1, inst.traj.terminal_index):
            a, b = z[k], z[k + 1]
            worst = max(worst, float(np.max(b[:-1] - a)) - tol, float(np.max(a - b[1:])) - tol)
            draws += 1
        d = inst.problem.distinct_count()
        for k in range(1, inst.traj.terminal_index + 1):
            # i-th largest Ritz value below the i-th largest eigenvalue; equality at k = d
            zk = z[k][::-1]
            tol_k = 1e-8 * inst.diag.scale if k == d else tol
            worst = max(worst, float(np.max(zk - lam2[: k])) - tol_k, -float(zk[-1]))
            if k == d:
                worst = max(worst, float(np.max(np.abs(zk - lam2) / lam2)) - 1e-8)
            draws += 1
    return _result("Ritz interlacing and eigenvalue bound", worst, draws)


def check_pointwise_bounds(rng, n_inst=10, n_t=12):
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng)
        for t in _draws(rng, inst, n_t):
            if t == 0:
                continue
            x1 = smallest_zero(inst.diag, t)
            d0 = deriv0(inst.diag, t)
            x = rng.uniform(0.0, x1, 8)
            r = np.asarray(eval_rt(inst.diag, t, x))
            lower = np.maximum(1.0 - d0 * x, 0.0)
            upper = np.exp(-d0 * x)
            worst = max(worst, float(np.max(lower - r)) - 1e-10, float(np.max(r - upper)) - 1e-10)
            worst = max(worst, abs(float(eval_rt(inst.diag, t, x1))) - 1e-10)
            draws += 1
    return _result("pointwise bounds on [0, x_1t]", worst, draws)


def check_nemirovskii(rng, n_inst=10, n_t=12):
    """``R_t^2 <= sum_< r_t Y^2`` for random t; phi_k chain at integers."""
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng)
        y2 = inst.run.y_svd ** 2
        ynorm = inst.y_norm_sq
        for t in _draws(rng, inst, n_t):
            rhs = float(np.sum(inst.rho(t) * y2))
            worst = max(worst, (residual_sq_at(inst.traj, t) - rhs) / ynorm - 1e-10)
            draws += 1
        lam2 = inst.lam2
        for k in range(1, inst.traj.terminal_index + 1):
            x1 = float(inst.diag.zeros[k][0])
            below = lam2 < x1
            r = np.asarray(eval_rk(inst.diag, k, lam2))
            phi = float(np.sum(np.where(below, x1 / (x1 - lam2) * r * r, 0.0) * y2))
            nem = float(np.sum(np.where(below, r, 0.0) * y2))
            Rk = float(inst.traj.residual_sq[k])
            worst = max(worst, (Rk - phi) / ynorm - 1e-10, (phi - nem) / ynorm - 1e-10)
            draws += 1
    return _result("Nemirovskii bound and phi_k chain", worst, draws)


def check_zero_path(rng, n_inst=10, n_t=10):
    """Smallest zero decreases and ``|r_t'(0)|`` increases in t."""
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng)
        T = inst.traj.terminal_index
        ts = np.sort(rng.uniform(0.0, T, n_t))
        ts = ts[ts > 0]
        x1 = np.array([smallest_zero(inst.diag, t) for t in ts])
        d0 = np.array([deriv0(inst.diag, t) for t in ts])
        scale = inst.diag.scale
        worst = max(worst, float(np.max(np.diff(x1), initial=-1.0)) / scale - 1e-13)
        worst = max(worst, float(np.max(-np.diff(d0), initial=-1.0)) / max(d0[-1], 1.0) - 1e-13)
        draws += ts.size
    return _result("zero and derivative monotone in t", worst, draws)


def check_spectral_consistency(rng, n_inst=10, n_t=12):
    """``r_t(lambda_i^2) Y_i`` equals the residual coordinate below ``x_{1,t}``, and everywhere for t <= 3."""
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng)
        y = inst.run.y_svd
        keep = np.abs(y) > 1e-12 * math.sqrt(inst.y_norm_sq)
        T = inst.traj.terminal_index
        for t in np.append(_draws(rng, inst, n_t), rng.uniform(0, min(3, T), 4)):
            res = interpolated_residual(inst.traj, t)
            r = np.asarray(eval_rt(inst.diag, t, inst.lam2))
            mask = keep & ((inst.lam2 < smallest_zero(inst.diag, t)) if t > 0 else keep)
            if t <= 3:
                mask = keep
            if mask.any():
                worst = max(worst, float(np.max(np.abs(r[mask] - res[mask] / y[mask]))) - 1e-8)
            draws += 1
    return _result("residual ratio identity", worst, draws)


def check_error_terms(rng, n_inst=10, n_t=12):
    """Endpoint values, monotonicity of S, both bounds on ``A`` and ``|r_<g|^2 <= 6S + 2A``."""
    worst, draws = -math.inf, 0
    for i in range(n_inst):
        inst = make_instance(rng, full=True, D=int(rng.integers(4, 11)))
        p, run, traj, diag = inst.problem, inst.run, inst.traj, inst.diag
        g, xi = p.g_coeffs, run.xi_svd
        scale = inst.y_norm_sq + float(g @ g)
        T = traj.terminal_index
        S0, A0 = error_terms_at(p, run, traj, diag, 0)
        worst = max(worst, abs(S0) / scale - 1e-12, abs(A0 - float(g @ g)) / scale - 1e-12)
        if T == p.distinct_count():
            Sd, Ad = error_terms_at(p, run, traj, diag, T)
            worst = max(worst, abs(Sd - float(xi @ xi)) / scale - 1e-9, abs(Ad) / scale - 1e-9)
        ts = np.sort(_draws(rng, inst, n_t))
        S_prev = -math.inf
        for t in ts:
            S, A = error_terms_at(p, run, traj, diag, t)
            rho = inst.rho(t)
            half = float(np.sum(rho * g * g))
            d0 = deriv0(diag, t)
            expo = float(np.sum(np.exp(-d0 * inst.lam2) * g * g))
            rg = float(np.sum((rho * g) ** 2))
            worst = max(
                worst,
                (S_prev - S) / scale - 1e-12,
                (A - half) / scale - 1e-10,
                (half - expo) / scale - 1e-10,
                (rg - 6.0 * S - 2.0 * A) / scale - 1e-10,
            )
            S_prev = S
            draws += 1
    return _result("error-term endpoints and bounds", worst, draws)


def check_decomposition(rng, n_inst=10, n_t=12):
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng)
        scale = inst.y_norm_sq + float(inst.problem.g_coeffs @ inst.problem.g_coeffs)
        ts = _draws(rng, inst, n_t)
        for t in np.append(ts, 0.0):
            c = decomposition_check(inst.problem, inst.run, inst.traj, inst.diag, t)
            worst = max(worst, abs(c.gap) / scale - 1e-9, (c.lhs - 2.0 * c.rhs) / scale - 1e-12)
            draws += 1
        gap = balanced_identity_gap(inst.problem, inst.run, inst.traj, inst.diag, ts)
        worst = max(worst, gap / scale - 1e-9)
    return _result("exact decomposition and balanced identity", worst, draws)


def check_balanced_oracle(rng, n_inst=10):
    """Balance at ``t_b`` and the two-point bound.

    ``A_t`` itself need not be monotone, so for ``t < t_b`` the bound is
    taken against its nonincreasing majorant ``|r_{t,<}^{1/2} g|^2``:
    ``2 S_{t_b} <= 2 inf_t (B_t v S_t)``, and against ``A_t v S_t`` for
    ``t >= t_b``.
    """
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng)
        p, run, traj, diag = inst.problem, inst.run, inst.traj, inst.diag
        g = p.g_coeffs
        tb = balanced_oracle(p, run, traj, diag)
        S, A = error_terms_at(p, run, traj, diag, tb)
        if tb > 0:
            worst = max(worst, abs(A - S) / (A + S + 1e-300) - 1e-8)
        best = math.inf
        for t in np.linspace(0.0, traj.terminal_index, 200):
            St, At = error_terms_at(p, run, traj, diag, t)
            Bt = float(np.sum(inst.rho(t) * g * g))
            best = min(best, max(St, At if t >= tb else Bt))
        worst = max(worst, (2.0 * (A + S) - 4.0 * best) / inst.y_norm_sq - 1e-10)
        draws += 1
    return _result("balanced oracle balance and two-point bound", worst, draws)


def check_source_bounds(rng, n_inst=10, n_t=12, mu=0.25):
    """Source-condition bound, interpolation inequality and the deterministic-noise residual bound."""
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        delta = float(rng.choice([0.01, 0.1]))
        inst = make_instance(rng, crafted=True, delta=delta)
        p = inst.problem
        R = max(1.0, source_norm(p, mu))
        g = p.g_coeffs
        f = p.signal_coeffs[: p.D]
        for t in _draws(rng, inst, n_t):
            if t <= 0:
                continue
            rho = inst.rho(t)
            d0 = deriv0(inst.diag, t)
            half = float(np.sum(rho * g * g))
            bound = R * R * (mu + 0.5) ** (2 * mu + 1) * d0 ** (-2 * mu - 1)
            rg2 = float(np.sum((rho * g) ** 2))
            rf2 = float(np.sum((rho * f) ** 2))
            interp = rg2 ** (2 * mu / (2 * mu + 1)) * R ** (2 / (2 * mu + 1))
            Rt = math.sqrt(residual_sq_at(inst.traj, t))
            dn = R * (mu + 0.5) ** (mu + 0.5) * d0 ** (-mu - 0.5) + delta
            worst = max(
                worst,
                (half - bound) / max(bound, 1e-300) - 1e-10,
                (rf2 - interp) / max(interp, 1e-300) - 1e-10,
                (Rt - dn) / dn - 1e-10,
            )
            draws += 1
    return _result("source-condition, interpolation and residual bounds", worst, draws)


def check_oracle_equivalence(rng, n_inst=6):
    """Ritz values against the brute-force polynomial for d <= 10."""
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng, full=True, D=int(rng.integers(4, 11)))
        d = inst.problem.distinct_count()
        R = inst.traj.residual_sq
        for k in range(1, min(d, inst.traj.terminal_index) + 1):
            bf = brute_force_residual_poly(inst.problem, inst.run, k)
            z = inst.diag.zeros[k]
            worst = max(worst, float(np.max(np.abs(bf.roots - z) / z)) - 1e-7)
            if k < d:
                worst = max(worst, abs(bf.min_value - R[k]) / R[k] - 1e-9)
            else:
                worst = max(worst, max(bf.min_value, R[k]) / R[0] - 1e-12)
            draws += 1
    return _result("Ritz values match brute-force polynomial", worst, draws)


def check_stopping(rng, n_inst=10):
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng)
        R = inst.traj.residual_sq
        for kappa in rng.uniform(R[-1], R[0], 5):
            tau = stop_tau(inst.traj, kappa)
            worst = max(worst, abs(residual_sq_at(inst.traj, tau) - kappa) / kappa - 1e-9)
            draws += 1
    return _result("residual equals kappa at tau", worst, draws)


def check_oracles(rng, n_inst=6):
    """Closed-form interval minima against a fine grid; oracle never worse than tau."""
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng)
        p, run, traj = inst.problem, inst.run, inst.traj
        t_w, t_s = oracle_indices(p, run, traj)
        grid = np.linspace(0.0, traj.terminal_index, 20 * traj.terminal_index + 1)
        pw = prediction_error(p, run, traj, t_w)
        ps = reconstruction_error(p, run, traj, t_s)
        gp = min(prediction_error(p, run, traj, t) for t in grid)
        gs = min(reconstruction_error(p, run, traj, t) for t in grid)
        worst = max(worst, (pw - gp) / max(gp, 1e-300) - 1e-10, (ps - gs) / max(gs, 1e-300) - 1e-10)
        draws += 1
    return _result("path oracles minimise the errors", worst, draws)


def check_showalter(rng, n_inst=5):
    worst, draws = -math.inf, 0
    for _ in range(n_inst):
        inst = make_instance(rng)
        p, run = inst.problem, inst.run
        scale = inst.y_norm_sq + float(p.g_coeffs @ p.g_coeffs)
        for s in (0.0, 1.0, 10.0, 100.0):
            est = showalter_estimate(p, run, s)
            e = p.singular_values * est[: p.D] - p.g_coeffs
            bias, var = showalter_bias_variance(p, run, s)
            damp = np.exp(-s * inst.lam2)
            cross = float(np.sum(damp * p.g_coeffs * (1.0 - damp) * run.xi_svd))
            worst = max(worst, abs(float(e @ e) - (bias + var - 2.0 * cross)) / scale - 1e-12)
            draws += 1
    return _result("gradient-flow bias/variance split", worst, draws)


CHECKS: tuple[Callable, ...] = (
    check_residual_monotone,
    check_orthogonality,
    check_interlacing,
    check_pointwise_bounds,
    check_nemirovskii,
    check_zero_path,
    check_spectral_consistency,
    check_error_terms,
    check_decomposition,
    check_balanced_oracle,
    check_source_bounds,
    check_oracle_equivalence,
    check_stopping,
    check_oracles,
    check_showalter,
)


def run_all(seed=0, checks=CHECKS) -> list[CheckResult]:
    """Run every check with its own child generator of ``seed``."""
    seqs = np.random.SeedSequence(seed).spawn(len(checks))
    return [check(np.random.default_rng(s)) for check, s in zip(checks, seqs)]
