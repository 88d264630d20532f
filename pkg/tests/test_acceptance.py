"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

from dataclasses import replace

import numpy as np
import pytest

from cgstop.cgne import StoppingConfig, Termination, residual_sq_at, run_cgne, stop_tau
from cgstop.errors import decomposition_check, prediction_error
from cgstop.experiments import (
    ExperimentConfig, KappaRule, ProblemSpec, minimax_exponents, rate_slopes, rate_study, run_records,
    summarize,
)
from cgstop.noise import NoiseSpec, draw_observation
from cgstop.problem import make_polynomial_decay_problem, make_test_signal
from cgstop.respoly import brute_force_residual_poly, build_diagnostics
from cgstop.verify import (
    check_error_terms, check_decomposition, check_interlacing, check_nemirovskii, check_orthogonality,
    check_pointwise_bounds, check_residual_monotone, make_instance,
)

from conftest import ACCEPTANCE_LINES


def report(n, passed, detail):
    line = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


def test_1_exact_decomposition():
    rng = np.random.default_rng(101)
    worst, n = 0.0, 0
    for i in range(20):
        D = 50
        p = float(rng.choice([0.3, 0.5, 1.0]))
        delta = float(rng.choice([0.01, 0.1]))
        signal = rng.standard_normal(D) * np.arange(1, D + 1) ** -rng.uniform(0.5, 2.0)
        problem = make_polynomial_decay_problem(D, p, signal=signal)
        run = draw_observation(problem, NoiseSpec("gaussian", delta, 101, i))
        traj = run_cgne(problem, run, StoppingConfig())
        diag = build_diagnostics(traj)
        scale = float(run.y @ run.y + problem.g @ problem.g)
        for t in rng.uniform(0, traj.terminal_index, 50):
            chk = decomposition_check(problem, run, traj, diag, t)
            worst = max(worst, abs(chk.gap) / scale)
            n += 1
    assert report(1, worst <= 1e-9, f"exact decomposition, {n} draws, worst relative gap {worst:.2e} (tol 1e-9)")


def test_2_krylov_oracle_equivalence():
    rng = np.random.default_rng(202)
    worst_root, worst_min, worst_end, n = 0.0, 0.0, 0.0, 0
    for _ in range(10):
        inst = make_instance(rng, D=int(rng.integers(4, 11)), full=True)
        d = inst.problem.distinct_count()
        for k in range(1, d + 1):
            bf = brute_force_residual_poly(inst.problem, inst.run, k)
            ritz = inst.diag.zeros[k]
            worst_root = max(worst_root, float(np.max(np.abs(ritz - bf.roots) / bf.roots)))
            R = inst.traj.residual_sq[k]
            if k < d:
                worst_min = max(worst_min, abs(bf.min_value - R) / bf.min_value)
            else:
                # both sides vanish up to rounding at k = d: absolute bound
                worst_end = max(worst_end, abs(bf.min_value - R) / inst.y_norm_sq)
            n += 1
    ok = worst_root <= 1e-7 and worst_min <= 1e-9 and worst_end <= 1e-12
    assert report(2, ok, f"Krylov oracle, {n} (instance, k) pairs, roots {worst_root:.2e} (tol 1e-7), "
                         f"min value {worst_min:.2e} (tol 1e-9), at k=d {worst_end:.1e} of |Y|^2 (tol 1e-12)")


PROPERTY_CHECKS = (
    check_residual_monotone, check_orthogonality, check_interlacing, check_pointwise_bounds,
    check_nemirovskii, check_error_terms, check_decomposition,
)


def test_3_property_suite():
    parts = []
    ok = True
    for check in PROPERTY_CHECKS:
        draws, passed, worst = 0, True, -np.inf
        seed = 0
        while draws < 100:
            res = check(np.random.default_rng([303, seed]))
            draws += res.draws
            passed &= res.passed
            worst = max(worst, res.worst)
            seed += 1
        ok &= passed
        parts.append(f"{res.name}: {draws} draws {'ok' if passed else 'VIOLATED'}")
    assert report(3, ok, "property suite; " + "; ".join(parts))


def test_4_stopping_exactness():
    rng = np.random.default_rng(404)
    worst, n = 0.0, 0
    for i in range(40):
        D = int(rng.integers(10, 200))
        problem = make_polynomial_decay_problem(D, float(rng.choice([0.3, 0.5, 1.0])),
                                                signal=make_test_signal("rough", D))
        run = draw_observation(problem, NoiseSpec("gaussian", float(rng.choice([0.01, 0.1])), 404, i))
        ysq = float(run.y @ run.y)
        for frac in rng.uniform(0.0, 1.0, 5):
            kappa = frac * ysq
            traj = run_cgne(problem, run, StoppingConfig(kappa=kappa))
            if traj.crossing_index is None:
                assert traj.termination is Termination.EMERGENCY
                continue
            tau = stop_tau(traj, kappa)
            worst = max(worst, abs(residual_sq_at(traj, tau) - kappa) / kappa)
            n += 1
    assert report(4, worst <= 1e-9 and n >= 100, f"R_tau^2 == kappa, {n} stops, worst relative {worst:.2e} (tol 1e-9)")


REFERENCE_MEDIANS = {
    "supersmooth": (5.07, 0.18, 0.87),
    "smooth": (11.45, 0.41, 6.01),
    "rough": (14.15, 0.67, 22.69),
}


@pytest.fixture(scope="module")
def reference_runs():
    out = {}
    for signal in REFERENCE_MEDIANS:
        cfg = ExperimentConfig(problem=ProblemSpec(signal=signal, D=10000), delta=0.01, n_runs=200)
        out[signal] = summarize(run_records(cfg))
    return out


def test_5_reference_medians(reference_runs):
    ok, parts = True, []
    for signal, (tau, pred, rec) in REFERENCE_MEDIANS.items():
        med = reference_runs[signal].median
        checks = (
            ("tau", med["tau"], tau, 0.20),
            ("pred", med["pred_err_tau"], pred, 0.25),
            ("rec", med["rec_err_tau"], rec, 0.15),
        )
        for name, got, want, tol in checks:
            good = abs(got - want) <= tol * want
            ok &= good
            parts.append(f"{signal} {name} {got:.4g} vs {want} (+-{tol:.0%}){'' if good else ' OUT'}")
    assert report(5, ok, "reference medians; " + "; ".join(parts))


def test_6_relative_efficiency(reference_runs):
    ok, parts = True, []
    for signal in ("smooth", "rough"):
        med = reference_runs[signal].median
        for name in ("releff_pred", "releff_rec"):
            good = med[name] >= 0.5
            ok &= good
            parts.append(f"{signal} {name} {med[name]:.3f}")
    assert report(6, ok, "median relative efficiency >= 0.5; " + "; ".join(parts))


@pytest.mark.slow
def test_7_rate_study():
    base = ExperimentConfig(problem=ProblemSpec(signal="rough"), n_runs=100)
    rows = rate_study(base, range(2, 9), R=1000.0, mu=0.25, p=0.5)
    slopes = rate_slopes(rows)
    pred_exp, rec_exp = minimax_exponents(0.25, 0.5)
    sp, sr = slopes["mean_pred_tau"], slopes["mean_rec_tau"]
    ok = abs(sp - pred_exp) <= 0.15 and abs(sr - rec_exp) <= 0.2
    assert report(7, ok, f"rate slopes m=2..8: pred {sp:.3f} (target {pred_exp:.3f} +-0.15), "
                         f"rec {sr:.3f} (target {rec_exp:.3f} +-0.2)")


def test_8_discrepancy_principle_guarantee():
    rng = np.random.default_rng(808)
    worst, n = 0.0, 0
    configs = [ExperimentConfig(problem=ProblemSpec(signal="rough", D=10000), delta=0.01,
                                noise_model="deterministic", kappa_rule=KappaRule.DN, dn_c=2.0, n_runs=50)]
    for _ in range(10):
        D = int(rng.integers(20, 500))
        configs.append(ExperimentConfig(
            problem=ProblemSpec(signal=str(rng.choice(list(REFERENCE_MEDIANS))), D=D, p=float(rng.choice([0.3, 0.5, 1.0]))),
            delta=float(rng.choice([0.01, 0.1])), noise_model="deterministic", kappa_rule="dn",
            dn_c=2.0, n_runs=10, master_seed=int(rng.integers(1 << 30))))
    for cfg in configs:
        problem = cfg.problem.build()
        scfg = cfg.stopping()
        for i in range(cfg.n_runs):
            run = draw_observation(problem, NoiseSpec("deterministic", cfg.delta, cfg.master_seed, i))
            traj = run_cgne(problem, run, scfg)
            tau = stop_tau(traj, scfg.kappa)
            worst = max(worst, np.sqrt(prediction_error(problem, run, traj, tau)) / (3 * cfg.delta))
            n += 1
    assert report(8, worst <= 1.0, f"|A(f_tau - f)| <= 3 delta with c = 2, {n} runs, worst ratio {worst:.3f}")


def test_9_gravity_smoke():
    cfg = ExperimentConfig(problem=ProblemSpec(kind="gravity", D=1024, depth=0.25), delta=0.01,
                           kappa_rule=KappaRule.DELTA_SQ_D_PLUS_SQRT_D, n_runs=50)
    records = run_records(cfg)
    summary = summarize(records)
    eff = np.array([[r.releff_pred, r.releff_rec] for r in records])
    ok = len(records) == 50 and bool(np.all((eff >= 0) & (eff <= 1)))
    assert report(9, ok, f"gravity D=1024, 50 runs, relative efficiencies in [0, 1]: {ok}, "
                         f"emergency-stop fraction {summary.emergency_fraction:.2f}")
