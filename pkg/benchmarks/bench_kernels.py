"""Compare the numba and numpy kernel backends.

Times each kernel on Monte-Carlo-sized inputs and one full simulated run per
backend, and reports the largest difference between backend outputs.

    python3 benchmarks/bench_kernels.py [--D 10000] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from cgstop import _kernels
from cgstop.experiments import ExperimentConfig, ProblemSpec, simulate_run


def bench_cg_step(impl, D, repeat):
    lam = np.arange(1, D + 1, dtype=np.float64) ** -0.5
    rng = np.random.default_rng(0)
    y = rng.standard_normal(D)

    def once(steps=30):
        f = np.zeros(D)
        r = y.copy()
        s = lam * r
        p = s.copy()
        gamma = float(s @ s)
        for _ in range(steps):
            impl.diag_cg_advance(lam, f, r, p, gamma, s)
            gamma_new = float(s @ s)
            p *= gamma_new / gamma
            p += s
            gamma = gamma_new
        return f

    once()  # compile
    # plain CG without reorthogonalisation amplifies last-bit differences, so
    # backend outputs are compared after a few steps only
    return min(timeit.repeat(once, number=1, repeat=repeat)), once(3)


def bench_product(impl, D, repeat):
    zeros = np.sort(np.random.default_rng(1).uniform(1e-4, 1.0, 30))
    x = np.arange(1, D + 1, dtype=np.float64) ** -1.0
    impl.product_form(zeros, x)
    return min(timeit.repeat(lambda: impl.product_form(zeros, x), number=1, repeat=repeat)), impl.product_form(zeros, x)


def bench_minima(impl, D, repeat):
    rng = np.random.default_rng(2)
    e0 = rng.standard_normal((30, D))
    d = rng.standard_normal((30, D))
    impl.interval_minima(e0, d)
    return min(timeit.repeat(lambda: impl.interval_minima(e0, d), number=1, repeat=repeat)), impl.interval_minima(e0, d)[1]


def bench_full_run(impl, D, repeat):
    saved = (_kernels.diag_cg_advance, _kernels.product_form, _kernels.interval_minima)
    _kernels.diag_cg_advance, _kernels.product_form, _kernels.interval_minima = (
        impl.diag_cg_advance, impl.product_form, impl.interval_minima)
    try:
        cfg = ExperimentConfig(problem=ProblemSpec(signal="rough", D=D), n_runs=1)
        problem = cfg.problem.build()
        simulate_run(problem, cfg, 0)
        best = min(timeit.repeat(lambda: simulate_run(problem, cfg, 0), number=1, repeat=repeat))
        rec = simulate_run(problem, cfg, 0)
        return best, np.array([rec.tau, rec.pred_err_tau, rec.rec_err_tau])
    finally:
        _kernels.diag_cg_advance, _kernels.product_form, _kernels.interval_minima = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--D", type=int, default=10000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    print(f"D={args.D}, best of {args.repeat}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}{'max |diff|':>13}")
    for name, fn in (("cg step x30", bench_cg_step), ("product form", bench_product),
                     ("interval minima", bench_minima), ("simulate_run", bench_full_run)):
        t_np, out_np = fn(_kernels.numpy_impl, args.D, args.repeat)
        t_nb, out_nb = fn(_kernels.numba_impl, args.D, args.repeat)
        diff = float(np.max(np.abs(np.asarray(out_np) - np.asarray(out_nb))))
        print(f"{name:<18}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>9.2f}{diff:>13.3g}")


if __name__ == "__main__":
    main()
