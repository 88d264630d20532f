"""Command-line entry point: ``cgstop {diagnose,simulate,rates,verify}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 property violation (``verify``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, _kernels
from .cgne import run_cgne, residual_sq_at, stop_tau, write_trajectory_csv
from .config import RunConfig, format_config, load_config, with_seed
from .errors import error_curves, error_terms_at, prediction_error, reconstruction_error, write_curves_csv
from .exceptions import CgStopError, ConfigError, StoppingNotReached
from .experiments import (
    minimax_exponents, rate_slopes, rate_study, run_records, summarize, write_rates_csv, write_runs_csv,
)
from .export import timestamp_line, write_csv, write_json
from .noise import NoiseModel, NoiseSpec, draw_observation
from .respoly import build_diagnostics, write_diagnostics_csv
from .verify import CheckResult, run_all

log = logging.getLogger("cgstop")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VIOLATION = 0, 2, 3, 4
OUT_ENV = "CGSTOP_OUT_DIR"


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or ./cgstop-out)")
    common.add_argument("--workers", type=_positive_int, default=1, help="worker processes (default 1)")
    common.add_argument("--deterministic", action="store_true", help="omit timestamps from outputs")
    common.add_argument("--seed", type=int, help="master seed, overrides [mc] seed")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="cgstop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("diagnose", parents=[common], help="one run: trajectory, Ritz diagnostics, error curves")
    sub.add_parser("simulate", parents=[common], help="Monte-Carlo stopping/oracle experiment")
    sub.add_parser("rates", parents=[common], help="convergence-rate study over D_m = 100 * 2**m")
    sub.add_parser("verify", parents=[common], help="run the property suite on small instances")
    return parser


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV, "cgstop-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> RunConfig:
    if args.config is not None and not args.config.exists():
        raise ConfigError("config file not found", None, args.config)
    cfg = load_config(args.config) if args.config is not None else RunConfig()
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def _echo_config(out, cfg):
    (out / "effective_config.ini").write_text(format_config(cfg))


def cmd_diagnose(args, cfg: RunConfig, out: Path) -> int:
    exp = cfg.experiment
    problem = exp.problem.build()
    spec = NoiseSpec(NoiseModel(exp.noise_model), exp.delta, exp.master_seed, cfg.diagnose.run_index)
    run = draw_observation(problem, spec)
    scfg = exp.stopping()
    traj = run_cgne(problem, run, scfg)
    diag = build_diagnostics(traj)
    reached = True
    try:
        tau = stop_tau(traj, scfg.kappa)
    except StoppingNotReached as exc:
        reached = False
        tau = float(exc.terminal_index)
    curves = error_curves(problem, run, traj, diag, points_per_interval=cfg.diagnose.points_per_interval, tau=tau)

    header = timestamp_line(args.deterministic)
    write_trajectory_csv(out / "trajectory.csv", [(cfg.diagnose.run_index, traj)], header)
    write_diagnostics_csv(out / "diagnostics.csv", diag, header)
    write_curves_csv(out / "curves.csv", curves, header)

    summary = {
        "run_index": cfg.diagnose.run_index,
        "kappa": scfg.kappa,
        "y_norm_sq": traj.y_norm_sq,
        "termination": traj.termination.value,
        "terminal_index": traj.terminal_index,
        "kappa_reached": reached,
        "emergency_stop": (not reached) and traj.termination.value == "EmergencyStop",
        "not_balanced": bool(curves.flags.get("not_balanced", False)),
        "tau": tau,
        "R_tau_sq": residual_sq_at(traj, tau),
        "t_b": curves.balanced_oracle,
        "t_w": curves.t_pred_oracle,
        "t_s": curves.t_rec_oracle,
        "backend": _kernels.BACKEND,
    }
    for name, t in (("tau", tau), ("t_b", curves.balanced_oracle), ("t_w", curves.t_pred_oracle),
                    ("t_s", curves.t_rec_oracle)):
        S, A = error_terms_at(problem, run, traj, diag, t)
        summary[f"pred_err_{name}"] = prediction_error(problem, run, traj, t)
        summary[f"rec_err_{name}"] = reconstruction_error(problem, run, traj, t)
        summary[f"S_{name}"] = S
        summary[f"A_{name}"] = A
    write_json(out / "summary.json", summary, args.deterministic)
    _echo_config(out, cfg)
    print(f"tau={tau:.6g} t_b={curves.balanced_oracle:.6g} t_w={curves.t_pred_oracle:.6g} "
          f"t_s={curves.t_rec_oracle:.6g} termination={traj.termination.value} -> {out}")
    return EXIT_OK


def cmd_simulate(args, cfg: RunConfig, out: Path) -> int:
    exp = cfg.experiment
    records = run_records(exp, args.workers)
    summary = summarize(records, exp.exclude_emergency)
    header = timestamp_line(args.deterministic)
    write_runs_csv(out / "runs.csv", records, header)
    record = summary.table_record()
    record["kappa"] = exp.resolve_kappa()
    record["signal"] = exp.problem.signal if exp.problem.kind == "diagonal" else "gravity"
    write_json(out / "summary.json", record, args.deterministic)
    _echo_config(out, cfg)
    med, mad = summary.median, summary.mad
    for name in ("tau", "pred_err_tau", "rec_err_tau", "releff_pred", "releff_rec"):
        print(f"{name:>14}: median {med[name]:.4g} (mad {mad[name]:.3g})")
    print(f"emergency-stop fraction {summary.emergency_fraction:.3f} over {summary.n_runs} runs -> {out}")
    return EXIT_OK


def cmd_rates(args, cfg: RunConfig, out: Path) -> int:
    rc = cfg.rates
    base = replace(cfg.experiment, n_runs=rc.runs)
    rows = rate_study(base, range(rc.m_min, rc.m_max + 1), rc.R, rc.mu, rc.p, args.workers, rc.max_dim)
    write_rates_csv(out / "rates.csv", rows, timestamp_line(args.deterministic))
    pred_exp, rec_exp = minimax_exponents(rc.mu, rc.p)
    record = {"slopes": rate_slopes(rows) if len(rows) > 1 else {},
              "theory_pred_exponent": pred_exp, "theory_rec_exponent": rec_exp}
    write_json(out / "rates_summary.json", record, args.deterministic)
    _echo_config(out, cfg)
    for r in rows:
        print(f"m={r.m:2d} D={r.D:7d} delta={r.delta:.4g} pred_tau={r.mean_pred_tau:.4g} rec_tau={r.mean_rec_tau:.4g}")
    if record["slopes"]:
        s = record["slopes"]
        print(f"slope pred {s['mean_pred_tau']:.3f} (theory {pred_exp:.3f}), "
              f"rec {s['mean_rec_tau']:.3f} (theory {rec_exp:.3f})")
    return EXIT_OK


def cmd_verify(args, cfg: RunConfig, out: Path) -> int:
    results = run_all(cfg.experiment.master_seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  (worst {r.worst:.3g}, {r.draws} draws)")
    write_csv(out / "verify.csv", CheckResult._fields, results, timestamp_line(args.deterministic))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VIOLATION


COMMANDS = {"diagnose": cmd_diagnose, "simulate": cmd_simulate, "rates": cmd_rates, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        out = _out_dir(args)
        return COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(f"cgstop: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CgStopError, ArithmeticError) as exc:
        print(f"cgstop {args.command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
