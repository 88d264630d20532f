"""Monte-Carlo harness: per-run stopping/oracle records, summaries, rate study.

Runs are keyed by ``(master_seed, run_index)`` so the records of an
experiment do not depend on the number of workers or on scheduling; the pool
only changes wall-clock time. Errors in run records are root errors (norms),
which is also what the relative efficiencies compare.
"""

from __future__ import annotations

import concurrent.futures as cf
import enum
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .cgne import StoppingConfig, Termination, interpolated_estimate, run_cgne, stop_tau
from .errors import oracle_minima, prediction_error, reconstruction_error
from .exceptions import ConfigError, ProblemError, StoppingNotReached
from .export import write_csv
from .noise import NoiseModel, NoiseSpec, draw_observation
from .problem import make_gravity_problem, make_polynomial_decay_problem, make_test_signal

log = logging.getLogger(__name__)


class KappaRule(str, enum.Enum):
    DELTA_SQ_D = "delta2D"
    DELTA_SQ_D_PLUS_SQRT_D = "delta2D+sqrtD"
    EXPLICIT = "explicit"
    DN = "dn"


@dataclass(frozen=True)
class ProblemSpec:
    """Recipe for a forward problem; cheap to pickle into worker processes."""

    kind: str = "diagonal"  # "diagonal" or "gravity"
    signal: str = "rough"
    D: int = 10000
    p: float = 0.5
    scale: float = 1.0
    depth: float = 0.25
    rel_floor: float = 1e-14
    cache: str | None = None

    def __post_init__(self):
        if self.kind not in ("diagonal", "gravity"):
            raise ConfigError(f"unknown problem kind {self.kind!r}")
        if self.D < 3:
            raise ConfigError(f"D must be >= 3, got {self.D}")

    def build(self):
        if self.kind == "gravity":
            return make_gravity_problem(self.D, self.depth, self.rel_floor, self.cache)
        return make_polynomial_decay_problem(
            self.D, self.p, self.scale, make_test_signal(self.signal, self.D)
        )


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    delta: float = 0.01
    noise_model: str = "gaussian"
    kappa_rule: KappaRule = KappaRule.DELTA_SQ_D
    kappa: float | None = None  # used by the explicit rule
    dn_c: float = 2.0  # used by the dn rule: kappa = (c delta)^2
    n_runs: int = 200
    master_seed: int = 0
    extra_iterations: int = 15
    emergency_threshold: float = 1e-8
    max_index: int | None = None
    exclude_emergency: bool = False
    reorthogonalize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kappa_rule", KappaRule(self.kappa_rule))
        if self.n_runs < 1:
            raise ConfigError(f"n_runs must be >= 1, got {self.n_runs}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.kappa_rule is KappaRule.EXPLICIT and (self.kappa is None or self.kappa < 0):
            raise ConfigError("explicit kappa rule needs a nonnegative kappa")
        if self.kappa_rule is KappaRule.DN and self.dn_c < 0:
            raise ConfigError("dn rule needs c >= 0")

    def resolve_kappa(self, D=None) -> float:
        D = self.problem.D if D is None else D
        d2 = self.delta**2
        if self.kappa_rule is KappaRule.DELTA_SQ_D:
            return d2 * D
        if self.kappa_rule is KappaRule.DELTA_SQ_D_PLUS_SQRT_D:
            return d2 * D + d2 * math.sqrt(D)
        if self.kappa_rule is KappaRule.EXPLICIT:
            return float(self.kappa)
        return self.dn_c**2 * d2

    def stopping(self) -> StoppingConfig:
        return StoppingConfig(
            kappa=self.resolve_kappa(),
            emergency_threshold=self.emergency_threshold,
            max_index=self.max_index,
            extra_iterations=self.extra_iterations,
            reorthogonalize=self.reorthogonalize,
        )


@dataclass(frozen=True)
class RunRecord:
    run_index: int
    tau: float
    t_w: float
    t_s: float
    pred_err_tau: float
    pred_err_oracle: float
    rec_err_tau: float
    rec_err_oracle: float
    releff_pred: float
    releff_rec: float
    emergency_stop: bool
    terminal_index: int


RUN_COLUMNS = tuple(f.name for f in fields(RunRecord))


def _ratio(best, at_tau):
    # both zero means tau is on the optimum
    if at_tau == 0.0:
        return 1.0
    return min(best / at_tau, 1.0)


def simulate_run(problem, cfg: ExperimentConfig, run_index: int) -> RunRecord:
    """One Monte-Carlo run: observe, iterate, stop at ``tau``, compare with oracles.

    A run whose trajectory ends by emergency stop before the residual
    reaches ``kappa`` is flagged and evaluated at its terminal index.
    """
    spec = NoiseSpec(NoiseModel(cfg.noise_model), cfg.delta, cfg.master_seed, run_index)
    run = draw_observation(problem, spec)
    scfg = cfg.stopping()
    traj = run_cgne(problem, run, scfg)
    emergency = False
    try:
        tau = stop_tau(traj, scfg.kappa)
    except StoppingNotReached as exc:
        tau = float(exc.terminal_index)
        emergency = traj.termination is Termination.EMERGENCY
    pred = math.sqrt(prediction_error(problem, run, traj, tau))
    rec = math.sqrt(reconstruction_error(problem, run, traj, tau))
    (t_w, pw), (t_s, ps) = oracle_minima(problem, run, traj)
    pw, ps = math.sqrt(pw), math.sqrt(ps)
    return RunRecord(
        run_index=run_index,
        tau=tau,
        t_w=t_w,
        t_s=t_s,
        pred_err_tau=pred,
        pred_err_oracle=min(pw, pred),
        rec_err_tau=rec,
        rec_err_oracle=min(ps, rec),
        releff_pred=_ratio(pw, pred),
        releff_rec=_ratio(ps, rec),
        emergency_stop=emergency,
        terminal_index=traj.terminal_index,
    )


def median_mad(values) -> tuple[float, float]:
    """Median and mean absolute deviation around the median."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("median_mad needs at least one value")
    med = float(np.median(v))
    return med, float(np.mean(np.abs(v - med)))


SUMMARY_FIELDS = (
    "tau", "t_w", "t_s", "pred_err_tau", "pred_err_oracle", "rec_err_tau",
    "rec_err_oracle", "releff_pred", "releff_rec",
)


@dataclass(frozen=True, eq=False)
class McSummary:
    records: tuple
    median: dict
    mad: dict
    emergency_fraction: float
    n_used: int

    @property
    def n_runs(self) -> int:
        return len(self.records)

    def table_record(self) -> dict:
        out = {"n_runs": self.n_runs, "n_used": self.n_used, "emergency_fraction": self.emergency_fraction}
        for name in SUMMARY_FIELDS:
            out[name] = {"median": self.median[name], "mad": self.mad[name]}
        return out


def summarize(records, exclude_emergency=False) -> McSummary:
    records = tuple(records)
    if not records:
        raise ValueError("cannot summarise an empty set of runs")
    flags = np.array([r.emergency_stop for r in records])
    used = [r for r in records if not (exclude_emergency and r.emergency_stop)]
    if not used:
        raise ValueError("every run was an emergency stop; nothing left to summarise")
    med, mad = {}, {}
    for name in SUMMARY_FIELDS:
        med[name], mad[name] = median_mad([getattr(r, name) for r in used])
    return McSummary(records, med, mad, float(flags.mean()), len(used))


# worker-process state: the problem is built once per process
_WORKER = {}


def _init_worker(cfg):
    _WORKER["cfg"] = cfg
    _WORKER["problem"] = cfg.problem.build()


def _work(run_index):
    return simulate_run(_WORKER["problem"], _WORKER["cfg"], run_index)


def run_records(cfg: ExperimentConfig, workers=1, problem=None) -> list[RunRecord]:
    """Per-run records ordered by ``run_index``."""
    indices = range(cfg.n_runs)
    workers = max(1, int(workers))
    if workers == 1 or cfg.n_runs == 1:
        problem = problem if problem is not None else cfg.problem.build()
        return [simulate_run(problem, cfg, i) for i in indices]
    chunk = max(1, cfg.n_runs // (4 * workers))
    with cf.ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(cfg,)) as ex:
        return list(ex.map(_work, indices, chunksize=chunk))


def run_monte_carlo(cfg: ExperimentConfig, workers=1, problem=None) -> McSummary:
    return summarize(run_records(cfg, workers, problem), cfg.exclude_emergency)


def write_runs_csv(path, records, header_line=None):
    write_csv(path, RUN_COLUMNS, (tuple(asdict(r).values()) for r in records), header_line)


@dataclass(frozen=True)
class RateRow:
    m: int
    D: int
    delta: float
    mean_pred_tau: float
    mean_pred_oracle: float
    mean_rec_tau: float
    mean_rec_oracle: float
    theory_pred: float
    theory_rec: float


RATE_COLUMNS = tuple(f.name for f in fields(RateRow))


def rate_schedule(m, R=1000.0, mu=0.25, p=0.5):
    """``(D_m, delta_m)`` with ``D_m = 100 * 2**m``, ``delta_m = R D_m^(-2 mu p - p - 1/2)``."""
    D = 100 * 2 ** int(m)
    return D, R * D ** (-2.0 * mu * p - p - 0.5)


def minimax_exponents(mu=0.25, p=0.5) -> tuple[float, float]:
    """Exponents of ``delta`` in the prediction and reconstruction rates."""
    den = 4.0 * mu * p + 2.0 * p + 1.0
    return (8.0 * mu * p + 4.0 * p) / den, 8.0 * mu * p / den


def rate_study(base: ExperimentConfig, m_range=range(11), R=1000.0, mu=0.25, p=0.5,
               workers=1, max_dim=1 << 20) -> list[RateRow]:
    """Mean squared errors at ``tau`` and at the oracles along the ``(D_m, delta_m)`` schedule.

    ``base`` supplies the signal, kappa rule, run count and seed; the seed of
    level ``m`` is offset by ``m * 2**32`` so levels use independent noise.
    """
    if base.problem.kind != "diagonal":
        raise ConfigError("the rate study needs a diagonal problem")
    rows = []
    for m in m_range:
        D, delta = rate_schedule(m, R, mu, p)
        if D > max_dim:
            raise ProblemError(f"D_m={D} at m={m} exceeds the memory cap {max_dim}")
        cfg = replace(
            base,
            problem=replace(base.problem, D=D, p=p),
            delta=delta,
            master_seed=base.master_seed + (int(m) << 32),
        )
        recs = run_records(cfg, workers)
        sq = np.array([[r.pred_err_tau, r.pred_err_oracle, r.rec_err_tau, r.rec_err_oracle] for r in recs]) ** 2
        mean = sq.mean(axis=0)
        rows.append(RateRow(
            m=int(m), D=D, delta=delta,
            mean_pred_tau=float(mean[0]), mean_pred_oracle=float(mean[1]),
            mean_rec_tau=float(mean[2]), mean_rec_oracle=float(mean[3]),
            theory_pred=R * R * D ** (-4.0 * mu * p - 2.0 * p),
            theory_rec=R * R * D ** (-4.0 * mu * p),
        ))
        log.info("rates m=%d D=%d delta=%.4g done", m, D, delta)
    return rows


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def rate_slopes(rows) -> dict:
    delta = [r.delta for r in rows]
    return {
        name: loglog_slope(delta, [getattr(r, name) for r in rows])
        for name in ("mean_pred_tau", "mean_pred_oracle", "mean_rec_tau", "mean_rec_oracle")
    }


def write_rates_csv(path, rows, header_line=None):
    write_csv(path, RATE_COLUMNS, (tuple(asdict(r).values()) for r in rows), header_line)


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))
