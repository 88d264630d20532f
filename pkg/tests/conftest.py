import numpy as np
import pytest

from cgstop.cgne import StoppingConfig, run_cgne
from cgstop.noise import NoiseModel, NoiseSpec, draw_observation
from cgstop.problem import make_polynomial_decay_problem
from cgstop.respoly import build_diagnostics


def small_instance(D=20, p=0.5, delta=0.05, seed=0, run_index=0, signal=None, full=False, **stop):
    """Diagonal problem, one observation, its trajectory and diagnostics."""
    if signal is None:
        signal = np.random.default_rng(seed).standard_normal(D) * np.arange(1, D + 1) ** -1.0
    problem = make_polynomial_decay_problem(D, p, signal=signal)
    run = draw_observation(problem, NoiseSpec(NoiseModel.GAUSSIAN, delta, seed, run_index))
    if full:
        stop.setdefault("emergency_threshold", 0.0)
    traj = run_cgne(problem, run, StoppingConfig(**stop))
    return problem, run, traj, build_diagnostics(traj)


@pytest.fixture
def instance():
    return small_instance()


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
