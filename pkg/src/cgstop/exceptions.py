"""Exception types raised by cgstop."""


class CgStopError(Exception):
    """Base class for all library errors."""


class ProblemError(CgStopError, ValueError):
    """Invalid problem construction or dimension mismatch."""


class SvdFailure(ProblemError):
    """The singular value decomposition of a dense operator failed."""


class AssumptionYViolated(CgStopError, ValueError):
    """A block of equal singular values carries no observation energy."""

    def __init__(self, singular_value, indices):
        self.singular_value = float(singular_value)
        self.indices = tuple(int(i) for i in indices)
        super().__init__(
            f"observation has zero energy on the singular value block "
            f"lambda={self.singular_value:.6g} (indices {list(self.indices)[:8]})"
        )


class StoppingNotReached(CgStopError):
    """The trajectory terminated before the residual crossed the threshold.

    ``terminal_index`` is the fallback stopping index.
    """

    def __init__(self, kappa, terminal_index, final_residual_sq):
        self.kappa = float(kappa)
        self.terminal_index = int(terminal_index)
        self.final_residual_sq = float(final_residual_sq)
        super().__init__(
            f"residual never reached kappa={self.kappa:.6g}; trajectory ended at "
            f"T={self.terminal_index} with R_T^2={self.final_residual_sq:.6g}"
        )


class NotBalanced(CgStopError):
    """Approximation and stochastic error terms never balanced on [0, T]."""

    def __init__(self, terminal_index):
        self.terminal_index = int(terminal_index)
        super().__init__(f"A_t > S_t on the whole recorded path [0, {self.terminal_index}]")


class DiagnosticsError(CgStopError, ArithmeticError):
    """Eigen-solve or root bracketing failure in residual-polynomial diagnostics."""


class ConfigError(CgStopError, ValueError):
    """Malformed configuration file or value."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
