"""Exception hierarchy shared across the package."""


class ProbMeshlessError(Exception):
    pass


class ConfigurationError(ProbMeshlessError, ValueError):
    """Bad kernel/problem/experiment configuration."""


class UnsupportedOperatorError(ProbMeshlessError, ValueError):
    """Operator needs more derivatives than the kernel family has in closed form."""


class DomainError(ProbMeshlessError, ValueError):
    pass


class NumericalError(ProbMeshlessError, ArithmeticError):
    pass


class IllConditionedDesignError(NumericalError):
    """Cholesky failed even after jitter escalation."""

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(f"{message} (smallest eigenvalue estimate {min_eigenvalue:.3e})")
        self.min_eigenvalue = min_eigenvalue


class UnsupportedPriorError(ProbMeshlessError, ValueError):
    pass


class OracleError(NumericalError):
    """A crude-solution Newton branch failed to converge."""


class MultiplicityError(NumericalError):
    """Fewer distinct solutions than declared."""


class CalibrationError(NumericalError):
    pass
