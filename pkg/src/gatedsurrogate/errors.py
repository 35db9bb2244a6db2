"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or out-of-domain input (dimension mismatch, NaN, out of bounds)."""


class NumericalError(ArithmeticError):
    """Cholesky factorization failed even after jitter escalation."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``violations`` lists every problem found."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class OracleError(RuntimeError):
    """The expensive evaluator failed."""
