"""Exception hierarchy.

ValueError subclasses cover bad user input (parameters, config files); they
map to CLI exit code 1.  SingularityError and FitError cover conditions that
arise from valid input (resonant divergence, non-convergent fits) and map to
exit code 2.
"""


class ParameterError(ValueError):
    """A physical parameter is out of its valid domain."""


class ConfigError(ValueError):
    """A scenario config file is malformed or violates the schema."""


class NoSolutionError(ValueError):
    """A calibration or inversion has no solution in the search bracket."""


class SingularityError(ArithmeticError):
    """Evaluation at or too close to a removable divergence."""


class FitError(RuntimeError):
    """A least-squares fit failed to converge or is degenerate."""
