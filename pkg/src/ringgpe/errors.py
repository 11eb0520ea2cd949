"""Exception types shared across the solvers."""


class NumericalError(RuntimeError):
    """A solver left its validity envelope (NaN state, lost convergence,
    step-size underflow, linear-solve residual above contract)."""


class ConfigError(ValueError):
    """A run configuration is malformed, incomplete, or out of range.

    The command line maps this to exit code 2; numerical failures map to 3."""
