"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid mesh, scheme, or experiment configuration."""


class SolverError(RuntimeError):
    """A linear solve failed to reach its residual target."""


class InfeasibleError(ValueError):
    """The constrained cell-average problem has an empty feasible set."""


class ConvergenceError(RuntimeError):
    """An iteration hit its cap before meeting the stopping criterion."""
