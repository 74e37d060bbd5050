"""Exception types shared across the package."""


class ModelError(ValueError):
    """Invalid model input (market, preferences, costs, grid, config)."""


class SolverError(RuntimeError):
    """A numerical stage failed.

    ``last`` carries the most recent iterate when one is available, e.g. the
    last :class:`~tcmerton.solver.PolicySolution` when policy iteration runs
    out of iterations.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last
