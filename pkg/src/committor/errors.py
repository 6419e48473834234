"""Exception types shared across the package."""


class CommittorError(Exception):
    """Base class for package-specific failures."""


class SimulationError(CommittorError):
    """A stochastic trajectory produced a non-finite state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class SamplingBudgetError(CommittorError):
    """The sampler exhausted its step budget before collecting enough points."""


class NumericalError(CommittorError):
    """A loss or gradient evaluation produced a non-finite number."""

    def __init__(self, message, point_index=None):
        super().__init__(message)
        self.point_index = point_index


class TrainingDivergedError(CommittorError):
    """Training loss became non-finite; carries the last finite parameters."""

    def __init__(self, message, last_theta=None, iteration=None):
        super().__init__(message)
        self.last_theta = last_theta
        self.iteration = iteration


class SolverError(CommittorError):
    """A linear system solve failed or did not reach the required residual."""


class DegenerateTruthError(CommittorError):
    """Reference committor has zero norm on the test batch."""
