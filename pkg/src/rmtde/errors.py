"""Exception types shared across the package."""


class ScenarioError(ValueError):
    """Inconsistent or invalid channel scenario."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ValidationFailure(AssertionError):
    """An invariant check of the validation suite failed."""


class TrialError(RuntimeError):
    """A single Monte-Carlo trial failed; ``trial`` is its index."""

    def __init__(self, trial: int, message: str):
        super().__init__(f"trial {trial}: {message}")
        self.trial = trial
