"""Exception types shared across the package."""


class HypothesisError(ValueError):
    """An input violates one of the standing hypotheses (or a precondition)."""


class SolverError(RuntimeError):
    """A solver failed to produce a certified critical point."""
