"""Exception types raised across the package."""


class ConsensusError(Exception):
    """Base class for all package errors."""


class NotSymmetric(ConsensusError):
    pass


class NoConvergence(ConsensusError):
    pass


class DimensionMismatch(ConsensusError, ValueError):
    pass


class InvalidGraph(ConsensusError, ValueError):
    pass


class NoSpanningTree(ConsensusError):
    pass


class BracketInvalid(ConsensusError):
    pass


class BaseInfeasible(ConsensusError):
    pass


class StepTooLarge(ConsensusError, ValueError):
    pass


class InsufficientTrace(ConsensusError, ValueError):
    pass


class SchemaError(ConsensusError, ValueError):
    """Configuration failed validation; ``errors`` holds every (path, message) pair."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{path}: {msg}" for path, msg in self.errors]
        super().__init__("invalid config:\n  " + "\n  ".join(lines))
