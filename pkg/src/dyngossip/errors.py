"""Exception hierarchy shared across the simulator."""


class DyngossipError(Exception):
    """Base class for all simulator errors."""


class ConfigError(DyngossipError):
    """Invalid or inconsistent run configuration."""


class ContractViolationError(DyngossipError):
    """A protocol broke the broadcast contract (unknown token or oversized set)."""


class PromiseViolationError(DyngossipError):
    """An adversary emitted a graph that breaks its connectivity promise."""


class ConstructionError(DyngossipError):
    """An adversary's internal construction reached an impossible state."""


class TraceFormatError(DyngossipError):
    """A trace file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
