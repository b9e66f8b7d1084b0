"""Exception hierarchy shared across the package."""


class SddmflowError(Exception):
    """Base class for package errors."""


class ParameterError(SddmflowError, ValueError):
    """Invalid argument or configuration value."""


class StructureError(SddmflowError, ValueError):
    """Structurally invalid matrix, graph, or file input."""


class NumericalError(SddmflowError, RuntimeError):
    """A numerical routine failed to meet its contract."""


class ConvergenceError(NumericalError):
    """Iteration cap exhausted before the stopping rule was met."""

    def __init__(self, message, residual=None, per_node=None):
        super().__init__(message)
        self.residual = residual
        self.per_node = per_node


class ConfigurationError(ParameterError):
    """Per-node inputs disagree on shared solver configuration."""


class ProtocolError(SddmflowError, RuntimeError):
    """Simulator protocol violation (bad send, missing message)."""


class DeadlockError(ProtocolError):
    """A node awaited a message that was never sent."""

    def __init__(self, node, phase, round_idx):
        super().__init__(
            f"node {node} blocked in phase {phase!r} at round {round_idx}: "
            "expected message never sent")
        self.node = node
        self.phase = phase
        self.round_idx = round_idx
