"""
Simulator exceptions

Defines the exception hierarchy used across the simulator so that the
CLI can map failures to exit codes and print clear diagnostics.
"""


class SimulationError(Exception):
    """Base exception for all simulator errors"""

    def __init__(self, message: str, component: str = None, cause: Exception = None):
        self.component = component
        self.cause = cause

        if component:
            message = f"[{component}] {message}"

        if cause:
            message = f"{message} (caused by: {cause})"

        super().__init__(message)


class ConfigurationError(SimulationError):
    """Raised when a configuration value is out of range or inconsistent"""

    def __init__(self, message: str, key: str = None, value=None,
                 allowed: str = None, cause: Exception = None):
        self.key = key
        self.value = value
        self.allowed = allowed
        if key is not None:
            message = f"{message}: {key}={value!r}"
            if allowed:
                message = f"{message} (allowed: {allowed})"
        super().__init__(message, component="config", cause=cause)


class SimulationSetupError(SimulationError):
    """Raised when a deployment cannot be built, e.g. attachment never converges"""
    pass


class CsiAccessError(SimulationError):
    """Raised when a scheduler reads CSI outside its information scope"""

    def __init__(self, message: str, trp_id: int = None, cause: Exception = None):
        self.trp_id = trp_id
        super().__init__(message, component="csi", cause=cause)


class DeterminismError(SimulationError):
    """Raised when a repeated run does not reproduce its sample stream"""

    def __init__(self, message: str, expected: str = None, actual: str = None):
        self.expected = expected
        self.actual = actual
        super().__init__(message, component="experiment")
