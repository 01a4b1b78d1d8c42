"""Exception hierarchy shared by the library and the CLI."""


class KeyfloodError(Exception):
    """Base class for every error raised by keyflood."""


class KeyFormatError(KeyfloodError, ValueError):
    """A bit string is not a well-formed key or binary integer."""


class ProtocolViolation(KeyfloodError, RuntimeError):
    """A node received input that an honest peer can never produce."""


class InvariantViolation(KeyfloodError, AssertionError):
    """A property that must hold on every honest run was observed broken."""


class ConfigError(KeyfloodError, ValueError):
    """An experiment configuration cannot be satisfied."""


class RoundBudgetExceeded(KeyfloodError, RuntimeError):
    """A simulation did not terminate within its round budget.

    The partial trace is attached so the caller can inspect what went wrong.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
