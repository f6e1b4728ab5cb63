"""Exception hierarchy and the CLI exit codes attached to each category."""


class LCFountainError(Exception):
    exit_code = 1


class ConfigurationError(LCFountainError, ValueError):
    """Inconsistent or unsupported parameters."""

    exit_code = 2


class ParseError(LCFountainError, ValueError):
    exit_code = 3

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class InfeasibleError(LCFountainError):
    exit_code = 4


class CorruptionError(LCFountainError):
    """Payloads that contradict each other; carries the offending batch when known."""

    exit_code = 5

    def __init__(self, message, batch=None):
        if batch is not None:
            message = f"{message} (batch {batch})"
        super().__init__(message)
        self.batch = batch


class DegenerateChannelError(ConfigurationError):
    pass


class InvalidArgumentError(LCFountainError, ValueError):
    exit_code = 2


class ContractViolation(LCFountainError, RuntimeError):
    exit_code = 6
