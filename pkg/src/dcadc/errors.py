"""Exception types shared across the package."""


class DCError(Exception):
    """Base class for Duration Calculus errors."""


class OutOfRangeError(DCError):
    pass


class SchemaError(DCError):
    pass


class EvaluationError(DCError):
    pass


class UnboundVariableError(EvaluationError):
    pass


class DivisionByZeroError(EvaluationError):
    pass


class ParseError(DCError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class DeclarationError(DCError):
    pass


class InputError(ValueError):
    """Malformed data instance, batch or stream record."""


class CellStateError(RuntimeError):
    """Cell operation called in the wrong lifecycle state."""


class SchedulerOverflowError(RuntimeError):
    """Events of one iteration do not fit in the iteration period."""


class InstrumentationError(RuntimeError):
    pass


class InsufficientTraceError(ValueError):
    pass


class MergeError(ValueError):
    pass


class ConfigError(ValueError):
    pass
