"""Exception hierarchy shared by every pipeline stage."""


class NQJointError(Exception):
    pass


class InputError(NQJointError):
    """Bad user-supplied data. The CLI maps this family to exit code 1."""


class ParseError(InputError):
    def __init__(self, field: str, message: str, line: int | None = None):
        super().__init__(field, message)
        self.field = field
        self.message = message
        self.line = line

    def __str__(self) -> str:
        where = f" (line {self.line})" if self.line is not None else ""
        return f"{self.field}: {self.message}{where}"


class ValidationError(InputError):
    def __init__(self, message: str, example_id: int | None = None, line: int | None = None):
        super().__init__(message, example_id)
        self.message = message
        self.example_id = example_id
        self.line = line

    def __str__(self) -> str:
        prefix = f"example {self.example_id}: " if self.example_id is not None else ""
        where = f" (line {self.line})" if self.line is not None else ""
        return f"{prefix}{self.message}{where}"


class AlignmentError(InputError):
    pass


class ConfigError(InputError):
    pass


class NumericError(NQJointError, ArithmeticError):
    pass


class TrainingError(NumericError):
    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"step {step}: {message}")
