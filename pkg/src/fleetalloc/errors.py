"""Exception types shared across the package.

Each error carries the process exit code the CLI maps it to.
"""


class AssignmentError(Exception):
    exit_code = 1
    code = "ERR_GENERIC"


class ParseError(AssignmentError, ValueError):
    exit_code = 2
    code = "ERR_PARSE"

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InfeasibleError(AssignmentError):
    exit_code = 3
    code = "ERR_INFEASIBLE"


class GuardExceeded(AssignmentError):
    exit_code = 4
    code = "ERR_GUARD"


class NonConvergence(AssignmentError):
    exit_code = 5
    code = "ERR_NONCONVERGENCE"

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConstraintViolation(AssignmentError):
    code = "ERR_CONSTRAINT"
