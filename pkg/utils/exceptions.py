import logging

logger = logging.getLogger(__name__)


class status:
    EXIT_OK = 0
    EXIT_FAILED = 1
    EXIT_USAGE = 2


class ToolkitException(Exception):
    """Base error carrying the exit status the CLI reports"""

    def __init__(self, status_code: int, detail: str):
        super().__init__(detail)
        self.status_code = status_code
        self.detail = detail

    def __str__(self):
        return self.detail


class InvalidInputError(ToolkitException):
    def __init__(self, detail: str):
        super().__init__(status_code=status.EXIT_USAGE, detail=detail)


class UnsupportedError(ToolkitException):
    def __init__(self, detail: str):
        super().__init__(status_code=status.EXIT_USAGE, detail=detail)


class NumericalError(ToolkitException):
    """Quadrature or line-search breakdown"""

    def __init__(self, detail: str, trace=None):
        super().__init__(status_code=status.EXIT_FAILED, detail=detail)
        self.trace = trace
