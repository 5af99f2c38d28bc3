"""Error hierarchy shared by the library and the CLI."""
from typing import Optional


class PharmonicError(Exception):
    """
    Base error. `code` is a stable kebab-case name (e.g. 'origin-not-interior'),
    `exit_code` is what the CLI returns when the error reaches it.
    """
    exit_code: int = 1

    def __init__(self, code: str, message: str = '') -> None:
        self.code = code
        self.message = message or code
        super().__init__(f'{code}: {self.message}')


class ValidationFailure(PharmonicError):
    """Invalid input, parameters outside their domain, or geometry that cannot be handled."""
    exit_code = 2


class ConvergenceFailure(PharmonicError):
    """An iteration hit its cap without meeting its tolerance."""
    exit_code = 3

    def __init__(
        self,
        code: str,
        message: str = '',
        residual: Optional[float] = None,
        iterations: Optional[int] = None,
    ) -> None:
        self.residual = residual
        self.iterations = iterations
        super().__init__(code, message)


class InputOutputError(PharmonicError):
    """Unreadable or malformed files."""
    exit_code = 4
