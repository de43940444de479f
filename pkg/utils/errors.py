"""
Exception hierarchy for basket-ssd
"""

from typing import Optional, Sequence


class BasketSSDError(Exception):
    """Base class for all basket-ssd errors"""


class DomainError(BasketSSDError, ValueError):
    """An argument lies outside the mathematical domain of a function"""


class DesignValidationError(BasketSSDError, ValueError):
    """A design or config file is malformed; the message names the field"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ConfigurationError(DesignValidationError):
    """A simulation cannot be set up from the given configuration"""


class ConvergenceError(BasketSSDError, RuntimeError):
    """Newton's method did not reach the residual tolerance"""

    def __init__(
        self,
        message: str,
        last_iterate: Sequence[float] = (),
        residuals: Sequence[float] = (),
        iterations: int = 0,
    ):
        self.last_iterate = list(last_iterate)
        self.residuals = list(residuals)
        self.iterations = iterations
        super().__init__(message)


class SubtrialIndexError(BasketSSDError, IndexError):
    """A subtrial index is out of range or pairs a subtrial with itself"""
