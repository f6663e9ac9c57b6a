"""
Type definitions and error hierarchy for the jet-particle registration toolkit
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Any, Optional


class ErrorType(Enum):
    """Error categories for command-level error handling"""
    VALIDATION_ERROR = "validation_error"
    IO_ERROR = "io_error"
    NUMERICAL_ERROR = "numerical_error"
    OPTIMIZER_ERROR = "optimizer_error"
    CHECK_FAILED = "check_failed"


class JetRegError(Exception):
    """Base class for all toolkit errors"""
    error_type = ErrorType.VALIDATION_ERROR


class InvalidArgumentError(JetRegError, ValueError):
    """Raised on non-finite or out-of-range inputs"""
    pass


class UnsupportedOrderError(JetRegError, ValueError):
    """Raised when a derivative or jet order is outside the supported range"""
    pass


class OrderMismatchError(JetRegError, ValueError):
    """Raised when a matching order exceeds the jet order of a state"""
    pass


class ShapeMismatchError(JetRegError, ValueError):
    """Raised when array blocks or flat vectors have incompatible shapes"""
    pass


class ImageFormatError(JetRegError):
    """Raised when an image file cannot be read or written"""
    error_type = ErrorType.IO_ERROR


class BlowUpError(JetRegError, FloatingPointError):
    """Raised when an integrator produces a non-finite state"""
    error_type = ErrorType.NUMERICAL_ERROR

    def __init__(self, message: str, time_node: int, time: float):
        super().__init__(f"{message} (first bad time node {time_node}, t={time:.6g})")
        self.time_node = time_node
        self.time = time


class OptimizerError(JetRegError):
    """Raised when the registration objective cannot be evaluated at the starting point"""
    error_type = ErrorType.OPTIMIZER_ERROR


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned domain [x0, x1] x [y0, y1] in world units"""
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise InvalidArgumentError(f"degenerate domain {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @classmethod
    def unit_square(cls) -> 'Rectangle':
        return cls(0.0, 0.0, 1.0, 1.0)

    @classmethod
    def parse(cls, text: str) -> 'Rectangle':
        """Parse 'x0,y0,x1,y1'"""
        try:
            x0, y0, x1, y1 = (float(v) for v in text.split(","))
        except ValueError:
            raise InvalidArgumentError(f"rectangle must be 'x0,y0,x1,y1', got '{text}'")
        return cls(x0, y0, x1, y1)

    def as_list(self):
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass
class CommandResult:
    """Standardized outcome of a CLI command"""
    success: bool
    data: Optional[Dict[str, Any]] = None
    error: Optional[str] = None
    error_type: Optional[ErrorType] = None

    @classmethod
    def success_response(cls, data: Dict[str, Any]) -> 'CommandResult':
        """Create a successful result"""
        return cls(success=True, data=data)

    @classmethod
    def error_response(cls, error: str, error_type: ErrorType,
                       data: Optional[Dict[str, Any]] = None) -> 'CommandResult':
        """Create an error result"""
        return cls(success=False, data=data, error=error, error_type=error_type)
