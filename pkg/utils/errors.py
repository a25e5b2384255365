"""
Exception types raised by the quadtree ladder toolkit
"""
from typing import Optional


class QtreeError(Exception):
    """Base class for all toolkit errors"""


class FrameFormatError(QtreeError, ValueError):
    """Malformed container or header"""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class TruncatedFrameError(QtreeError, ValueError):
    """A frame payload ended before its declared size"""

    def __init__(self, frame_index: int, expected: int, got: int):
        self.frame_index = frame_index
        super().__init__(
            f"Frame {frame_index} is truncated: expected {expected} bytes, got {got}"
        )


class UnsupportedFormatError(QtreeError, ValueError):
    """Chroma layout or bit depth outside 8-bit 4:2:0 / 4:0:0"""


class InvalidArgumentError(QtreeError, ValueError):
    pass


class DegenerateRegionError(QtreeError, ValueError):
    """Neighborhood region has no area left after clipping"""


class InputMismatchError(QtreeError, ValueError):
    """Two inputs that must be aligned are not"""


class CalibrationError(QtreeError):
    pass


class ConfigError(QtreeError, ValueError):
    pass


class ReportError(QtreeError):
    pass


class DomainError(QtreeError, ValueError):
    """Inputs outside the domain where a metric is defined"""
