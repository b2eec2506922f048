"""
Exception hierarchy shared by every hireslab module.
"""
from typing import Any, Dict, Optional


class HiresError(Exception):
    """Base class for all hireslab errors."""
    pass


class DimensionError(HiresError, ValueError):
    """Raised when tensor or grid shapes do not line up."""
    pass


class PreconditionError(HiresError, ValueError):
    """Raised when an operation's documented precondition is violated."""
    pass


class ConfigurationError(HiresError, ValueError):
    """Raised for inconsistent configuration (e.g. RoPE without coordinates)."""
    pass


class InvariantViolation(HiresError, RuntimeError):
    """Raised when an internal invariant that callers rely on is broken."""
    pass


class TensorFormatError(HiresError, ValueError):
    """Raised for malformed TNSR1, PPM/PGM or manifest input."""
    pass


class PlacementError(HiresError):
    """Raised when entity placement fails after the bounded number of retries."""
    pass


class AmbiguousPositionError(PlacementError):
    """Raised when two entities have no dominant axis (equal |dx| and |dy|)."""
    pass


class EvaluationError(HiresError, ValueError):
    """Raised when predictions do not cover the evaluated items."""
    pass


class DivergenceError(HiresError, RuntimeError):
    """Raised when training produces a non-finite loss."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = " | ".join(f"{k}: {v}" for k, v in sorted(self.diagnostics.items()))
        return f"{base} | {details}"
