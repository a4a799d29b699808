"""Exceptions for Chemostat Control."""
from __future__ import annotations

from typing import Optional


class ChemostatError(Exception):
    """Base class for every error raised by the package."""


class NoRootInBracket(ChemostatError):
    """The Lotka-Sharpe residual does not change sign on [D_min, D_max]."""


class NonPositiveProfile(ChemostatError):
    """An age profile has a non-positive or non-finite node."""

    def __init__(
        self, message: str, step: Optional[int] = None, node: Optional[int] = None
    ) -> None:
        """Initialize."""
        self.step = step
        self.node = node
        if step is not None or node is not None:
            message = f"{message} (step={step}, node={node})"
        super().__init__(message)


class IncompatibleBoundary(ChemostatError):
    """Initial profile violates f0(0) = integral of k f0."""


class NonPositiveSample(ChemostatError):
    """A quadrature cell endpoint is not strictly positive."""


class NonPositiveMeasurement(ChemostatError):
    """A controller measurement or reference is not strictly positive."""


class SplitMassTooLarge(ChemostatError):
    """Kernel mass on [0, Delta] is at least one."""


class IllPosedStep(ChemostatError):
    """The implicit IDE step cannot be solved, (h/2) G(0) >= 1."""


class DegenerateFit(ChemostatError):
    """Too few usable samples for a log-linear decay fit."""


class DegenerateMargin(ChemostatError):
    """D* sits on a clamp bound, so the per-period margin vanishes."""


class GridAlignmentError(ChemostatError):
    """A period, horizon or breakpoint is not an integer multiple of h."""


class ConfigParseError(ChemostatError):
    """Configuration file is missing or is not valid JSON."""


class ConfigValidationError(ChemostatError):
    """Configuration failed schema or cross-field validation."""

    def __init__(self, message: str, path: str = "") -> None:
        """Initialize."""
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class GoldenMismatch(ChemostatError):
    """Run output diverges from a golden file."""

    def __init__(self, message: str, row: int, column: str) -> None:
        """Initialize."""
        self.row = row
        self.column = column
        super().__init__(message)
