"""Semantic exception hierarchy.

Numerical failures carry their best estimate so callers can decide whether a
degraded answer is still usable.
"""

from __future__ import annotations


class GrunbaumError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatchError(GrunbaumError):
    """A point's dimension does not match the density's."""


class DegenerateDensityError(GrunbaumError):
    """Total mass below the underflow threshold."""


class AxisSupportError(GrunbaumError):
    """The requested axis misses the support of the density."""


class QuadratureError(GrunbaumError):
    """Adaptive refinement exhausted its budget.

    Carries the best estimate and the error bound actually achieved.
    """

    def __init__(self, message: str, estimate: float, achieved_error: float):
        super().__init__(f"{message} (best estimate {estimate:.12g}, "
                         f"achieved error {achieved_error:.3g})")
        self.estimate = estimate
        self.achieved_error = achieved_error


class RecenterError(GrunbaumError):
    """Translate-and-remeasure iteration failed to converge."""

    def __init__(self, message: str, last_centroid_norm: float):
        super().__init__(f"{message} (last centroid norm {last_centroid_norm:.3g})")
        self.last_centroid_norm = last_centroid_norm


class BracketError(GrunbaumError):
    """A maximizer bracket could not be located; carries the scan trace."""

    def __init__(self, message: str, scan_points, scan_values):
        super().__init__(message)
        self.scan_points = scan_points
        self.scan_values = scan_values


class HeightBelowCriticalError(GrunbaumError):
    """A comparator height fell below the critical height of its slice."""


class HeightFieldError(GrunbaumError):
    """Numerical log-concavity violation while building the height field."""

    def __init__(self, message: str, offending_points=None):
        super().__init__(message)
        self.offending_points = offending_points


class PipelineStepError(GrunbaumError):
    """A transformation step failed; carries the partial report."""

    def __init__(self, message: str, partial_report=None):
        super().__init__(message)
        self.partial_report = partial_report
