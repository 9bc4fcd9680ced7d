"""Exception types raised by the lab.

Every error derives from :class:`LabError` so callers can catch the whole
family at once.  Several errors carry the offending vertex or node so that
verification failures can be located on the domain.
"""

from __future__ import annotations


class LabError(Exception):
    """Base class for all errors raised by :mod:`longitude_lab`."""


# --- sphere geometry -------------------------------------------------------


class OnAxis(LabError):
    """The point lies (numerically) on the codimension-2 subsphere r = 0."""

    def __init__(self, message: str, vertex: int | None = None):
        super().__init__(message)
        self.vertex = vertex


class OnBranchCut(LabError):
    """The point is closer to the branch cut than the chart margin allows."""

    def __init__(self, message: str, vertex: int | None = None):
        super().__init__(message)
        self.vertex = vertex


class BranchJump(LabError):
    """Angle continuation met a step larger than the allowed jump."""


class NotTangent(LabError):
    """A direction is not a unit tangent vector at the base point."""


class NoMargin(LabError):
    """A sample is too close to r = 0 to build the convex function."""


class SearchExhausted(LabError):
    """The doubling search for the exponent did not succeed."""


class DegenerateCircle(LabError):
    """The vectors meant to span a great circle are linearly dependent."""


# --- graphs and elliptic problems ------------------------------------------


class InvalidGraph(LabError):
    """A weighted graph violates one of its structural invariants."""


class SingularSystem(LabError):
    """Some interior component of the domain does not touch the boundary."""


class NonPositiveCoefficient(LabError):
    """A coefficient multiplier is not strictly positive."""


class EmptyBall(LabError):
    """A metric ball contains no vertex."""


class DisconnectedBall(LabError):
    """The subgraph induced by a ball is not connected."""


class NonPositiveField(LabError):
    """A field expected to be positive has a non-positive entry."""


class InvalidRange(LabError):
    """A numeric parameter lies outside its admissible range."""


class InvalidDimension(LabError):
    """The dimension parameter is not supported."""


# --- harmonic maps ---------------------------------------------------------


class ZeroAverage(LabError):
    """A weighted neighbour average vanished during the flow."""

    def __init__(self, message: str, vertex: int | None = None):
        super().__init__(message)
        self.vertex = vertex


class NonConvergence(LabError):
    """An iteration hit its cap before reaching the tolerance."""


class NotCompactlySupported(LabError):
    """A test function does not vanish on the boundary vertices."""


class ShrinkViolated(LabError):
    """The image-shrinking inequality failed at some vertex."""

    def __init__(self, message: str, vertex: int | None = None, report=None):
        super().__init__(message)
        self.vertex = vertex
        self.report = report


# --- minimal graphs --------------------------------------------------------


class NewtonDiverged(LabError):
    """Newton's method (with its fallbacks) failed to reduce the residual."""


class SteepBoundary(LabError):
    """Gradients became too large during the minimal-surface solve."""


class BoundaryNode(LabError):
    """A central-difference quantity was requested at a boundary node."""


class InsufficientStencil(LabError):
    """Second differences are not available at the requested sample."""


class NonTransverse(LabError):
    """The Gauss map is not strictly positive against the chosen direction."""


class NotMinimal(LabError):
    """The patch has non-negligible mean curvature."""


class GaussImageOutOfChart(LabError):
    """The Gauss image leaves the domain of the longitude chart."""


class InsufficientScales(LabError):
    """Too few radii were supplied for a growth fit."""


# --- experiments -----------------------------------------------------------


class ConfigError(LabError):
    """An experiment configuration is invalid."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
