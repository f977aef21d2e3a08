"""Exception types shared across the package."""


class SwarmformError(Exception):
    """Base class for all package errors."""


class EmptyCloud(SwarmformError):
    """GMM fitting requested on a point cloud with no points."""


class MalformedFrame(SwarmformError):
    """A wire frame failed magic/length/version validation."""


class OutOfBounds(SwarmformError):
    """A map query fell outside the grid interior."""


class NoPath(SwarmformError):
    """Grid search could not reach the goal (start enclosed)."""


class SingularSystem(SwarmformError):
    """Polynomial fitting received non-positive segment durations."""


class TooShort(SwarmformError):
    """Trajectory too short to carry a cubic B-spline."""


class OutOfRange(SwarmformError):
    """A time query fell outside the covered interval."""


class DimensionMismatch(SwarmformError):
    """Candidate tensors disagree in shape."""


class InfeasibleScenario(SwarmformError):
    """Scenario generation could not honor start/goal clearance."""


class ConfigError(SwarmformError):
    """A run configuration failed validation; the message names the field."""
