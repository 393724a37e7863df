"""Exception hierarchy shared across the package."""


class BoundaryDetectError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(BoundaryDetectError):
    """Malformed data, out-of-range parameters, shape mismatches."""


class InvalidConfigurationError(BoundaryDetectError):
    """A configuration that is self-consistent but infeasible, e.g. an empty
    admissible window for the consistent decision rule."""


class DegenerateSampleError(BoundaryDetectError):
    """The k-th nearest neighbour coincides with the query point, so the
    neighbourhood radius is zero and the statistic is undefined."""


class InsufficientInteriorPointsError(BoundaryDetectError):
    """Too few points classified as far from the boundary for the restricted
    goodness-of-fit discrepancy to be meaningful."""


class SelectionFailedError(BoundaryDetectError):
    """Every candidate neighbour count failed; per-candidate causes attached."""

    def __init__(self, message, causes=None):
        super().__init__(message)
        self.causes = dict(causes or {})
