"""Exception hierarchy shared across the package."""


class FairClusteringError(ValueError):
    """Base class for every structured error raised by fairkclust."""


class DimensionMismatchError(FairClusteringError):
    pass


class UnbalancedDatasetError(FairClusteringError):
    pass


class InvalidMetricError(FairClusteringError):
    pass


class InfeasibleInstanceError(FairClusteringError):
    pass


class InstanceTooLargeError(FairClusteringError):
    """Raised by the exhaustive oracles when an instance exceeds their size bounds."""


class SolverError(FairClusteringError):
    pass


class MissingMatchingError(FairClusteringError):
    pass


class DataError(FairClusteringError):
    """Problems with input tables or dataset specs. Carries optional row diagnostics."""

    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = list(rows or [])
