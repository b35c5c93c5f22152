"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class ClusterLpError(Exception):
    exit_code = 1


class ValidationError(ClusterLpError, ValueError):
    """Malformed input: bad partition, out-of-range parameter, parse failure."""

    exit_code = 2


class CapacityError(ClusterLpError):
    """Instance too large for an exhaustive method."""

    exit_code = 3


class InfeasibleSolutionError(ValidationError):
    pass


class SolverError(ClusterLpError):
    """The simplex method did not reach a certified optimum."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class EmptyCellError(ClusterLpError):
    pass
