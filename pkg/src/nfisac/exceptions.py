"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`NFISACError`, so the command-line harness can map failures to
exit codes without catching unrelated exceptions.
"""


class NFISACError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(NFISACError, ValueError):
    """Raised when a configuration value violates a precondition."""


class SingularityError(NFISACError, ValueError):
    """Raised when a kernel is evaluated at coincident source/observation points."""


class SolverError(NFISACError, RuntimeError):
    """Raised when the volume integral equation cannot be solved.

    Attributes
    ----------
    condition_estimate : float or None
        Estimated condition number of the system matrix when available.
    """

    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class EstimatorNotApplicableError(NFISACError, ValueError):
    """Raised when an estimator cannot run on the given sample shape."""


class ContainerError(NFISACError, IOError):
    """Raised on malformed, truncated or inconsistent dataset containers."""
