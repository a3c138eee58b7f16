"""Exception types raised across the package."""


class RecoveryError(RuntimeError):
    """Base class for numerical failures during sparse recovery."""


class SingularSystemError(RecoveryError):
    """A least-squares subproblem is rank deficient."""


class DegenerateDictionaryError(RecoveryError):
    """No candidate column remains outside the span of the selected ones."""


class InstanceTooLargeError(ValueError):
    """Exhaustive search was requested on an instance above the size guard."""


class UnreachableTargetError(RuntimeError):
    """A measurement-count search exhausted its bracket without success."""
