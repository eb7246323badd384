"""Exception hierarchy.

Validation and numerical problems derive from :class:`ModelError` (a
``ValueError``); broken cross-checks derive from :class:`PropertyViolation`.
The CLI maps the two families to different exit codes.
"""


class ModelError(ValueError):
    """Invalid input or a numerical failure."""


class DimensionMismatch(ModelError):
    pass


class NotPSD(ModelError):
    def __init__(self, name, min_eig=None):
        self.name = name
        self.min_eig = min_eig
        msg = f"{name} is not positive semidefinite"
        if min_eig is not None:
            msg += f" (min eigenvalue {min_eig:.3e})"
        super().__init__(msg)


class NotPD(ModelError):
    def __init__(self, name, min_eig=None):
        self.name = name
        self.min_eig = min_eig
        msg = f"{name} is not positive definite"
        if min_eig is not None:
            msg += f" (min eigenvalue {min_eig:.3e})"
        super().__init__(msg)


class NonPositiveHorizon(ModelError):
    pass


class SingularS(ModelError):
    pass


class WindowMismatch(ModelError):
    pass


class WindowTooLarge(ModelError):
    pass


class LengthMismatch(ModelError):
    pass


class MalformedProblem(ModelError):
    pass


class PropertyViolation(RuntimeError):
    """A cross-check between independent computations failed."""

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data


class OracleDisagreement(PropertyViolation):
    pass


class SoundnessViolation(PropertyViolation):
    pass


class StatisticalViolation(PropertyViolation):
    pass
