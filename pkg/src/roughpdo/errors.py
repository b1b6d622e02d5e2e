"""Exception hierarchy.  The CLI maps these onto exit codes."""


class RoughPDOError(Exception):
    exit_code = 3


class ParameterError(RoughPDOError, ValueError):
    exit_code = 2


class ShapeError(ParameterError):
    pass


class CapabilityError(RoughPDOError):
    """A derivative order, limit, or feature the object cannot provide."""

    exit_code = 2


class NumericalError(RoughPDOError):
    exit_code = 3


class InversionError(NumericalError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class ConditioningError(NumericalError):
    pass


class HypothesisWarning(UserWarning):
    """Parameters outside a theorem's admissible window; carries the hypothesis label."""

    def __init__(self, label: str, message: str):
        super().__init__(f"[{label}] {message}")
        self.label = label


class HypothesisError(RoughPDOError):
    """A theorem hypothesis fails and the computation cannot proceed (or --strict is on)."""

    exit_code = 4

    def __init__(self, label: str, message: str):
        super().__init__(f"[{label}] {message}")
        self.label = label
