"""Exception hierarchy shared across the package."""


class EtcpnError(Exception):
    """Base class for all package errors."""


class DimensionError(EtcpnError):
    """Matrix or vector dimensions are inconsistent."""


class StructuralCouplingError(EtcpnError):
    """Nonzero cross-coupling block between discrete and continuous subnets."""


class ModeAmbiguityError(EtcpnError):
    """Discrete marking does not single out exactly one active mode."""


class EnablingViolationError(EtcpnError):
    """A firing vector fires a transition that is not enabled."""


class MarkingUnderflowError(EtcpnError):
    """A firing would drive a discrete place marking negative."""


class GuardConflictError(EtcpnError):
    """More than one discrete transition is enabled at the same step."""


class ModelFormatError(EtcpnError):
    """Model text failed to parse or validate.

    Carries the full list of positioned diagnostics; ``str()`` shows them all.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class NumericDivergenceError(EtcpnError):
    """State became NaN or infinite during simulation."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"numeric divergence at step {step}")


class GainRecoveryError(EtcpnError):
    """Observer gain could not be recovered from the LMI solution."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class TrainingError(EtcpnError):
    """Detector training failed (QP non-convergence or degenerate data)."""
