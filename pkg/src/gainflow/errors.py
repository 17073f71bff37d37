"""Exception and warning types shared across the package."""


class ParseError(ValueError):
    """Malformed trace input; carries the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ValueError):
    """Semantically invalid input; carries the offending job id when known."""

    def __init__(self, message, job=None):
        self.job = job
        if job is not None:
            message = f"job {job}: {message}"
        super().__init__(message)


class CapacityViolation(RuntimeError):
    """A flow value exceeds its edge capacity beyond tolerance."""


class DegenerateStep(RuntimeError):
    """An augmentation step size collapsed below the numerical floor."""


class DummyUsedWarning(RuntimeWarning):
    """Flow was routed over a dummy escape edge; the instance is infeasible
    at the configured capacities."""


class NoAugmentingPath(RuntimeError):
    """No augmenting path exists; the caller's expansion promise is broken."""


class DuplicateVertex(ValueError):
    pass


class BoundViolation(RuntimeError):
    """A guaranteed load/recourse bound was exceeded; carries a report dict."""

    def __init__(self, message, report=None):
        self.report = report or {}
        super().__init__(message)


class Infeasible(RuntimeError):
    pass


class TooLarge(ValueError):
    """Instance exceeds a brute-force enumeration cap."""


class ParameterError(ValueError):
    pass


class SupportError(ValueError):
    """A strategy map puts weight outside its allowed support."""


class LogGapError(ValueError):
    """A schedule log does not cover every event of the trace."""


class CertificateViolation(RuntimeError):
    """A dual certificate constraint fails beyond tolerance."""

    def __init__(self, message, violations=None):
        self.violations = violations or []
        super().__init__(message)


class SeedExhaustion(RuntimeError):
    """Rejection sampling burned through its index budget without accepting."""
