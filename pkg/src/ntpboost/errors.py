"""Exception hierarchy shared across the package."""


class NtpboostError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(NtpboostError):
    """A domain object violates one of its structural invariants."""


class SupportError(NtpboostError):
    """A probability ratio or logarithm is undefined on the given support."""


class ZeroMarginalError(NtpboostError):
    """A conditional was requested at a prefix with zero marginal probability."""


class SizingError(NtpboostError):
    """An enumeration would exceed the configured exact-computation cap."""


class PreconditionError(NtpboostError):
    """An operation was called with arguments outside its stated domain."""


class ReciprocalZeroError(NtpboostError):
    """A reciprocal transition hit a zero denominator during execution."""

    def __init__(self, node: str, time_step: int):
        self.node = node
        self.time_step = time_step
        super().__init__(f"reciprocal by zero at node {node!r}, time step {time_step}")


class FormatError(NtpboostError):
    """A file failed schema or invariant validation at load time.

    ``location`` is a JSON-pointer-like path into the offending document.
    """

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{message}" + (f" (at {location})" if location else ""))
