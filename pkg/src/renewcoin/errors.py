"""Exception hierarchy.

Every library error derives from :class:`RenewcoinError`.  Domain errors
(bad parameters, mathematically impossible requests) derive from
:class:`DomainError`; the CLI maps them to exit code 2.
"""


class RenewcoinError(Exception):
    """Base class for all package errors."""


class DomainError(RenewcoinError, ValueError):
    """Input is well formed but violates a mathematical precondition."""


class ConfigError(RenewcoinError, ValueError):
    """Experiment or CLI configuration is incomplete or inconsistent."""


class IoError(RenewcoinError, OSError):
    """Reading or writing an artifact failed."""


# renewal-core
class InvalidPmf(DomainError):
    pass


class NotARenewalSequence(DomainError):
    def __init__(self, index, value):
        super().__init__(f"f_{index} = {value:.3e} is negative; not a renewal sequence")
        self.index = index
        self.value = value


class KaluzaViolation(DomainError):
    def __init__(self, index, lhs, rhs):
        super().__init__(
            f"Kaluza condition fails at k={index}: u(k-1)u(k+1) = {lhs:.6g} < u(k)^2 = {rhs:.6g}"
        )
        self.index = index


class UnknownLaw(DomainError):
    pass


class HorizonTooShort(DomainError):
    pass


# process-sim
class InvalidBias(DomainError):
    pass


class NotMutuallyAC(DomainError):
    pass


class WindowMismatch(DomainError):
    pass


class NoTrials(DomainError):
    pass


# rate-functions
class OutOfRange(DomainError):
    def __init__(self, value, low, high):
        super().__init__(f"{value!r} outside achievable interval [{low:.6g}, {high:.6g}]")
        self.value = value
        self.interval = (low, high)


class DegenerateZeta(DomainError):
    pass


# estimators
class ScheduleExhausted(DomainError):
    def __init__(self, message, blocks=()):
        super().__init__(message)
        self.blocks = tuple(blocks)


class WindowTooShort(DomainError):
    pass


class BelowThreshold(DomainError):
    pass
