"""Exception types shared across modules; the CLI maps them to exit codes."""


class TriobsError(Exception):
    """Base class for toolkit errors outside the expression language."""


class ConfigError(TriobsError, ValueError):
    """Invalid configuration value or missing input file."""


class DomainViolation(TriobsError):
    """A trajectory left the declared box or blew up during integration."""

    def __init__(self, message: str, t: float | None = None, x=None):
        super().__init__(message)
        self.t = t
        self.x = x


class TrajectoryLeftBox(DomainViolation):
    pass


class IntegrationBlowup(DomainViolation):
    pass


class ConstructionRefused(TriobsError):
    """Building a factorising function failed; carries a witness pair."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class InverseError(TriobsError):
    """Left inversion of H failed."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class NoConvergence(InverseError):
    pass


class AmbiguousInverse(InverseError):
    pass
