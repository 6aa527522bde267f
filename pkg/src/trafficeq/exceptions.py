"""Exception types shared across the package."""


class TrafficEqError(Exception):
    """Base class for all package-specific errors."""


class FormatError(TrafficEqError, ValueError):
    """Malformed network or demand file; the message carries the line number."""


class UnreachableError(TrafficEqError, RuntimeError):
    """A demanded destination cannot be reached from its origin."""


class OracleGuardError(TrafficEqError, RuntimeError):
    """Instance too large for a brute-force oracle."""


class InfeasibleError(TrafficEqError, RuntimeError):
    """Demand exceeds what the capacitated network can carry."""


class ConvergenceError(TrafficEqError, RuntimeError):
    """An iterative routine exhausted its budget without meeting its certificate."""


class DivergenceError(TrafficEqError, RuntimeError):
    """An iterate became non-finite."""
