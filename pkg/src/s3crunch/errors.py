"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CrunchError(Exception):
    exit_code = 1


class InvariantViolation(CrunchError):
    exit_code = 1


class ConfigError(CrunchError):
    exit_code = 2


class NonConvergence(CrunchError):
    exit_code = 3


class OutOfDomain(CrunchError, ValueError):
    exit_code = 1


class DegenerateScale(CrunchError):
    exit_code = 1


class SingularMetric(InvariantViolation):
    pass


class PoleRegularityViolation(InvariantViolation):
    pass


class ConstraintInfeasible(CrunchError):
    exit_code = 1


class DegenerateCoefficient(InvariantViolation):
    pass


class InsufficientTail(CrunchError):
    exit_code = 1
