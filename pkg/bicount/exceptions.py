class BicountException(Exception):
    """Base class for all errors raised by bicount.

    ``exit_code`` is the process exit status used by the command line interface.
    """

    exit_code = 1


class BicountWarning(UserWarning):
    pass


# Configuration errors
class ConfigError(BicountException):
    exit_code = 2


# Numerical failures
class NumericalFailure(BicountException):
    exit_code = 3


class SelfIntersectingBoundary(NumericalFailure):
    pass


class NonSmooth(NumericalFailure):
    pass


class UnderResolved(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class SpuriousMinimum(NumericalFailure):
    pass


class IncompleteSequence(NumericalFailure):
    pass


class WindowOutOfRange(NumericalFailure):
    pass


class DegenerateField(NumericalFailure):
    pass


class TooFewModes(NumericalFailure):
    pass


class RayEscapes(NumericalFailure):
    pass


class TangentLaunch(NumericalFailure):
    pass


class DegenerateBounce(NumericalFailure):
    pass


class AmbiguousConjugatePoint(NumericalFailure):
    pass


class MarginalOrbitInSum(NumericalFailure):
    pass


class AliasingRisk(NumericalFailure):
    pass


# Validation failures
class ValidationFailure(BicountException):
    exit_code = 4


class MissedLevelSuspected(ValidationFailure):
    pass


# Warnings
class SuspectTangency(BicountWarning):
    pass


class StageError(BicountException):
    """A pipeline stage failed; wraps the original error"""

    def __init__(self, stage, error):
        self.stage = stage
        self.error = error
        self.exit_code = exit_code_for(error)
        super().__init__(f"stage {stage!r} failed: {type(error).__name__}: {error}")


def exit_code_for(exc):
    """Exit status for an exception raised while running a command"""
    if isinstance(exc, BicountException):
        return exc.exit_code
    if isinstance(exc, (ValueError, TypeError)):
        return ConfigError.exit_code
    return 1
