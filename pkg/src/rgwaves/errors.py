"""Exception hierarchy shared by all modules."""


class RGError(Exception):
    """Base class for every error raised by rgwaves."""


class NonPositiveHeight(RGError, ValueError):
    pass


class NegativeEnstrophy(RGError, ValueError):
    pass


class ImaginarySoundSpeed(RGError, ValueError):
    pass


class ZeroEntropy(RGError, ValueError):
    pass


class NonEquilibriumEndstate(RGError, ValueError):
    pass


class NoPositiveRoot(RGError, ArithmeticError):
    pass


class IntegrationFailure(RGError, RuntimeError):
    pass


class NonZeroMean(RGError, ValueError):
    pass


class GridTooCoarse(RGError, ValueError):
    pass


class NotAsymptoticallyConstant(RGError, ValueError):
    pass


class SplittingFailure(RGError, ValueError):
    pass


class OverflowGuard(RGError, OverflowError):
    pass


class BranchCut(RGError, ValueError):
    pass


class ContourThroughZero(RGError, ValueError):
    pass


class ReductionViolation(RGError, AssertionError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class LambdaZero(RGError, ZeroDivisionError):
    pass


class CFLViolation(RGError, ValueError):
    pass


class StiffSource(RGError, RuntimeError):
    pass


class BlowUp(RGError, FloatingPointError):
    pass


class NoTransitionFound(RGError, ValueError):
    pass


class ConfigError(RGError, ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, message, field=None, line=None):
        loc = []
        if field:
            loc.append(f"field '{field}'")
        if line is not None:
            loc.append(f"line {line}")
        full = f"{message} ({', '.join(loc)})" if loc else message
        super().__init__(full)
        self.field = field
        self.line = line
