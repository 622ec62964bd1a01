"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` used by the command line front end:
2 for configuration problems, 3 for numerical failures.
"""


class ConfluenceError(Exception):
    exit_code = 3

    def __init__(self, message="", **context):
        super().__init__(message)
        self.context = context

    def to_json(self):
        out = {"error": type(self).__name__, "message": str(self)}
        if self.context:
            from .record import to_plain

            out["context"] = to_plain(self.context)
        return out


class ConfigInvalid(ConfluenceError):
    exit_code = 2


# series core
class NonInvertible(ConfluenceError):
    pass


class ConstantTermNonzero(ConfluenceError):
    pass


class NotParabolic(ConfluenceError):
    pass


class TruncationTooShort(ConfluenceError):
    pass


class MultiplierMismatch(ConfluenceError):
    pass


class NotRootOfUnity(ConfluenceError):
    pass


# polynomial fields
class MultipleRoot(ConfluenceError):
    pass


class IntegrationBudgetExceeded(ConfluenceError):
    pass


class NotStructurallyStable(ConfluenceError):
    pass


class Discriminant(ConfluenceError):
    pass


# orbit space
class EscapedPetal(ConfluenceError):
    pass


class SlowConvergence(ConfluenceError):
    pass


class OnDiscriminant(ConfluenceError):
    pass


class NotSiegel(ConfluenceError):
    pass


class NoSolutionInRange(ConfluenceError):
    pass


class NotHyperbolic(ConfluenceError):
    pass


class NoOverlap(ConfluenceError):
    pass


# planar foliations
class ResonantObstruction(ConfluenceError):
    pass


class NoMinimalTerm(ConfluenceError):
    pass


class PoleOnPath(ConfluenceError):
    pass


class LeafEscape(ConfluenceError):
    pass


class DegenerateDenominator(ConfluenceError):
    pass


class FitIllConditioned(ConfluenceError):
    pass


class StiffIntegrationFailure(ConfluenceError):
    pass


# linear systems
class LoopTooClose(ConfluenceError):
    pass


class ToleranceNotMet(ConfluenceError):
    pass


class ResonantMonodromy(ConfluenceError):
    pass


class OrderingTie(ConfluenceError):
    pass


class StructureViolation(ConfluenceError):
    pass


class ZeroPatternMismatch(ConfluenceError):
    pass
