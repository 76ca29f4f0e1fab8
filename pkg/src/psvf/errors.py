"""Exception hierarchy shared by every module of the package."""


class PSVFError(Exception):
    """Base class for all package errors."""


class NotOnSwitchingManifold(PSVFError):
    pass


class NotATangency(PSVFError):
    pass


class DegenerateTangency(PSVFError):
    pass


class UndefinedSliding(PSVFError):
    pass


class EventLocationFailure(PSVFError):
    pass


class BranchBudgetExceeded(PSVFError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InadmissibleWord(PSVFError):
    def __init__(self, index, pair):
        self.index = index
        self.pair = tuple(pair)
        super().__init__(f"transition {self.pair[0]}->{self.pair[1]} at index {index} is not admissible")


class OffInvariantSet(PSVFError):
    pass


class SectionNotReached(PSVFError):
    pass


class AlphabetMismatch(PSVFError):
    pass


class EmptyCurve(PSVFError):
    pass


class FamilyMismatch(PSVFError):
    pass


class DegenerateCurve(PSVFError):
    pass


class SkeletonMismatch(PSVFError):
    pass


class ExpressionError(PSVFError, ValueError):
    pass
