"""Exception hierarchy shared by every module."""


class CWCError(Exception):
    """Base class for simulator errors."""


class InvalidInput(CWCError):
    """Raised for malformed user input (maps to CLI exit code 3)."""


class NonIntegerBandwidth(InvalidInput):
    pass


class FatLinkTooThin(InvalidInput):
    pass


class BrokenRing(InvalidInput):
    pass


class OutOfRange(InvalidInput):
    pass


class InvalidKappa(InvalidInput):
    pass


class PlanInvalid(InvalidInput):
    pass


class OperatorNotCommutative(InvalidInput):
    pass


class GrainTooWide(InvalidInput):
    pass


class ScheduleViolation(CWCError):
    """A schedule broke an engine rule."""


class CausalityViolation(ScheduleViolation):
    pass


class OverlappingCloudWrite(ScheduleViolation):
    pass


class BandwidthExceeded(ScheduleViolation):
    pass


class ReadWriteConflict(ScheduleViolation):
    pass


class FileMissing(CWCError):
    pass


class Infeasible(CWCError):
    """No schedule can complete the requested transfer."""


class Unreachable(Infeasible):
    pass


class ZeroCloudBandwidthEverywhere(Unreachable):
    pass


class ColoringImpossible(CWCError):
    pass
