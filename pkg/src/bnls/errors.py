"""Exception hierarchy shared by all modules."""


class BNLSError(Exception):
    """Base class for every error raised by the package."""


class InvalidDimension(BNLSError, ValueError):
    pass


class InvalidResolution(BNLSError, ValueError):
    pass


class GridMismatch(BNLSError, ValueError):
    pass


class NonPositiveLambda(BNLSError, ValueError):
    pass


class InvalidParameters(BNLSError, ValueError):
    pass


class ZeroState(BNLSError, ValueError):
    pass


class NonAdmissibleDirection(BNLSError, ValueError):
    """``F(v) + beta G(v) <= 0``: the fibering ray never meets the Nehari set."""


class ZeroDirection(BNLSError, ValueError):
    pass


class DegenerateQuartic(BNLSError, ValueError):
    pass


class NonPositiveQuadratic(BNLSError, ValueError):
    pass


class NonConvergence(BNLSError, RuntimeError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class CollapseToZero(BNLSError, RuntimeError):
    pass


class DomainTooSmall(BNLSError, ValueError):
    pass


class WindowTooNarrow(BNLSError, ValueError):
    pass


class BelowNoiseFloor(BNLSError, ValueError):
    pass


class SolverBreakdown(BNLSError, RuntimeError):
    pass


class InvalidCap(BNLSError, ValueError):
    pass


class WeightDegenerate(BNLSError, ValueError):
    pass


class DegenerateThreshold(BNLSError, ValueError):
    pass


class FellToSemitrivial(BNLSError, RuntimeError):
    """The Nehari minimiser lost a component; ``result`` carries the energies."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class PathCollapse(BNLSError, RuntimeError):
    pass


class ConfigInvalid(BNLSError, ValueError):
    pass


class TaskFailed(BNLSError, RuntimeError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report
