'''
Exception hierarchy shared by all models. Every computational failure is a LoopFloerError, so that the
experiment commands can map it to exit status 1; configuration problems are ConfigError (exit status 2).
'''


class LoopFloerError(Exception):
    pass


class ConfigError(LoopFloerError):
    pass


class NoConvergence(LoopFloerError):
    pass


class DegenerateCritical(LoopFloerError):
    '''
    Raised when the smallest absolute Hessian eigenvalue falls below the degeneracy threshold,
    i.e. the functional is not Morse at the current resolution.
    '''
    def __init__(self, message, gap=None):
        super(DegenerateCritical, self).__init__(message)
        self.gap = gap


class NonFinite(LoopFloerError):
    pass


class NoTargetMatch(LoopFloerError):
    pass


class MaxFlowTime(LoopFloerError):
    pass


class BoundaryNotSquareZero(LoopFloerError):
    pass


class AnchorInfeasible(LoopFloerError):
    pass


class TangencySlope(LoopFloerError):
    def __init__(self, message, radius=None, length=None):
        super(TangencySlope, self).__init__(message)
        self.radius = radius
        self.length = length


class GapViolated(LoopFloerError):
    pass
