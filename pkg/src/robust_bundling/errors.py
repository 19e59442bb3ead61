class RobustBundlingError(Exception):
    pass


class NonConvergence(RobustBundlingError):
    pass


class DegenerateDispersion(RobustBundlingError):
    pass


class EpsilonTooLarge(RobustBundlingError):
    pass


class NewtonDivergence(RobustBundlingError):
    pass


class HypothesisViolated(RobustBundlingError):
    pass


class InvalidProblem(RobustBundlingError, ValueError):
    pass
