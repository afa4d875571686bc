"""Exception hierarchy shared by all modules."""


class MagPiezoError(Exception):
    """Base class for every error raised by the package."""


class NonPositiveParameter(MagPiezoError, ValueError):
    pass


class IndefiniteCoupling(MagPiezoError, ValueError):
    pass


class NegativeGain(MagPiezoError, ValueError):
    pass


class EquivalenceViolated(MagPiezoError, ValueError):
    """eps1*C1 >= 1 or eps2*C2 >= 1, so the lower equivalence constant is not positive."""


class Infeasible(MagPiezoError):
    """No Lyapunov certificate was found within the search budget."""


class GridTooCoarse(MagPiezoError, ValueError):
    pass


class SolveFailure(MagPiezoError):
    pass


class EigenFailure(MagPiezoError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class TraceTooShort(MagPiezoError, ValueError):
    pass


class NonPositiveEnergy(MagPiezoError, ValueError):
    pass


class ParseError(MagPiezoError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RangeError(MagPiezoError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
