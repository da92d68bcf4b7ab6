"""Exception types shared across the package."""


class GCLabError(Exception):
    """Base class for all errors raised by gclab."""


class ParameterError(GCLabError, ValueError):
    pass


class DomainError(GCLabError, ValueError):
    """Evaluation point outside the domain of a profile, or a state outside its admissible set."""


class DegenerateStateError(GCLabError, ValueError):
    pass


class HyperbolicityError(GCLabError, ValueError):
    """Raised when a state has l >= 0, where strict hyperbolicity is lost."""


class MetricValidationError(GCLabError):
    def __init__(self, message, offending_t=()):
        super().__init__(message)
        self.offending_t = list(offending_t)


class NumericError(GCLabError, ArithmeticError):
    pass


class CFLViolation(GCLabError, ValueError):
    pass


class InvariantRegionViolation(GCLabError):
    """A solver update left the invariant box.

    Carries the offending cell index, the state found there and the time of the update.
    """

    def __init__(self, cell, state, t, box):
        self.cell = int(cell)
        self.state = tuple(float(s) for s in state)
        self.t = float(t)
        self.box = tuple(box)
        super().__init__(
            f"state (l={self.state[0]:.6g}, m={self.state[1]:.6g}) in cell {self.cell} "
            f"left the box l in [{-box[1]:g}, {-box[0]:g}], |m| < 1 at t={self.t:.6g}"
        )


class GridMismatchError(GCLabError, ValueError):
    pass


class SmoothnessError(GCLabError):
    """The reference run failed the smoothness certification."""


class CompatibilityError(GCLabError):
    def __init__(self, message, max_commutator):
        super().__init__(message)
        self.max_commutator = float(max_commutator)


class ConfigError(GCLabError):
    pass
