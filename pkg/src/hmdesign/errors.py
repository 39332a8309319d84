"""Exception hierarchy shared across the package."""


class HMDesignError(Exception):
    """Base class for all package errors."""


class SizeMismatch(HMDesignError, ValueError):
    pass


class NonFinite(HMDesignError, ValueError):
    pass


class ZeroPower(HMDesignError, ValueError):
    pass


class NonPositiveScale(HMDesignError, ValueError):
    pass


class UnsupportedOrder(HMDesignError, ValueError):
    pass


class IndexOutOfRange(HMDesignError, IndexError):
    pass


class NoLpBits(HMDesignError, ValueError):
    pass


class LinearSolveFailure(HMDesignError, ArithmeticError):
    pass


class NoFeasibleStart(HMDesignError):
    def __init__(self, message, best_r_h=None):
        super().__init__(message)
        self.best_r_h = best_r_h


class Infeasible(HMDesignError):
    def __init__(self, message, best_r_h=None):
        super().__init__(message)
        self.best_r_h = best_r_h


class NonPositiveDistance(HMDesignError, ValueError):
    pass


class NotBracketed(HMDesignError, ValueError):
    pass


class EmptyInput(HMDesignError, ValueError):
    pass
