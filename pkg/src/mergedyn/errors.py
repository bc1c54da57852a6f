"""Exception types raised across the package."""


class MergeDynError(Exception):
    """Base class for all package errors."""


class DuplicateLabel(MergeDynError, ValueError):
    pass


class InvalidCut(MergeDynError, ValueError):
    pass


class InvalidHead(MergeDynError, ValueError):
    pass


class CapExceeded(MergeDynError, ValueError):
    pass


class NotStronglyConnected(MergeDynError, ValueError):
    pass


class Reducible(NotStronglyConnected):
    pass


class Periodic(MergeDynError, ValueError):
    pass


class NoConvergence(MergeDynError, RuntimeError):
    pass


class ZeroRow(MergeDynError, ValueError):
    pass


class UnknownKind(MergeDynError, ValueError):
    pass


class CostCollision(MergeDynError, ValueError):
    pass


class NegativeCycle(MergeDynError, ValueError):
    pass


class Unreachable(MergeDynError, ValueError):
    pass


class MultipleCritical(MergeDynError, ValueError):
    """Raised when the tropical problem has more than one critical class.

    The per-class exponents are attached as ``orders`` so callers can still
    inspect them.
    """

    def __init__(self, message, orders=None):
        super().__init__(message)
        self.orders = orders


class Underflow(MergeDynError, FloatingPointError):
    pass


class DimensionMismatch(MergeDynError, ValueError):
    pass


class Mismatch(MergeDynError, AssertionError):
    def __init__(self, forest, op, detail=""):
        super().__init__(f"contraction mismatch at {forest} for {op}: {detail}")
        self.forest = forest
        self.op = op
