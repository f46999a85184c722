"""Exception types shared across the package."""


class HorolabError(Exception):
    """Base class for all package errors."""


class InvalidArgument(HorolabError, ValueError):
    pass


class SingularConfiguration(HorolabError, ArithmeticError):
    """A chart map left its domain (vanishing denominator)."""


class DecompositionFailed(HorolabError, ArithmeticError):
    """Matrix is outside the open cell where a factorization exists."""


class InvalidConfig(HorolabError, ValueError):
    pass


class ConstructionFailed(HorolabError, RuntimeError):
    pass


class InvalidState(HorolabError, RuntimeError):
    pass


class PreconditionViolation(HorolabError, ValueError):
    pass


class InvalidExponent(HorolabError, ValueError):
    pass


class EmptyMeasure(HorolabError, RuntimeError):
    pass


class InvalidBox(HorolabError, ValueError):
    pass
