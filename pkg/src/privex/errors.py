"""Exception hierarchy.

Input problems derive from :class:`InputError` (CLI exit code 2), infeasible or
out-of-range requests from :class:`RangeError` (exit code 3) and numerical
certification failures from :class:`NumericalError` (exit code 3).
"""


class PrivexError(Exception):
    """Base class for all package errors."""


class InputError(PrivexError, ValueError):
    """Malformed or inconsistent input data."""


class NegativeEntry(InputError):
    pass


class ZeroTotalMass(InputError):
    pass


class NotNormalized(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class AlphabetMismatch(InputError):
    pass


class UnknownSymbol(InputError):
    pass


class NotBinaryInput(InputError):
    pass


class ConstantFunction(InputError):
    pass


class RangeError(PrivexError, ValueError):
    """A parameter lies outside the range where the quantity is defined."""


class OutOfRange(RangeError):
    pass


class EpsilonOutOfRange(RangeError):
    pass


class DeltaOutOfRange(RangeError):
    pass


class IndependentSources(RangeError):
    pass


class WeaklyIndependent(RangeError):
    pass


class RateUnachievable(RangeError):
    pass


class EpsilonAtOrAboveMI(RangeError):
    pass


class EpsilonAtOrAboveRho2(RangeError):
    pass


class NoFeasibleGamma(RangeError):
    pass


class NumericalError(PrivexError, ArithmeticError):
    """A numerical certificate (truncation, quadrature) could not be established."""


class TruncationInsufficient(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass
