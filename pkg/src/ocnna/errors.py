"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so the split between format and numeric
failures matters.
"""


class OcnnaError(Exception):
    pass


class DimensionError(OcnnaError, ValueError):
    """Shapes of two operands (or two adjacent layers) do not line up."""


class FormatError(OcnnaError):
    """A model or dataset file could not be decoded."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class ManifestError(FormatError):
    """The JSON manifest is malformed or describes an invalid graph."""


class NumericError(OcnnaError, ArithmeticError):
    pass


class NonFiniteError(NumericError):
    pass


class DivergenceError(NumericError):
    pass
