"""Exception types shared across modules."""


class DimensionMismatch(ValueError):
    pass


class InvalidN(ValueError):
    pass


class NotPositiveDefinite(ArithmeticError):
    pass


class InsufficientQuadrature(ValueError):
    pass


class CGNonConvergence(ArithmeticError):
    pass


class LengthMismatch(ValueError):
    pass
