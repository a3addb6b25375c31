"""Exception types shared across the package."""


class FperturbError(Exception):
    """Base class for all package-specific errors."""


class SingularLeadingMinor(FperturbError):
    """A pivot of the pivot-free LU elimination is numerically zero."""

    def __init__(self, k: int):
        self.k = k
        super().__init__(f"leading principal minor {k} is numerically singular")


class RankDeficient(FperturbError):
    """The matrix does not have full column rank."""


class SingularDiagonal(FperturbError):
    """A triangular matrix has a zero diagonal entry."""

    def __init__(self, k: int):
        self.k = k
        super().__init__(f"triangular matrix has zero diagonal entry {k}")


class NoConvergence(FperturbError):
    """Power iteration failed to converge within the iteration cap."""

    def __init__(self, iterations: int):
        self.iterations = iterations
        super().__init__(f"power iteration did not converge in {iterations} iterations")


class DimensionMismatch(FperturbError):
    """Operands have incompatible shapes."""


class TooLarge(FperturbError):
    """Dense materialization was requested above the explicit threshold."""


class AbsOperatorTooLarge(FperturbError):
    """An entrywise-absolute-value operator needs a materialization that is too large."""


class ZeroVector(FperturbError):
    """A column or row selected for scaling has zero norm."""

    def __init__(self, k: int):
        self.k = k
        super().__init__(f"selected column/row {k} has zero norm")


class BoundNotApplicable(FperturbError):
    """A rigorous bound was requested but its applicability condition fails."""
