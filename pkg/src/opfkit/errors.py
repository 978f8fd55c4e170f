"""Exception types shared across the toolkit."""


class OpfKitError(Exception):
    """Base class for all toolkit errors."""


class CaseFormatError(OpfKitError):
    """Malformed case text: missing table, wrong column count, bad token."""


class CaseDataError(OpfKitError):
    """Structurally valid file with inconsistent data (bad ids, bounds)."""


class UnsupportedCostError(CaseDataError):
    """Cost model other than polynomial of degree <= 2."""


class IslandError(CaseDataError):
    """Network not connected from the reference bus."""


class AdmittanceError(OpfKitError):
    """Branch data that cannot be converted to admittances."""


class EvalError(OpfKitError):
    """Non-finite intermediate during constraint or objective evaluation."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class EmptyInteriorError(OpfKitError):
    """A variable has no strictly interior point between its bounds."""


class FactorizationError(OpfKitError):
    """KKT factorization failed for every regularization in range."""


class DcOpfError(OpfKitError):
    """DC OPF did not reach an optimal point (caller may fall back)."""
