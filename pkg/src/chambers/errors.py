"""Exception and warning taxonomy shared by all chambers modules.

Two families matter for exit-code mapping: :class:`InputError` (malformed or
out-of-budget input, CLI exit 2) and :class:`NumericalError` (a computation
that started but could not be completed reliably, CLI exit 3).
"""


class ChambersError(Exception):
    """Base class for all library errors."""


class InputError(ChambersError):
    """Invalid, inconsistent or over-budget input data."""


class ParseError(InputError):
    """Polynomial or file syntax error; carries the offending position."""

    def __init__(self, message, position=None):
        super().__init__(message if position is None else f"{message} (at position {position})")
        self.position = position


class DuplicateHyperplane(InputError):
    """Two hyperplanes of an arrangement coincide as sets."""


class SubsetBudgetExceeded(InputError):
    """A 2^k subset enumeration was requested beyond the guard."""


class BezoutBudgetExceeded(InputError):
    """A total-degree solve would need more start paths than the guard allows."""


class BadPrime(InputError):
    """A finite-field prime collapses part of the intersection data; retry larger."""

    def __init__(self, prime, reason):
        super().__init__(f"prime {prime} is unusable: {reason}")
        self.prime = prime


class NotEssential(InputError):
    """The arrangement's normals do not span the ambient space."""


class NotProductOfLinearForms(InputError):
    """Combinatorial Milnor numbers require a central arrangement of linear forms."""


class NumericalError(ChambersError):
    """Numerical procedure failed to reach its goal; results are unreliable."""


class OnBoundary(NumericalError):
    """A query point lies within tolerance of some hyperplane."""


class SeedFailure(NumericalError):
    """No verified (point, parameter) seed pair could be produced."""


class TargetNotReached(NumericalError):
    """Monodromy stalled below the requested solution count."""

    def __init__(self, message, partial=None, diagnostics=None):
        super().__init__(message)
        self.partial = partial
        self.diagnostics = diagnostics or {}


class PathLoss(NumericalError):
    """A parameter homotopy lost solutions along the way."""

    def __init__(self, message, result=None, failures=None):
        super().__init__(message)
        self.result = result
        self.failures = failures or []


class SignCollision(NumericalError):
    """Two sampled points share a sign vector; verification failed."""


class NoConvergence(NumericalError):
    """Newton refinement did not converge within the iteration budget."""


class SingularJacobian(NumericalError):
    """Jacobian numerically singular at the requested point."""


class ConjugationMismatch(NumericalError):
    """A real-coefficient system produced an odd number of nonreal solutions."""


class SliceDegenerate(NumericalError):
    """Random linear slices kept disagreeing on a Milnor number."""


class UnboundedLP(NumericalError):
    """Linear program unbounded (cannot happen with box constraints)."""


class NumericFailure(NumericalError):
    """Pivot breakdown or similar failure inside the LP solver."""


class ParityWarning(UserWarning):
    """An even-integer halving was requested on an odd integer."""
