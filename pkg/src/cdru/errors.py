"""Exception hierarchy shared by every module."""


class CdruError(Exception):
    """Base class for all package errors."""


class ValidationError(CdruError, ValueError):
    """Input violates a documented precondition."""


class NotErgodic(CdruError):
    """Markov chain lacks a unique recurrent class (or is reducible where irreducibility is needed)."""


class RankDeficient(CdruError):
    """Matrix rank too small for a pseudoinverse recovery."""


class DegenerateDenominator(CdruError):
    """A closed-form denominator is numerically zero."""


class IncompleteDomain(CdruError):
    """Operation needs observations on the full menu lattice."""


class NotRepresentable(CdruError):
    """Data fail an axiom required by a constructive step."""


class InternalBreach(CdruError):
    """A verified invariant failed; indicates a bug, never a model verdict."""
