"""Exception types shared across the package."""


class PermlabError(Exception):
    """Base class for all permlab errors."""


class InvalidKernel(PermlabError):
    """Kernel fails a structural precondition (PD symmetric part, M-matrix sign pattern, ...)."""


class DomainError(PermlabError):
    """Argument outside the mathematical domain of the operation."""


class NumericalError(PermlabError):
    """A dense linear-algebra routine failed to converge or returned garbage."""


class IrreducibleViolation(PermlabError):
    """Transition matrix is not irreducible (support graph not strongly connected)."""


class SingularKilling(PermlabError):
    """Killing rates sum to zero, so the killed generator is singular."""


class InvalidRate(PermlabError):
    """A rate parameter that must be positive is not."""


class InvalidKilledChain(PermlabError):
    """Killed jump chain is not strictly sub-stochastic (spectral radius >= 1)."""


class BandTooNarrow(PermlabError):
    """Rejection-band acceptance rate fell below the configured floor."""


class InvalidFamily(PermlabError):
    """A kernel on an interpolation path failed certification."""


class InvalidPair(PermlabError):
    """Kernel pair violates the entrywise sign pattern required for comparison."""


class HorizonTooShort(PermlabError):
    """Truncated time integral left a tail above tolerance."""


class CostGuardExceeded(PermlabError):
    """Requested grid exceeds the configured evaluation-cost cap."""


class ParseError(PermlabError):
    """Malformed input file; message carries row/column context where known."""
