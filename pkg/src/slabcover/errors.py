"""Shared exception types.

Exit-code mapping in the CLI: ConfigError -> 2, BudgetError -> 3,
everything else is a bug.
"""


class SlabcoverError(Exception):
    """Base class for all package errors."""


class ArgumentError(SlabcoverError, ValueError):
    """Invalid argument to an operation (e.g. q = 0, negative radius)."""


class DomainError(SlabcoverError, ValueError):
    """Point outside the surface domain."""


class ConstructionError(SlabcoverError, ValueError):
    """Invalid parameters for a domain object or builtin surface."""


class GradientDegeneracyError(SlabcoverError):
    """Sublevel covering precondition failed: gradient too small for the
    requested ball radius. Caller should shrink alpha or reclassify."""


class UnsupportedRegimeError(SlabcoverError):
    """Cover requested for an Exceptional regime slab."""


class NoKernelError(SlabcoverError):
    """Hessian has numerical nullity 0: no kernel direction exists."""


class UndefinedSlopeError(SlabcoverError):
    """Box-count slope undefined (all cells empty)."""


class BudgetError(SlabcoverError):
    """Work budget exhausted. Carries whatever partial result was built."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigError(SlabcoverError, ValueError):
    """Config document failed validation. ``diagnostics`` is a list of
    (key_path, message) pairs."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else ("?", "invalid")
        super().__init__(f"{first[0]}: {first[1]}")
