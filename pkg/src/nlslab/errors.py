"""Exception hierarchy shared across the laboratory.

Every failure mode raised by library code derives from :class:`NlslabError`
so the command-line layer can map groups of errors onto exit codes without
inspecting messages.
"""

from __future__ import annotations


class NlslabError(Exception):
    """Base class for all library errors."""


class ConfigError(NlslabError):
    """Malformed configuration input (unknown key, bad value, bad file)."""


class NumericalError(NlslabError):
    """A solver or quadrature failed to produce a trustworthy result."""


class BracketNotFoundError(NumericalError):
    """A bisection bracket does not straddle the sought sign change."""


class NonConvergenceError(NumericalError):
    """An iteration reached its budget without meeting its tolerance."""


class SingularSystemError(NumericalError):
    """A linear system was singular or conditioned beyond use."""


class WindowError(NumericalError):
    """A fit window holds too few samples or sits outside the grid."""


class DomainError(NumericalError):
    """Arguments leave the validated domain of a routine (separation,
    box size, resolution, or closeness preconditions)."""


class BlowupDetectedError(NumericalError):
    """The evolving field amplitude grew past the runaway guard."""


class DecompositionError(NumericalError):
    """The bubble decomposition failed (bad window or Newton stall)."""


class AcceptanceError(NlslabError):
    """An acceptance criterion evaluated red."""
