"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(EngineError):
    """Syntax or grammar error in an input expression."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class SystemShapeError(EngineError):
    """Input system violates the required shape (center linear part, degrees)."""


class F0NonzeroError(EngineError):
    """The unperturbed term F0 of the normal form does not vanish.

    Carries the offending quotient F0 = numerator / denominator, both
    trigonometric series in (r, sin theta, cos theta).
    """

    def __init__(self, numerator, denominator):
        self.numerator = numerator
        self.denominator = denominator
        super().__init__(
            "F0 does not vanish: F0 = (%s) / (%s); remove the constant "
            "perturbation terms at order epsilon^1" % (numerator, denominator)
        )


class DenominatorNotUnitError(EngineError):
    """The denominator of dr/dtheta has an epsilon-constant part besides r."""


class StructuralViolation(EngineError):
    """A structural bound guaranteed by the theory failed: engine bug."""


class NotLinearlySolvable(EngineError):
    """A parameter cannot be eliminated linearly from an averaged function."""


class CyclicSubstitution(EngineError):
    """A substitution map is not triangular (a parameter reappears on a
    right-hand side at or after its own assignment)."""


class IndeterminateSign(EngineError):
    """The sign of a symbolic coefficient cannot be established."""


class BlowUpError(EngineError):
    """Numeric integration left the admissible domain."""


class NoSignChange(EngineError):
    """A bisection bracket does not straddle a zero of the displacement map."""


class IntegrationError(EngineError):
    """The step-halving integrator failed to reach the requested agreement."""


class ConfigError(EngineError):
    """A job configuration file is missing keys or malformed."""
