"""Error taxonomy shared by every module.

The CLI maps these onto exit codes: configuration problems exit 2,
domain or numeric inconsistencies exit 3, failed verification verdicts
exit 1 (no exception involved).
"""


class ConfigurationError(ValueError):
    """Malformed or inconsistent input: unknown keys, bad coefficients,
    truncation budget below the K rule, arithmetic-mode mismatch."""


class DomainError(ValueError):
    """Mathematically valid input asked outside an operation's domain:
    evaluation beyond the convergence radius, predictors without a
    turning point, square roots of non-unit series."""


class HalfIntegerPowerError(DomainError):
    """The order-Q^0 solvability constraint of the recursion failed.

    Happens exactly when n > 1 meets a potential or correction with odd
    powers of Q; the expansion would need half-integer powers of hbar,
    which this artifact refuses to guess at.
    """


class NumericError(RuntimeError):
    """A numeric stage could not certify its own accuracy: quadrature
    levels disagree, grid refinements disagree, extraction windows
    disagree."""
