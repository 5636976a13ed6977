"""Exception types shared across the toolkit."""

from __future__ import annotations


class ValidationError(ValueError):
    """A value object field failed validation.

    The message always names the offending field so batch pipelines can
    report which input record is broken.
    """


class TraceFormatError(ValueError):
    """A trace file could not be parsed.

    The message carries the 1-based line number of the offending line.
    """


class NoDipFoundError(RuntimeError):
    """No resonance dip stands out of the noise floor."""


class SingularBackgroundError(RuntimeError):
    """Background magnitude is (numerically) zero somewhere on the grid."""


class DegenerateFitError(RuntimeError):
    """The normal equations are singular; the model is over-parameterized
    for the data in hand."""


class FitDataError(ValueError):
    """A fit dataset violates its preconditions (too few points, no span)."""
