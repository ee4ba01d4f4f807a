"""Exception types shared across the fitting modules."""

import numpy as np


class SingularSystemError(np.linalg.LinAlgError):
    """A coefficient system is numerically singular.

    Signals degenerate data (coincident knots) or an unusable penalty
    setting rather than a bug; callers may catch it and retry with
    different parameters.
    """


class DegenerateScoreError(ArithmeticError):
    """A cross-validation denominator vanished, typically because the fit
    interpolates the data (penalty too small for the sample size)."""


class DegenerateGridError(RuntimeError):
    """Every point of a parameter search grid failed to produce a score."""
