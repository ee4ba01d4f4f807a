"""Direct penalized regression in a cardinal piecewise-cubic basis.

The fit is parameterized by its values and first derivatives at the knots
(2n degrees of freedom): basis function ``i < n`` is 1 at knot ``i`` with
zero slope there and vanishes with zero slope at every other knot; basis
function ``n + i`` has unit slope at knot ``i`` and is zero elsewhere.
Between knots the functions are the classical cubic Hermite blends;
outside the first and last knot they continue linearly, so the curvature
penalty sees only the interior and fitted curves have linear tails, which
is exactly the shape of the penalized minimizer.

Cardinality makes the value and derivative design matrices identity
blocks, so hat matrices are plain sub-blocks of one inverse and the
closed-form cross-validation identities of :mod:`vspline.gcv` come cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import SingularSystemError
from .fit import check_knots

__all__ = [
    "DesignMatrices",
    "HatMatrices",
    "HermiteBasis",
    "build_design",
    "fit_theta",
    "hat_matrices",
    "penalty_gram",
]


@dataclass(frozen=True, eq=False)
class HermiteBasis:
    """Cardinal value/slope basis on a strictly increasing knot vector."""

    knots: np.ndarray

    def __post_init__(self):
        knots = check_knots(self.knots)
        if knots.size < 2:
            raise ValueError("need at least 2 knots")
        knots = knots.copy()
        knots.flags.writeable = False
        object.__setattr__(self, "knots", knots)

    @property
    def n(self) -> int:
        return self.knots.size

    def _pieces(self, t):
        """Interval index, local coordinate, and length for each t."""
        k = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self.n - 2)
        h = self.knots[k + 1] - self.knots[k]
        x = (t - self.knots[k]) / h
        return k, x, h

    def evaluate(self, theta, t):
        """Value of the combination ``theta`` at ``t`` in [0, 1]."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2 * self.n,):
            raise ValueError(f"theta must have shape ({2 * self.n},)")
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(tt < 0.0) or np.any(tt > 1.0) or not np.all(np.isfinite(tt)):
            raise ValueError("evaluation points must lie in [0, 1]")
        vals, slopes = theta[:self.n], theta[self.n:]
        k, x, h = self._pieces(tt)
        cubic = (vals[k] * (2 * x**3 - 3 * x**2 + 1)
                 + slopes[k] * h * (x**3 - 2 * x**2 + x)
                 + vals[k + 1] * (-2 * x**3 + 3 * x**2)
                 + slopes[k + 1] * h * (x**3 - x**2))
        left = vals[0] + slopes[0] * (tt - self.knots[0])
        right = vals[-1] + slopes[-1] * (tt - self.knots[-1])
        out = np.where(tt < self.knots[0], left,
                       np.where(tt > self.knots[-1], right, cubic))
        return float(out[0]) if np.ndim(t) == 0 else out

    def evaluate_deriv(self, theta, t):
        """First derivative of the combination ``theta`` at ``t``."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2 * self.n,):
            raise ValueError(f"theta must have shape ({2 * self.n},)")
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(tt < 0.0) or np.any(tt > 1.0) or not np.all(np.isfinite(tt)):
            raise ValueError("evaluation points must lie in [0, 1]")
        vals, slopes = theta[:self.n], theta[self.n:]
        k, x, h = self._pieces(tt)
        cubic = (vals[k] * (6 * x**2 - 6 * x) / h
                 + slopes[k] * (3 * x**2 - 4 * x + 1)
                 + vals[k + 1] * (6 * x - 6 * x**2) / h
                 + slopes[k + 1] * (3 * x**2 - 2 * x))
        out = np.where(tt < self.knots[0], slopes[0],
                       np.where(tt > self.knots[-1], slopes[-1], cubic))
        return float(out[0]) if np.ndim(t) == 0 else out


def _lam_pieces(breaks, values, a, b):
    """Pieces of a piecewise-constant function overlapping [a, b]."""
    for lo, hi, val in zip(breaks[:-1], breaks[1:], values):
        p, q = max(lo, a), min(hi, b)
        if q > p:
            yield p, q, val


def penalty_gram(basis: HermiteBasis, lam_breakpoints, lam_values) -> np.ndarray:
    """Exact penalty Gram matrix: integral of lam(t) Ni''(t) Nj''(t).

    ``lam(t)`` is piecewise constant on ``lam_breakpoints`` (which must
    cover [0, 1]) with values ``lam_values``.  Second derivatives of the
    basis are linear per interval, so a two-point Gauss rule per
    constant-lam piece integrates the products exactly.  Intervals outside
    the knot range contribute nothing because the basis is linear there.
    """
    breaks = np.asarray(lam_breakpoints, dtype=float)
    values = np.asarray(lam_values, dtype=float)
    if breaks.ndim != 1 or values.ndim != 1 or breaks.size != values.size + 1:
        raise ValueError("need k + 1 breakpoints for k penalty values")
    if breaks[0] > 0.0 or breaks[-1] < 1.0 or np.any(np.diff(breaks) <= 0.0):
        raise ValueError("penalty breakpoints must be increasing and cover [0, 1]")
    if np.any(values < 0.0) or not np.all(np.isfinite(values)):
        raise ValueError("penalty values must be finite and nonnegative")
    n = basis.n
    knots = basis.knots
    omega = np.zeros((2 * n, 2 * n))
    gauss_off = 0.5 / np.sqrt(3.0)
    for k in range(n - 1):
        a, b = knots[k], knots[k + 1]
        h = b - a
        dofs = np.array([k, n + k, k + 1, n + k + 1])
        local = np.zeros((4, 4))
        for p, q, lam in _lam_pieces(breaks, values, a, b):
            if lam == 0.0:
                continue
            half = 0.5 * (q - p)
            mid = 0.5 * (p + q)
            for tg in (mid - (q - p) * gauss_off, mid + (q - p) * gauss_off):
                x = (tg - a) / h
                d2 = np.array([(12 * x - 6) / h**2,
                               (6 * x - 4) / h,
                               (6 - 12 * x) / h**2,
                               (6 * x - 2) / h])
                local += lam * half * np.outer(d2, d2)
        omega[np.ix_(dofs, dofs)] += local
    return omega


@dataclass(frozen=True, eq=False)
class DesignMatrices:
    """Value/derivative design matrices and the penalty Gram matrix.

    By cardinality ``B = [I | 0]`` and ``C = [0 | I]`` in the
    (values-then-slopes) ordering; they are materialized anyway so the
    normal equations below read like their formulas.
    """

    basis: HermiteBasis
    B: np.ndarray
    C: np.ndarray
    omega: np.ndarray
    lam_breakpoints: np.ndarray
    lam_values: np.ndarray

    @property
    def n(self) -> int:
        return self.basis.n


def build_design(knots, lam, lam_breakpoints=None) -> DesignMatrices:
    """Design and penalty matrices for the basis fit.

    ``lam`` is either a scalar (constant penalty) or ``n + 1`` values on
    the partition ``[0, t1], [t1, t2], ..., [tn, 1]`` induced by the
    knots.  Passing ``lam_breakpoints`` overrides that partition with an
    arbitrary grid covering [0, 1], in which case ``lam`` must hold one
    value per grid interval.
    """
    basis = HermiteBasis(knots)
    n = basis.n
    if lam_breakpoints is None:
        breaks = np.concatenate([[0.0], basis.knots, [1.0]])
        if np.ndim(lam) == 0:
            values = np.full(n + 1, float(lam))
        else:
            values = np.asarray(lam, dtype=float)
            if values.shape != (n + 1,):
                raise ValueError(f"lam must be scalar or have {n + 1} interval values")
    else:
        breaks = np.asarray(lam_breakpoints, dtype=float)
        values = np.asarray(lam, dtype=float)
    omega = penalty_gram(basis, breaks, values)
    B = np.hstack([np.eye(n), np.zeros((n, n))])
    C = np.hstack([np.zeros((n, n)), np.eye(n)])
    return DesignMatrices(basis=basis, B=B, C=C, omega=omega,
                          lam_breakpoints=breaks, lam_values=values)


def _solve_penalized(B, C, omega, y, v, gamma, n_pen, W=None, Ucorr=None):
    """Solve (B'WB + gamma C'UC + n_pen * omega) theta = B'Wy + gamma C'Uv."""
    BW = B.T if W is None else B.T @ W
    CU = C.T if Ucorr is None else C.T @ Ucorr
    A = BW @ B + gamma * (CU @ C) + n_pen * omega
    rhs = BW @ y + gamma * (CU @ v)
    try:
        cho = cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"penalized normal equations not positive definite: {exc}")
    return cho_solve(cho, rhs)


def fit_theta(design: DesignMatrices, y, v, gamma, n_pen=None,
              W=None, Ucorr=None) -> np.ndarray:
    """Penalized least-squares coefficients for the basis fit.

    Minimizes the W-weighted position residual plus gamma times the
    Ucorr-weighted velocity residual (both divided by ``n_pen``) plus the
    curvature penalty ``theta' omega theta``.  ``n_pen`` defaults to the
    sample count; passing a different value keeps an objective normalized
    by another count, which the leave-one-out machinery relies on.
    ``W``/``Ucorr`` default to identity (uncorrelated errors).
    """
    n = design.n
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if y.shape != (n,) or v.shape != (n,):
        raise ValueError(f"y and v must have shape ({n},)")
    gamma = float(gamma)
    if gamma < 0.0 or not np.isfinite(gamma):
        raise ValueError("gamma must be a finite, nonnegative number")
    n_pen = n if n_pen is None else float(n_pen)
    for name, mat in (("W", W), ("Ucorr", Ucorr)):
        if mat is not None and np.shape(mat) != (n, n):
            raise ValueError(f"{name} must be an ({n}, {n}) matrix")
    return _solve_penalized(design.B, design.C, design.omega, y, v, gamma, n_pen, W, Ucorr)


@dataclass(frozen=True, eq=False)
class HatMatrices:
    """The four n-by-n blocks mapping data to fitted values.

    Fitted positions are ``S y + gamma T v`` and fitted derivatives are
    ``U y + gamma V v``.  (These are hat blocks; do not confuse them with
    the error-correlation matrices, which this package calls ``W`` and
    ``Ucorr`` everywhere.)
    """

    S: np.ndarray
    T: np.ndarray
    U: np.ndarray
    V: np.ndarray


def hat_matrices(design: DesignMatrices, gamma, n_pen=None) -> HatMatrices:
    """Hat blocks for the uncorrelated fit at the design's penalty."""
    n = design.n
    gamma = float(gamma)
    if gamma < 0.0 or not np.isfinite(gamma):
        raise ValueError("gamma must be a finite, nonnegative number")
    n_pen = n if n_pen is None else float(n_pen)
    A = design.B.T @ design.B + gamma * (design.C.T @ design.C) + n_pen * design.omega
    try:
        cho = cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"penalized normal equations not positive definite: {exc}")
    Ainv = cho_solve(cho, np.eye(2 * n))
    # B, C are identity blocks, so B Ainv B' etc. are plain sub-blocks.
    return HatMatrices(S=Ainv[:n, :n], T=Ainv[:n, n:],
                       U=Ainv[n:, :n], V=Ainv[n:, n:])


def hat_matrices_correlated(design: DesignMatrices, gamma, W, Ucorr,
                            n_pen=None) -> HatMatrices:
    """Hat blocks of the correlated-error fit: ``f = S y + gamma T v``.

    Same structure as :func:`hat_matrices` with the precision matrices
    inserted, so the blocks are no longer symmetric.
    """
    n = design.n
    gamma = float(gamma)
    n_pen = n if n_pen is None else float(n_pen)
    A = (design.B.T @ W @ design.B + gamma * (design.C.T @ Ucorr @ design.C)
         + n_pen * design.omega)
    try:
        cho = cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"penalized normal equations not positive definite: {exc}")
    Ainv = cho_solve(cho, np.eye(2 * n))
    return HatMatrices(S=Ainv[:n, :n] @ W, T=Ainv[:n, n:] @ Ucorr,
                       U=Ainv[n:, :n] @ W, V=Ainv[n:, n:] @ Ucorr)
