"""Cross-validation scores and parameter selection.

Leave-one-out prediction error is available three ways: by brute-force
refits (the definition), by a closed-form identity needing only the
full-data fit and the hat-matrix diagonals, and by the trace (GCV)
approximation that replaces each diagonal with its average.  A correlated
variant accepts known precision structures for the two observation
channels.  :func:`optimize_params` grid-searches the penalty and the
velocity weight on log scales and then refines each coordinate with
golden-section sweeps.

All scores are computed through the Hermite-basis formulation of
:mod:`vspline.hermite`, which covers ``gamma = 0`` and interval-wise
penalties.  Leave-one-out removes the whole observation pair (position
and velocity) while keeping the penalty function and the objective
normalization of the full problem, so the closed form and the brute force
agree to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, eigh

from .errors import DegenerateGridError, DegenerateScoreError, SingularSystemError
from .fit import check_knots
from .hermite import (build_design, fit_theta, hat_matrices,
                      hat_matrices_correlated, _solve_penalized)
from .kernels import KernelConfig

__all__ = [
    "CorrelationSpec",
    "CvScore",
    "SelectionResult",
    "cv_brute_force",
    "cv_closed_form",
    "gcv_correlated",
    "gcv_score",
    "optimize_params",
]

_DENOM_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class CvScore:
    """A cross-validation score together with the parameters it scores."""

    value: float
    lam: float
    gamma: float


@dataclass(frozen=True, eq=False)
class CorrelationSpec:
    """Known precision structures of the two error channels.

    ``W`` weights position residuals, ``Ucorr`` velocity residuals; both
    must be symmetric positive definite (checked by factorization).  The
    name ``Ucorr`` keeps the correlation matrix distinct from the hat
    block ``U`` of :class:`vspline.hermite.HatMatrices`.
    """

    W: np.ndarray
    Ucorr: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=float, copy=True)
        U = np.array(self.Ucorr, dtype=float, copy=True)
        for name, mat in (("W", W), ("Ucorr", U)):
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.allclose(mat, mat.T, atol=1e-10):
                raise ValueError(f"{name} must be symmetric")
            try:
                cholesky(mat, lower=True)
            except np.linalg.LinAlgError:
                raise ValueError(f"{name} must be positive definite")
        if W.shape != U.shape:
            raise ValueError("W and Ucorr must have the same size")
        W.flags.writeable = False
        U.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "Ucorr", U)


def _check_inputs(t, y, v, lam, gamma):
    t = check_knots(t)
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if y.shape != t.shape or v.shape != t.shape:
        raise ValueError("t, y, v must have equal shapes")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(v))):
        raise ValueError("y and v must be finite")
    lam = float(lam)
    gamma = float(gamma)
    if not (np.isfinite(lam) and lam > 0.0):
        raise ValueError("lam must be positive and finite")
    if not (np.isfinite(gamma) and gamma >= 0.0):
        raise ValueError("gamma must be nonnegative and finite")
    return t, y, v, lam, gamma


def _design_for(t, lam, cfg: KernelConfig):
    """Basis design whose penalty is lam times the config's weight profile."""
    return build_design(t, lam * cfg.weights, lam_breakpoints=cfg.breakpoints)


def cv_brute_force(t, y, v, lam, gamma, cfg: KernelConfig) -> CvScore:
    """Leave-one-out score by literally refitting without each sample.

    Each refit drops both observations of the left-out time but keeps the
    penalty function and the 1/n normalization of the full objective, so
    it solves the same problem the closed form describes.  Quadratic in n
    on top of the per-fit solve; use :func:`cv_closed_form` for anything
    but verification.
    """
    t, y, v, lam, gamma = _check_inputs(t, y, v, lam, gamma)
    n = t.size
    if n < 3:
        raise ValueError("leave-one-out needs at least 3 samples")
    design = _design_for(t, lam, cfg)
    errors = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        theta = _solve_penalized(design.B[keep], design.C[keep], design.omega,
                                 y[keep], v[keep], gamma, n_pen=n)
        errors[i] = y[i] - theta[i]
    return CvScore(value=float(np.mean(errors**2)), lam=lam, gamma=gamma)


def _cv_from_diagonals(r, rp, s_diag, t_diag, u_diag, v_diag, gamma):
    """Closed-form leave-one-out score from residuals and hat diagonals."""
    dv = 1.0 - gamma * v_diag
    if np.any(np.abs(dv) < _DENOM_FLOOR):
        raise DegenerateScoreError("velocity hat denominator 1 - gamma*V_ii vanished")
    k = gamma * t_diag / dv
    den = 1.0 - s_diag - k * u_diag
    if np.any(np.abs(den) < _DENOM_FLOOR):
        raise DegenerateScoreError(
            "position hat denominator vanished; the fit interpolates (penalty too small)")
    return float(np.mean(((r + k * rp) / den) ** 2))


def cv_closed_form(t, y, v, lam, gamma, cfg: KernelConfig) -> CvScore:
    """Leave-one-out score without refitting.

    Uses the identity expressing each deleted residual through the full
    fit's residuals and the hat diagonals:

        (f(t_i) - y_i + g_i (f'(t_i) - v_i)) / (1 - S_ii - g_i U_ii)

    with ``g_i = gamma T_ii / (1 - gamma V_ii)``; the score is the mean of
    these squared.  Equals :func:`cv_brute_force` to rounding.
    """
    t, y, v, lam, gamma = _check_inputs(t, y, v, lam, gamma)
    design = _design_for(t, lam, cfg)
    n = t.size
    theta = fit_theta(design, y, v, gamma)
    hats = hat_matrices(design, gamma)
    r = theta[:n] - y
    rp = theta[n:] - v
    value = _cv_from_diagonals(r, rp, np.diag(hats.S), np.diag(hats.T),
                               np.diag(hats.U), np.diag(hats.V), gamma)
    return CvScore(value=value, lam=lam, gamma=gamma)


def _gcv_from_traces(r, rp, tr_s, tr_t, tr_u, tr_v, gamma, n):
    """Trace-approximated score; exact when hat diagonals are constant."""
    dv = n - gamma * tr_v
    if abs(dv) < _DENOM_FLOOR:
        raise DegenerateScoreError("velocity trace denominator tr(I - gamma V) vanished")
    k = gamma * tr_t / dv
    den = (n - tr_s - k * tr_u) / n
    if abs(den) < _DENOM_FLOOR:
        raise DegenerateScoreError("trace denominator tr(I - S - k U) vanished")
    return float(np.mean((r + k * rp) ** 2) / den**2)


def gcv_score(t, y, v, lam, gamma, cfg: KernelConfig) -> CvScore:
    """Generalized cross-validation: hat diagonals replaced by traces.

    Needs only four traces instead of the diagonals, which is the usual
    computational argument for GCV; with constant diagonals it reproduces
    :func:`cv_closed_form` exactly.
    """
    t, y, v, lam, gamma = _check_inputs(t, y, v, lam, gamma)
    design = _design_for(t, lam, cfg)
    n = t.size
    theta = fit_theta(design, y, v, gamma)
    hats = hat_matrices(design, gamma)
    r = theta[:n] - y
    rp = theta[n:] - v
    value = _gcv_from_traces(r, rp, np.trace(hats.S), np.trace(hats.T),
                             np.trace(hats.U), np.trace(hats.V), gamma, n)
    return CvScore(value=value, lam=lam, gamma=gamma)


def _psd_sqrt(A):
    """Symmetric PSD square root via eigendecomposition."""
    w, Q = eigh(np.asarray(A, dtype=float))
    w = np.clip(w, 0.0, None)
    return (Q * np.sqrt(w)) @ Q.T


def _correlated_numerator_terms(r, rp, k, W, Ucorr):
    """The three quadratic-form terms of the correlated GCV numerator."""
    cross_mat = _psd_sqrt(W) @ _psd_sqrt(Ucorr)
    return (float(r @ W @ r),
            float(2.0 * k * (r @ cross_mat @ rp)),
            float(k * k * (rp @ Ucorr @ rp)))


def gcv_correlated(t, y, v, lam, gamma, cfg: KernelConfig,
                   corr: CorrelationSpec) -> CvScore:
    """GCV for correlated errors with known precision structures.

    The fit and the hat blocks carry ``W`` and ``Ucorr``; the numerator
    weights the position residuals by ``W``, the velocity residuals by
    ``Ucorr``, and couples them through the symmetric PSD square roots
    ``W^(1/2) Ucorr^(1/2)``.  Identity matrices reduce this exactly to
    :func:`gcv_score`.
    """
    t, y, v, lam, gamma = _check_inputs(t, y, v, lam, gamma)
    n = t.size
    if corr.W.shape != (n, n):
        raise ValueError(f"correlation matrices must be ({n}, {n})")
    design = _design_for(t, lam, cfg)
    theta = fit_theta(design, y, v, gamma, W=corr.W, Ucorr=corr.Ucorr)
    hats = hat_matrices_correlated(design, gamma, corr.W, corr.Ucorr)
    r = theta[:n] - y
    rp = theta[n:] - v
    dv = n - gamma * np.trace(hats.V)
    if abs(dv) < _DENOM_FLOOR:
        raise DegenerateScoreError("velocity trace denominator tr(I - gamma V) vanished")
    k = gamma * np.trace(hats.T) / dv
    den = n - np.trace(hats.S) - k * np.trace(hats.U)
    if abs(den) < _DENOM_FLOOR:
        raise DegenerateScoreError("trace denominator tr(I - S - k U) vanished")
    terms = _correlated_numerator_terms(r, rp, k, corr.W, corr.Ucorr)
    return CvScore(value=float(n * sum(terms) / den**2), lam=lam, gamma=gamma)


@dataclass(frozen=True, eq=False)
class SelectionResult:
    """Outcome of the parameter search.

    ``surface`` holds one (lam, gamma, score) row per coarse grid point,
    with NaN scores where the criterion was degenerate; the selected
    parameters may sit between grid points after refinement.
    """

    lam: float
    gamma: float
    score: float
    criterion: str
    surface: np.ndarray
    degenerate_count: int


def _golden_min(f, lo, hi, iters=40):
    """Deterministic golden-section minimum of f on [lo, hi].

    Returns the best point actually evaluated, so a non-unimodal f cannot
    make the result worse than the bracket endpoints.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    pts = [(f(lo), lo), (f(hi), hi)]
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    pts += [(fc, c), (fd, d)]
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
            pts.append((fc, c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
            pts.append((fd, d))
    return min(pts, key=lambda p: p[0])


def optimize_params(t, y, v, cfg: KernelConfig, corr: CorrelationSpec | None = None,
                    criterion: str = "auto",
                    lam_bounds=(1e-8, 1e2), gamma_bounds=(1e-4, 1e4),
                    lam_points: int = 15, gamma_points: int = 13,
                    refine: bool = True) -> SelectionResult:
    """Pick (lam, gamma) minimizing a cross-validation criterion.

    A log-spaced coarse grid is scored first; the best point is then
    refined by two sweeps of golden-section search per coordinate, each
    confined between the neighboring grid points.  Deterministic for
    fixed inputs.  ``criterion`` may be "cv" (closed-form leave-one-out),
    "gcv", "gcv-corr" (requires ``corr``), or "auto", which uses the
    closed form up to 500 samples and the trace form beyond.
    """
    t, y, v, _, _ = _check_inputs(t, y, v, 1.0, 1.0)
    n = t.size
    if criterion == "auto":
        criterion = "cv" if n <= 500 else "gcv"
    if criterion == "cv":
        def score_at(lam, gamma):
            return cv_closed_form(t, y, v, lam, gamma, cfg).value
    elif criterion == "gcv":
        def score_at(lam, gamma):
            return gcv_score(t, y, v, lam, gamma, cfg).value
    elif criterion == "gcv-corr":
        if corr is None:
            raise ValueError("criterion 'gcv-corr' requires a CorrelationSpec")

        def score_at(lam, gamma):
            return gcv_correlated(t, y, v, lam, gamma, cfg, corr).value
    else:
        raise ValueError("criterion must be 'cv', 'gcv', 'gcv-corr', or 'auto'")

    def safe_score(lam, gamma):
        try:
            return score_at(lam, gamma)
        except (DegenerateScoreError, SingularSystemError):
            return np.nan

    lams = np.geomspace(lam_bounds[0], lam_bounds[1], lam_points)
    gammas = np.geomspace(gamma_bounds[0], gamma_bounds[1], gamma_points)
    surface = np.empty((lam_points * gamma_points, 3))
    row = 0
    for lam in lams:
        for gamma in gammas:
            surface[row] = (lam, gamma, safe_score(lam, gamma))
            row += 1
    scores = surface[:, 2]
    degenerate = int(np.sum(np.isnan(scores)))
    if degenerate == surface.shape[0]:
        raise DegenerateGridError("every grid point produced a degenerate score")
    best_row = int(np.nanargmin(scores))
    best_lam, best_gamma, best_score = surface[best_row]

    if refine:
        log_lams = np.log10(lams)
        log_gammas = np.log10(gammas)
        li = int(np.argmin(np.abs(log_lams - np.log10(best_lam))))
        gi = int(np.argmin(np.abs(log_gammas - np.log10(best_gamma))))
        lam_lo, lam_hi = log_lams[max(li - 1, 0)], log_lams[min(li + 1, lam_points - 1)]
        gam_lo, gam_hi = log_gammas[max(gi - 1, 0)], log_gammas[min(gi + 1, gamma_points - 1)]
        for _ in range(2):
            def over_lam(ll):
                val = safe_score(10.0**ll, best_gamma)
                return np.inf if np.isnan(val) else val

            score, log_best = _golden_min(over_lam, lam_lo, lam_hi)
            if np.isfinite(score) and score <= best_score:
                best_lam, best_score = 10.0**log_best, score

            def over_gamma(lg):
                val = safe_score(best_lam, 10.0**lg)
                return np.inf if np.isnan(val) else val

            score, log_best = _golden_min(over_gamma, gam_lo, gam_hi)
            if np.isfinite(score) and score <= best_score:
                best_gamma, best_score = 10.0**log_best, score

    return SelectionResult(lam=float(best_lam), gamma=float(best_gamma),
                           score=float(best_score), criterion=criterion,
                           surface=surface, degenerate_count=degenerate)
