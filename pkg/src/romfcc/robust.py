"""Robust location and scale for scalar samples and univariate functional samples.

The functional estimators work pointwise on a fixed evaluation grid: a
Huber M-estimate of location with data-driven tuning (1.345 times the
pointwise normalized MAD, iteratively reweighted from the pointwise
median) and the squared normalized-MAD scale function.  The location
estimate is re-projected onto the basis afterwards so downstream code can
keep everything in coefficient space.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import basis as _basis
from .errors import ShapeError, ValidationError

#: consistency factor making the MAD estimate the standard deviation under normality
MAD_SCALE = 1.4826

#: Huber tuning constant (95% efficiency at the normal model)
HUBER_K = 1.345

#: number of equally spaced points used for pointwise functional estimation
EVAL_GRID_SIZE = 200

#: relative floor applied to variance functions to keep standardization finite
_VAR_FLOOR = 1e-12


class MedianMad(NamedTuple):
    location: float
    scale: float
    degenerate: bool


def median_mad(x) -> MedianMad:
    """Sample median and normalized MAD.

    The scale is 1.4826 * median |x_i - median(x)|; a zero MAD is returned
    as scale 0 with the degenerate flag set rather than raising.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("median_mad expects a 1-d sample")
    if x.size < 2:
        raise ValidationError("median_mad needs at least 2 values")
    loc = float(np.median(x))
    scale = MAD_SCALE * float(np.median(np.abs(x - loc)))
    return MedianMad(loc, scale, scale == 0.0)


def _eval_curves(coefs, bs, grid):
    coefs = np.asarray(coefs, dtype=float)
    phi = _basis.design_matrix(bs, grid)
    return coefs @ phi.T


def functional_m_mean(
    coefs,
    bs: _basis.BasisSystem,
    grid=None,
    max_iter: int = 50,
    tol: float = 1e-8,
) -> np.ndarray:
    """Huber M-estimate of the mean function of a univariate curve sample.

    Parameters
    ----------
    coefs : ndarray, shape (n, K)
        Basis coefficients of the sample curves.
    bs : BasisSystem
    grid : ndarray, optional
        Evaluation grid; defaults to 200 equally spaced points.

    Returns
    -------
    ndarray, shape (K,)
        Coefficients of the M-mean re-projected onto the basis.

    Notes
    -----
    At each grid point the location is iteratively reweighted with Huber
    weights min(1, k/|r|), k = 1.345 * nMAD, starting from the pointwise
    median.  Points with zero nMAD keep the median.  If the iteration has
    not converged after `max_iter` sweeps the last iterate is returned and
    a RuntimeWarning is emitted.
    """
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim != 2:
        raise ShapeError("functional_m_mean expects coefficients of shape (n, K)")
    if coefs.shape[0] < 3:
        raise ValidationError("functional_m_mean needs at least 3 curves")
    if grid is None:
        grid = _basis.uniform_grid(EVAL_GRID_SIZE)
    X = _eval_curves(coefs, bs, grid)  # (n, m)
    med = np.median(X, axis=0)
    mad = MAD_SCALE * np.median(np.abs(X - med), axis=0)
    k = HUBER_K * mad
    live = mad > 0.0

    mu = med.copy()
    converged = not live.any()
    for _ in range(max_iter):
        if converged:
            break
        r = X[:, live] - mu[live]
        absr = np.abs(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.minimum(1.0, k[live] / absr)
        w[absr == 0.0] = 1.0
        mu_new = np.sum(w * X[:, live], axis=0) / np.sum(w, axis=0)
        delta = np.abs(mu_new - mu[live])
        scale_ref = np.maximum(np.abs(mu_new), mad[live])
        mu[live] = mu_new
        if np.all(delta <= tol * np.maximum(scale_ref, 1e-300)):
            converged = True
    if not converged:
        warnings.warn(
            "functional M-mean did not converge within "
            f"{max_iter} iterations; returning last iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    return _basis.project_values(mu, grid, bs)


def functional_mad_scale(coefs, mu_coefs, bs: _basis.BasisSystem, grid=None) -> np.ndarray:
    """Squared normalized-MAD variance function of a univariate curve sample.

    v(t) = (1.4826 * median_i |X_i(t) - mu(t)|)^2, floored at 1e-12 times
    its maximum so standardization never divides by zero.
    """
    coefs = np.asarray(coefs, dtype=float)
    if coefs.shape[0] < 3:
        raise ValidationError("functional_mad_scale needs at least 3 curves")
    if grid is None:
        grid = _basis.uniform_grid(EVAL_GRID_SIZE)
    X = _eval_curves(coefs, bs, grid)
    mu = _eval_curves(np.asarray(mu_coefs, dtype=float)[None, :], bs, grid)[0]
    v = (MAD_SCALE * np.median(np.abs(X - mu), axis=0)) ** 2
    return np.maximum(v, _VAR_FLOOR * max(v.max(), 1e-300))


@dataclass(frozen=True, eq=False)
class LocationScale:
    """Per-component location (basis coefficients) and variance (grid values)."""

    mean_coefs: np.ndarray  # (p, K)
    var_grid: np.ndarray    # (p, m), strictly positive
    grid: np.ndarray        # (m,)

    @property
    def n_components(self) -> int:
        return self.mean_coefs.shape[0]


def estimate_location_scale(
    coefs,
    bs: _basis.BasisSystem,
    grid=None,
    robust: bool = True,
) -> LocationScale:
    """Componentwise location/scale functions of a multivariate curve sample.

    coefs has shape (n, p, K).  With robust=True the M-mean and nMAD^2
    scale are used; otherwise the pointwise sample mean and variance.
    """
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim != 3:
        raise ShapeError("expected coefficients of shape (n, p, K)")
    n, p, K = coefs.shape
    if grid is None:
        grid = _basis.uniform_grid(EVAL_GRID_SIZE)
    mean_coefs = np.empty((p, K))
    var_grid = np.empty((p, grid.size))
    for j in range(p):
        if robust:
            mean_coefs[j] = functional_m_mean(coefs[:, j], bs, grid)
            var_grid[j] = functional_mad_scale(coefs[:, j], mean_coefs[j], bs, grid)
        else:
            mean_coefs[j] = coefs[:, j].mean(axis=0)
            X = _eval_curves(coefs[:, j], bs, grid)
            v = X.var(axis=0, ddof=1)
            var_grid[j] = np.maximum(v, _VAR_FLOOR * max(v.max(), 1e-300))
    return LocationScale(mean_coefs=mean_coefs, var_grid=var_grid, grid=np.asarray(grid, float))
