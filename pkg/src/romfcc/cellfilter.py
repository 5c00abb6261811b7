"""Univariate functional filter for cellwise outliers.

Each component is screened on its own: a robust univariate functional PCA
represents the component's curves, every curve gets a score distance, and
the empirical distance distribution is compared against a chi-squared
reference beyond a high quantile.  The positive part of the largest gap
fixes the fraction of cells to flag; flagged cells become missing, and a
case whose components are all flagged is dropped entirely.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from . import mfpca as _mfpca
from ._utils import derive_seed
from .errors import InsufficientSampleError, ShapeError, ValidationError
from .mfpca import FunctionalSample, MfpcaModel

#: reference-distribution quantile above which the empirical gap is measured
DEFAULT_ALPHA = 0.95

#: variance fraction the filter representation must capture
DEFAULT_VARIANCE_TARGET = 0.999


@dataclass(eq=False)
class FilterReport:
    """Per-cell distances and the flag decisions of one filter pass.

    distances[i, j] is the score distance of case i in component j;
    flagged marks cells converted to missing; d_n and n_components are
    per-component; removed_case_ids lists cases dropped because every
    component was flagged.
    """

    distances: np.ndarray      # (n, p)
    flagged: np.ndarray        # (n, p) bool
    d_n: np.ndarray            # (p,)
    n_components: np.ndarray   # (p,) int
    alpha: float
    removed_case_ids: np.ndarray

    @property
    def flagged_cells(self) -> set:
        ii, jj = np.nonzero(self.flagged)
        return set(zip(ii.tolist(), jj.tolist()))


def fit_filter_model(
    coefs_j: np.ndarray,
    bs,
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    seed: int = 0,
) -> tuple[MfpcaModel, int]:
    """Robust univariate functional PCA of one component's curve sample."""
    coefs_j = np.asarray(coefs_j, dtype=float)
    if coefs_j.ndim != 2:
        raise ShapeError("expected coefficients of shape (n, K)")
    if coefs_j.shape[0] < 10:
        raise InsufficientSampleError("filter needs at least 10 curves")
    sample = FunctionalSample(basis=bs, coefs=coefs_j[:, None, :])
    model = _mfpca.fit_mfpca(
        sample, flavor="robust", variance_target=variance_target, seed=seed
    )
    return model, model.n_retained


def score_distances(model: MfpcaModel, n_components: int, coefs) -> np.ndarray:
    """Score distances sum_l xi_l^2 / lambda_l under a fitted filter model."""
    arr = np.asarray(coefs, dtype=float)
    if arr.ndim == 2:  # (n, K) univariate convenience
        arr = arr[:, None, :]
    xi = _mfpca.scores(model, arr, n_components=n_components)
    lam = model.eigenvalues[:n_components]
    if np.any(lam <= 0):
        warnings.warn(
            "degenerate scale in filter model; distances set to 0",
            RuntimeWarning,
            stacklevel=2,
        )
        return np.zeros(arr.shape[0])
    return np.sum(xi**2 / lam, axis=1)


def filter_distances(
    coefs_j: np.ndarray,
    bs,
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    seed: int = 0,
) -> tuple[np.ndarray, int]:
    """Distances of one component's curves under its own robust representation."""
    model, n_comp = fit_filter_model(coefs_j, bs, variance_target, seed)
    return score_distances(model, n_comp, np.asarray(coefs_j, dtype=float)), n_comp


def flag_proportion(distances, n_components: int, alpha: float = DEFAULT_ALPHA):
    """Flagging proportion and the flagged indices.

    The proportion is the positive part of sup_{x >= eta} {G(x) - G_n(x)}
    with G the chi-squared reference with `n_components` degrees of freedom
    and eta its `alpha` quantile.  G_n is a right-continuous step function,
    so the supremum is attained approaching a jump from the left; it equals
    the maximum of G(d_(i)) - (i-1)/n over sorted distances d_(i) >= eta.
    floor(n * d_n) cells with the largest distances are flagged, ties
    broken toward the lower case index.

    Returns
    -------
    d_n : float
    flagged_idx : ndarray of int
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 1:
        raise ShapeError("distances must be 1-d")
    if np.any(d < 0):
        raise ValidationError("distances must be nonnegative")
    if not (0 < alpha < 1):
        raise ValidationError("alpha must lie in (0, 1)")
    n = d.size
    eta = chi2.ppf(alpha, n_components)
    order = np.argsort(d, kind="stable")
    d_sorted = d[order]
    i_vals = np.arange(1, n + 1)
    mask = d_sorted >= eta
    gap = 0.0
    if mask.any():
        g = chi2.cdf(d_sorted[mask], n_components)
        gn_left = (i_vals[mask] - 1) / n
        gap = float(np.max(g - gn_left))
    # boundary term at eta itself (dominated unless no jump lies beyond eta)
    gn_eta = float(np.searchsorted(d_sorted, eta, side="right")) / n
    d_n = max(0.0, gap, alpha - gn_eta)
    n_flag = int(np.floor(n * d_n))
    if n_flag == 0:
        return d_n, np.empty(0, dtype=int)
    # largest distances first; ties broken by lower case index
    rank = np.lexsort((np.arange(n), -d))
    return d_n, np.sort(rank[:n_flag])


def apply_filter(
    sample: FunctionalSample,
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
) -> tuple[FunctionalSample, FilterReport]:
    """Screen every component of a complete sample and mask flagged cells.

    Filtering is component-local: distances in one component never depend
    on any other component.  Cases with all components flagged are removed
    from the returned sample (their ids are reported).
    """
    if not sample.observed.all():
        raise ValidationError("apply_filter expects a complete sample")
    n, p, _ = sample.coefs.shape
    distances = np.empty((n, p))
    flagged = np.zeros((n, p), dtype=bool)
    d_n = np.empty(p)
    n_comp = np.empty(p, dtype=int)
    for j in range(p):
        dist_j, l_j = filter_distances(
            sample.coefs[:, j],
            sample.basis,
            variance_target=variance_target,
            seed=derive_seed(seed, "filter", j),
        )
        dnj, idx = flag_proportion(dist_j, l_j, alpha=alpha)
        distances[:, j] = dist_j
        flagged[idx, j] = True
        d_n[j] = dnj
        n_comp[j] = l_j

    observed = ~flagged
    tombstone = ~observed.any(axis=1)
    keep = ~tombstone
    coefs = sample.coefs.copy()
    coefs[flagged] = np.nan
    filtered = FunctionalSample(
        basis=sample.basis,
        coefs=coefs[keep],
        observed=observed[keep],
        case_ids=sample.case_ids[keep],
    )
    report = FilterReport(
        distances=distances,
        flagged=flagged,
        d_n=d_n,
        n_components=n_comp,
        alpha=alpha,
        removed_case_ids=sample.case_ids[tombstone],
    )
    return filtered, report
