"""Casewise-robust PCA on finite-dimensional vectors.

Three layers, each usable on its own:

* exact univariate MCD (minimal-variance contiguous window of the sorted
  sample), used for per-direction location/scale in the outlyingness step;
* FastMCD (Rousseeuw & Van Driessen 1999): random elemental starts,
  concentration steps to convergence on the best candidates, normal-model
  consistency correction;
* a projection-pursuit robust PCA in the spirit of Hubert, Rousseeuw &
  Vanden Branden (2005): reduce to the affine span, rank points by
  Stahel-Donoho outlyingness over random two-point directions, project
  onto the leading eigenspace of the least-outlying subset, then refine
  with a reweighted FastMCD in that subspace.

All estimators are deterministic given an explicit seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from ._utils import derive_rng
from .errors import InsufficientSampleError, InvalidConfigurationError, ShapeError

#: random two-point projection directions for the outlyingness stage
N_DIRECTIONS = 250

#: random elemental starts / finalists kept for full concentration
N_STARTS = 500
N_FINALISTS = 10

#: above this dimension the elemental-start budget is reduced; random
#: (k+1)-point subsets in high dimension are nearly singular and more of
#: them buys no accuracy, only runtime
_HIGH_DIM = 25
_N_STARTS_HIGH_DIM = 100

#: chi-squared coverage used by the MCD reweighting step
_REWEIGHT_QUANTILE = 0.975

_RANK_TOL = 1e-12


def _truncation_variance(gamma: float) -> float:
    """Variance of the standard normal truncated to its central `gamma` mass."""
    if gamma >= 1.0:
        return 1.0
    q = norm.ppf((1.0 + gamma) / 2.0)
    return 1.0 - 2.0 * q * norm.pdf(q) / gamma


def mcd_consistency_factor(gamma: float, dim: int) -> float:
    """Multiplier making the h-subset covariance consistent at the normal model."""
    if gamma >= 1.0:
        return 1.0
    q = chi2.ppf(gamma, dim)
    return gamma / chi2.cdf(q, dim + 2)


def univariate_mcd(x, h: int) -> tuple[float, float]:
    """Exact univariate MCD location and scale.

    Scans all contiguous windows of length h in the sorted sample, keeps
    the one with minimal variance, and divides the window standard
    deviation by the square root of the h/n-truncation variance of the
    standard normal so the scale is consistent for Gaussian data.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("univariate_mcd expects a 1-d sample")
    n = x.size
    if h > n or h < 2:
        raise InvalidConfigurationError(f"need 2 <= h <= n, got h={h}, n={n}")
    loc, scale = _univariate_mcd_sorted(np.sort(x)[None, :], h)
    return float(loc[0]), float(scale[0])


def _univariate_mcd_sorted(xs: np.ndarray, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched exact univariate MCD over pre-sorted rows, shape (d, n)."""
    d, n = xs.shape
    s1 = np.cumsum(xs, axis=1)
    s2 = np.cumsum(xs**2, axis=1)
    zeros = np.zeros((d, 1))
    s1 = np.hstack([zeros, s1])
    s2 = np.hstack([zeros, s2])
    win1 = s1[:, h:] - s1[:, :-h]
    win2 = s2[:, h:] - s2[:, :-h]
    means = win1 / h
    ss = np.maximum(win2 - h * means**2, 0.0)
    best = np.argmin(ss, axis=1)
    rows = np.arange(d)
    var = ss[rows, best] / (h - 1)
    corr = _truncation_variance(h / n)
    return means[rows, best], np.sqrt(var / corr)


def _batch_cov(X: np.ndarray, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean/covariance (ddof=1) of X rows selected per start, idx (s, m)."""
    sub = X[idx]  # (s, m, k)
    mean = sub.mean(axis=1)
    c = sub - mean[:, None, :]
    cov = np.matmul(c.transpose(0, 2, 1), c) / (idx.shape[1] - 1)
    return mean, cov


def _regularize(cov: np.ndarray) -> np.ndarray:
    """Lift singular covariances by 1e-10 * trace/k on the diagonal."""
    k = cov.shape[-1]
    eye = np.eye(k)
    sign, logdet = np.linalg.slogdet(cov)
    bad = ~np.isfinite(logdet) | (sign <= 0)
    if cov.ndim == 2:
        if bad:
            cov = cov + (1e-10 * np.trace(cov) / k + 1e-300) * eye
        return cov
    if bad.any():
        tr = np.trace(cov[bad], axis1=-2, axis2=-1)
        cov = cov.copy()
        cov[bad] += (1e-10 * tr / k + 1e-300)[:, None, None] * eye
    return cov


def _mahalanobis_sq(X: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Squared Mahalanobis distances; batched when mean/cov carry a start axis.

    `cov` must already be nonsingular (callers regularize once).
    """
    if mean.ndim == 1:
        diff = X - mean
        sol = np.linalg.solve(cov, diff.T)
        return np.einsum("nk,kn->n", diff, sol)
    diff = X[None, :, :] - mean[:, None, :]  # (s, n, k)
    inv = np.linalg.inv(cov)
    return np.sum(np.matmul(diff, inv) * diff, axis=2)


def _c_step_batch(X: np.ndarray, idx: np.ndarray, h: int):
    """One concentration step per start; returns new subsets, dets, mean, cov."""
    mean, cov = _batch_cov(X, idx)
    cov = _regularize(cov)
    d2 = _mahalanobis_sq(X, mean, cov)
    new_idx = np.argpartition(d2, h - 1, axis=1)[:, :h]
    new_idx.sort(axis=1)
    _, logdet = np.linalg.slogdet(cov)
    return new_idx, logdet, mean, cov


def fast_mcd(
    X,
    h: int,
    seed: int,
    n_starts: int | None = None,
    return_details: bool = False,
):
    """FastMCD estimate of multivariate location and scatter.

    Parameters
    ----------
    X : ndarray, shape (n, k)
    h : int
        Subset size, k+1 <= h <= n.
    seed : int
        Seed for the random elemental starts; results are deterministic.
    n_starts : int, optional
        Number of elemental starts (default 500, reduced to 100 for
        k > 25).  The best 10 candidates are concentrated to convergence.
    return_details : bool
        Also return per-start determinant sequences (for diagnostics).

    Returns
    -------
    center : ndarray (k,)
    cov : ndarray (k, k)
        Consistency-corrected covariance of the minimal-determinant subset.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError("fast_mcd expects a 2-d sample")
    n, k = X.shape
    if n <= k + 1:
        raise InsufficientSampleError(f"fast_mcd needs n > k+1, got n={n}, k={k}")
    if not (k + 1 <= h <= n):
        raise InvalidConfigurationError(f"need k+1 <= h <= n, got h={h}")
    factor = mcd_consistency_factor(h / n, k)
    det_paths: list[list[float]] = []
    if h == n:
        mean = X.mean(axis=0)
        diff = X - mean
        cov = diff.T @ diff / (n - 1)
        if return_details:
            return mean, cov * factor, det_paths
        return mean, cov * factor

    rng = derive_rng(seed, "fast-mcd")
    if n_starts is None:
        n_starts = N_STARTS if k <= _HIGH_DIM else _N_STARTS_HIGH_DIM
    # elemental (k+1)-subsets, then two concentration steps each
    picks = np.argsort(rng.random((n_starts, n)), axis=1)[:, : k + 1]
    idx = np.sort(picks, axis=1)
    for _ in range(2):
        idx, logdet, _, _ = _c_step_batch(X, idx, h)

    # concentrate the best candidates to convergence, batched together
    order = np.argsort(logdet, kind="stable")[:N_FINALISTS]
    cur = idx[order]
    det_paths = [[float(logdet[s])] for s in order]
    for _ in range(200):
        new, ld, _, _ = _c_step_batch(X, cur, h)
        for path, v in zip(det_paths, ld):
            path.append(float(v))
        if np.array_equal(new, cur):
            break
        cur = new
    # estimates of the converged subsets themselves
    mean, cov = _batch_cov(X, cur)
    _, ld = np.linalg.slogdet(_regularize(cov))
    best = int(np.argmin(ld))
    result_cov = cov[best] * factor
    if return_details:
        return mean[best], result_cov, det_paths
    return mean[best], result_cov


def reweighted_mcd(
    X, h: int, seed: int, n_starts: int | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """FastMCD followed by the usual one-step chi-squared reweighting.

    Points whose squared robust Mahalanobis distance is within the 0.975
    chi-squared quantile keep weight one; the covariance of the accepted
    points gets its own truncation consistency correction.

    Returns (center, covariance, weights).
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    center, cov = fast_mcd(X, h, seed, n_starts=n_starts)
    d2 = _mahalanobis_sq(X, center, _regularize(cov))
    w = d2 <= chi2.ppf(_REWEIGHT_QUANTILE, k)
    if w.sum() < k + 1:  # keep enough points to stay full rank
        w = np.zeros(n, bool)
        w[np.argsort(d2, kind="stable")[: k + 1]] = True
    Xw = X[w]
    center_w = Xw.mean(axis=0)
    diff = Xw - center_w
    cov_w = diff.T @ diff / (w.sum() - 1)
    cov_w = cov_w * mcd_consistency_factor(_REWEIGHT_QUANTILE, k)
    return center_w, cov_w, w


@dataclass(frozen=True, eq=False)
class RobpcaResult:
    """Output of `robpca`.

    center : robust center in the original q-space
    loadings : (q, k) orthonormal columns
    eigenvalues : non-increasing, >= 0
    h : subset size used by the outlyingness stage
    outlyingness : per-case Stahel-Donoho outlyingness
    weights : reweighting acceptance mask from the final MCD stage
    """

    center: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    h: int
    outlyingness: np.ndarray
    weights: np.ndarray


def _outlyingness(Y: np.ndarray, directions: np.ndarray, h: int) -> np.ndarray:
    """Stahel-Donoho outlyingness with per-direction univariate MCD scale."""
    norms = np.linalg.norm(directions, axis=1)
    keep = norms > 1e-300
    U = directions[keep] / norms[keep, None]
    proj = U @ Y.T  # (d, n)
    order = np.argsort(proj, axis=1)
    locs, scales = _univariate_mcd_sorted(np.take_along_axis(proj, order, axis=1), h)
    ok = scales > 0
    if not ok.any():
        return np.zeros(Y.shape[0])
    dev = np.abs(proj[ok] - locs[ok, None]) / scales[ok, None]
    return dev.max(axis=0)


def robpca(
    X,
    k: int,
    alpha_h: float = 0.75,
    seed: int = 0,
    directions=None,
) -> RobpcaResult:
    """Projection-pursuit robust PCA.

    Parameters
    ----------
    X : ndarray, shape (n, q)
    k : int
        Target dimension, 1 <= k <= min(n-1, q).  Reduced (with a warning)
        if the least-outlying subset has lower rank.
    alpha_h : float in [0.5, 1]
        Coverage fraction; the outlyingness stage keeps h = ceil(alpha_h*n)
        points.
    seed : int
    directions : ndarray (d, q), optional
        Explicit projection directions (for testing); by default
        min(250, n(n-1)/2) random two-point directions are drawn.

    Notes
    -----
    Steps: (1) reduce to the affine span via SVD; (2) rank points by
    Stahel-Donoho outlyingness; (3) eigendecompose the covariance of the h
    least outlying points and keep k directions; (4) project everything
    onto that subspace and run a reweighted FastMCD there; loadings are
    the eigenvectors of the reweighted covariance mapped back to q-space.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError("robpca expects a 2-d sample")
    n, q = X.shape
    if n < 10:
        raise InsufficientSampleError(f"robpca needs n >= 10, got {n}")
    if not (0.5 <= alpha_h <= 1.0):
        raise InvalidConfigurationError("alpha_h must lie in [0.5, 1]")
    if not (1 <= k <= min(n - 1, q)):
        raise InvalidConfigurationError(
            f"need 1 <= k <= min(n-1, q) = {min(n - 1, q)}, got k={k}"
        )
    h = int(np.ceil(alpha_h * n))
    h = max(h, 2)

    # (1) affine span of the data
    center0 = X.mean(axis=0)
    Xc = X - center0
    U, sv, Vt = np.linalg.svd(Xc, full_matrices=False)
    rank = int(np.sum(sv > max(n, q) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)))
    rank = max(rank, 1)
    V_r = Vt[:rank].T  # (q, r)
    Y = U[:, :rank] * sv[:rank]  # (n, r)

    # (2) outlyingness over two-point directions
    rng = derive_rng(seed, "robpca-directions")
    if directions is None:
        n_pairs = n * (n - 1) // 2
        n_dir = min(N_DIRECTIONS, n_pairs)
        if n_pairs <= N_DIRECTIONS:
            ii, jj = np.triu_indices(n, 1)
        else:
            ii = rng.integers(0, n, size=2 * n_dir)
            jj = rng.integers(0, n, size=2 * n_dir)
            good = ii != jj
            ii, jj = ii[good][:n_dir], jj[good][:n_dir]
        dirs = Y[ii] - Y[jj]
    else:
        dirs = np.asarray(directions, dtype=float) @ V_r
    outl = _outlyingness(Y, dirs, h)

    # (3) eigenspace of the h least outlying points
    idx_h = np.argsort(outl, kind="stable")[:h]
    mean_h = Y[idx_h].mean(axis=0)
    diff = Y[idx_h] - mean_h
    cov_h = diff.T @ diff / (h - 1)
    eigval, eigvec = np.linalg.eigh(cov_h)
    eigval, eigvec = eigval[::-1], eigvec[:, ::-1]
    rank_h = int(np.sum(eigval > _RANK_TOL * max(eigval[0], 1e-300)))
    if k > rank_h:
        warnings.warn(
            f"requested k={k} exceeds rank {rank_h} of the clean-subset "
            "covariance; reducing",
            RuntimeWarning,
            stacklevel=2,
        )
        k = max(rank_h, 1)
    E = eigvec[:, :k]  # (r, k)

    # (4) reweighted MCD in the projected space
    T = (Y - mean_h) @ E  # (n, k)
    center_t, cov_t, w = reweighted_mcd(T, h, seed)
    lam, G = np.linalg.eigh(cov_t)
    lam, G = np.maximum(lam[::-1], 0.0), G[:, ::-1]

    loadings = V_r @ (E @ G)  # (q, k), orthonormal columns
    center = center0 + V_r @ (mean_h + E @ center_t)
    return RobpcaResult(
        center=center,
        loadings=loadings,
        eigenvalues=lam,
        h=h,
        outlyingness=outl,
        weights=w,
    )


def robust_covariance_from(result: RobpcaResult) -> np.ndarray:
    """Rank-k robust covariance L diag(lambda) L' implied by a robpca fit."""
    L = result.loadings
    return (L * result.eigenvalues) @ L.T
