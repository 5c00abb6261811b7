"""Multivariate functional PCA on basis coefficients, robust or classical.

Curves are p-vectors of functions represented by per-component coefficient
rows.  Fitting standardizes each component by its location/scale function,
stacks the standardized coefficients, applies the Gram square root blockwise
and eigenanalyzes a (robust or classical) covariance of the resulting
vectors; eigenvector coefficients are mapped back through the inverse root,
which makes the eigenfunctions orthonormal under the vector-function inner
product.  Scores, reconstruction and the squared residual norm are all plain
coefficient-space algebra after that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import basis as _basis
from . import robust as _robust
from .errors import (
    IncompleteObservationError,
    InsufficientSampleError,
    ShapeError,
    ValidationError,
)
from .robpca import robpca, robust_covariance_from

#: fraction of total variance the retained components must explain by default
DEFAULT_VARIANCE_TARGET = 0.7

#: default coverage of the robust covariance stage
DEFAULT_ALPHA_H = 0.75

_EIG_KEEP_TOL = 1e-12


@dataclass(eq=False)
class MultiCurve:
    """One case: per-component coefficient rows plus an observed mask."""

    coefs: np.ndarray      # (p, K)
    observed: np.ndarray   # (p,) bool

    def __post_init__(self):
        self.coefs = np.asarray(self.coefs, dtype=float)
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.coefs.ndim != 2 or self.observed.shape != (self.coefs.shape[0],):
            raise ShapeError("MultiCurve needs coefs (p, K) and observed (p,)")

    @property
    def complete(self) -> bool:
        return bool(self.observed.all())


@dataclass(eq=False)
class FunctionalSample:
    """A sample of multivariate curves in coefficient form.

    coefs has shape (n, p, K); observed (n, p) marks which cells carry
    data.  Values in masked cells are ignored by every operation.
    """

    basis: _basis.BasisSystem
    coefs: np.ndarray
    observed: np.ndarray = None
    case_ids: np.ndarray = None

    def __post_init__(self):
        self.coefs = np.asarray(self.coefs, dtype=float)
        if self.coefs.ndim != 3:
            raise ShapeError("FunctionalSample coefs must have shape (n, p, K)")
        n, p, K = self.coefs.shape
        if K != self.basis.n_basis:
            raise ShapeError(
                f"coefficient length {K} does not match basis size {self.basis.n_basis}"
            )
        if self.observed is None:
            self.observed = np.ones((n, p), dtype=bool)
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.observed.shape != (n, p):
            raise ShapeError("observed mask must have shape (n, p)")
        if self.case_ids is None:
            self.case_ids = np.arange(n)
        self.case_ids = np.asarray(self.case_ids)

    @property
    def n_cases(self) -> int:
        return self.coefs.shape[0]

    @property
    def n_components(self) -> int:
        return self.coefs.shape[1]

    @property
    def complete_mask(self) -> np.ndarray:
        return self.observed.all(axis=1)

    def curve(self, i: int) -> MultiCurve:
        return MultiCurve(self.coefs[i].copy(), self.observed[i].copy())

    def subset(self, idx) -> "FunctionalSample":
        return FunctionalSample(
            basis=self.basis,
            coefs=self.coefs[idx],
            observed=self.observed[idx],
            case_ids=self.case_ids[idx],
        )


def smooth_sample(curveset, bs: _basis.BasisSystem, lam="gcv") -> FunctionalSample:
    """Smooth a discretely observed curve set onto the basis."""
    coefs, _ = _basis.smooth_curves(curveset.values, curveset.grid, bs, lam=lam)
    return FunctionalSample(basis=bs, coefs=coefs, case_ids=np.asarray(curveset.case_ids))


@dataclass(eq=False)
class MfpcaModel:
    """Fitted multivariate functional PCA.

    Attributes
    ----------
    basis, gram : the shared basis geometry
    mean_coefs : (p, K) location function coefficients
    var_grid : (p, m) variance functions tabulated on `eval_grid`
    eigvec_coefs : (p*K, L_max) coefficient columns of the eigenfunctions
    eigenvalues : (L_max,) non-increasing, >= 0
    n_retained : components needed to reach the requested variance fraction
    flavor : "robust" or "classical"
    """

    basis: _basis.BasisSystem
    gram: _basis.GramMatrix
    mean_coefs: np.ndarray
    var_grid: np.ndarray
    eval_grid: np.ndarray
    eigvec_coefs: np.ndarray
    eigenvalues: np.ndarray
    n_retained: int
    flavor: str
    variance_target: float
    seed: int | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def p(self) -> int:
        return self.mean_coefs.shape[0]

    @property
    def n_components_max(self) -> int:
        return self.eigenvalues.size

    @property
    def loc_scale(self) -> _robust.LocationScale:
        return _robust.LocationScale(
            mean_coefs=self.mean_coefs, var_grid=self.var_grid, grid=self.eval_grid
        )

    def _design(self) -> np.ndarray:
        if "phi" not in self._cache:
            self._cache["phi"] = _basis.design_matrix(self.basis, self.eval_grid)
        return self._cache["phi"]

    def _projector(self) -> np.ndarray:
        # least-squares projector from grid values back to coefficients
        if "proj" not in self._cache:
            phi = self._design()
            self._cache["proj"] = np.linalg.solve(phi.T @ phi, phi.T)
        return self._cache["proj"]

    def _score_map(self) -> np.ndarray:
        # (p*K, L_max) matrix with W applied blockwise to the eigenvector coefs
        if "bw" not in self._cache:
            L = self.eigvec_coefs.shape[1]
            blocks = self.eigvec_coefs.reshape(self.p, -1, L)
            self._cache["bw"] = np.einsum("kl,pls->pks", self.gram.W, blocks).reshape(
                -1, L
            )
        return self._cache["bw"]


def _as_coef_array(curves, p, K):
    arr = np.asarray(curves, dtype=float)
    if arr.shape == (p, K):
        return arr[None, :, :], True
    if arr.ndim == 3 and arr.shape[1:] == (p, K):
        return arr, False
    raise ShapeError(f"expected coefficients of shape (p, K)=({p}, {K}) or (n, p, K)")


def standardize(model_or_locscale, coefs, bs=None, observed=None):
    """Center and scale curves into the standardized domain.

    Each observed component is evaluated on the model grid, transformed
    pointwise to (x - mu_j) / sqrt(v_j) and projected back onto the basis.
    Masked components pass through untouched.

    Accepts either an `MfpcaModel` or a `LocationScale` (then `bs` is
    required).  Input shape (p, K) or (n, p, K); output matches.
    """
    ls, bs = _resolve_locscale(model_or_locscale, bs)
    p, K = ls.mean_coefs.shape
    arr, single = _as_coef_array(coefs, p, K)
    phi = _basis.design_matrix(bs, ls.grid)
    proj = _proj_for(bs, ls.grid)
    mu = ls.mean_coefs @ phi.T                 # (p, m)
    sd = np.sqrt(ls.var_grid)                  # (p, m)
    vals = arr @ phi.T                         # (n, p, m)
    z = (vals - mu) / sd
    out = z @ proj.T                           # (n, p, K)
    if observed is not None:
        observed = np.atleast_2d(np.asarray(observed, dtype=bool))
        out = np.where(observed[:, :, None], out, arr)
    return out[0] if single else out


def unstandardize(model_or_locscale, z_coefs, bs=None):
    """Inverse of `standardize`: x = mu + sqrt(v) * z, componentwise."""
    ls, bs = _resolve_locscale(model_or_locscale, bs)
    p, K = ls.mean_coefs.shape
    arr, single = _as_coef_array(z_coefs, p, K)
    phi = _basis.design_matrix(bs, ls.grid)
    proj = _proj_for(bs, ls.grid)
    mu = ls.mean_coefs @ phi.T
    sd = np.sqrt(ls.var_grid)
    vals = mu + sd * (arr @ phi.T)
    out = vals @ proj.T
    return out[0] if single else out


def _resolve_locscale(model_or_locscale, bs):
    if isinstance(model_or_locscale, MfpcaModel):
        return model_or_locscale.loc_scale, model_or_locscale.basis
    if bs is None:
        raise ValidationError("basis required when passing a LocationScale")
    return model_or_locscale, bs


_PROJ_CACHE: dict = {}


def _proj_for(bs, grid):
    key = (bs, grid.size, float(grid[0]), float(grid[-1]))
    if key not in _PROJ_CACHE:
        phi = _basis.design_matrix(bs, grid)
        _PROJ_CACHE[key] = np.linalg.solve(phi.T @ phi, phi.T)
    return _PROJ_CACHE[key]


def _apply_w_half(coefs, W_half):
    """Blockwise W^(1/2): (n, p, K) coefficients -> (n, p*K) vectors."""
    y = coefs @ W_half  # W_half symmetric
    return y.reshape(coefs.shape[0], -1)


def standardized_vectors(sample: FunctionalSample, ls, gram_matrix) -> np.ndarray:
    """Gram-weighted standardized coefficient vectors y_i = W_half c_i."""
    z = standardize(ls, sample.coefs, sample.basis)
    return _apply_w_half(z, gram_matrix.W_half)


def _spectrum_from_cov(cov, gram_matrix, p, K, n_cases):
    """Eigenpairs of a coefficient-space covariance, mapped to eigenfunctions."""
    eigval, eigvec = np.linalg.eigh((cov + cov.T) / 2.0)
    eigval, eigvec = eigval[::-1], eigvec[:, ::-1]
    eigval = np.maximum(eigval, 0.0)
    l_max = min(n_cases - 1, p * K)
    eigval, eigvec = eigval[:l_max], eigvec[:, :l_max]
    # back-transform blockwise, then re-orthonormalize in the H geometry
    blocks = eigvec.reshape(p, K, -1)
    b = np.einsum("kl,pls->pks", gram_matrix.W_half_inv, blocks).reshape(p * K, -1)
    b = _orthonormalize_h(b, gram_matrix, p, K)
    return b, eigval


def _orthonormalize_h(b, gram_matrix, p, K):
    """Symmetric re-orthonormalization of eigenfunction coefficients in H."""
    blocks = b.reshape(p, K, -1)
    wb = np.einsum("kl,pls->pks", gram_matrix.W, blocks).reshape(p * K, -1)
    G = b.T @ wb
    eigval, eigvec = np.linalg.eigh((G + G.T) / 2.0)
    eigval = np.maximum(eigval, _EIG_KEEP_TOL)
    inv_root = (eigvec / np.sqrt(eigval)) @ eigvec.T
    return b @ inv_root


def select_n_retained(eigenvalues, variance_target: float) -> int:
    """Smallest L whose leading eigenvalues reach the target variance fraction."""
    lam = np.asarray(eigenvalues, dtype=float)
    positive = lam > _EIG_KEEP_TOL * max(lam[0], 1e-300)
    total = lam[positive].sum()
    if total <= 0:
        return 1
    if variance_target >= 1.0:
        return int(positive.sum())
    frac = np.cumsum(lam) / total
    return int(np.searchsorted(frac, variance_target) + 1)


def robust_coefficient_covariance(
    sample: FunctionalSample, ls, gram_matrix, seed: int, alpha_h: float = DEFAULT_ALPHA_H
) -> np.ndarray:
    """Casewise-robust covariance of the Gram-weighted standardized vectors."""
    y = standardized_vectors(sample, ls, gram_matrix)
    n, q = y.shape
    res = robpca(y, k=min(n - 1, q), alpha_h=alpha_h, seed=seed)
    return robust_covariance_from(res)


def classical_coefficient_covariance(sample: FunctionalSample, ls, gram_matrix) -> np.ndarray:
    y = standardized_vectors(sample, ls, gram_matrix)
    yc = y - y.mean(axis=0)
    return yc.T @ yc / (y.shape[0] - 1)


def fit_mfpca(
    sample: FunctionalSample,
    flavor: str = "robust",
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    seed: int = 0,
    alpha_h: float = DEFAULT_ALPHA_H,
    eval_grid=None,
) -> MfpcaModel:
    """Fit the PCA model on a complete sample.

    flavor "robust" uses the M-mean / nMAD scale functions and a
    projection-pursuit robust covariance; "classical" uses the sample
    mean, pointwise variance and the sample covariance.
    """
    return fit_mfpca_pooled(
        [sample],
        flavor=flavor,
        variance_target=variance_target,
        seed=seed,
        alpha_h=alpha_h,
        eval_grid=eval_grid,
    )


def fit_mfpca_pooled(
    samples: list[FunctionalSample],
    flavor: str = "robust",
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    seed: int = 0,
    alpha_h: float = DEFAULT_ALPHA_H,
    eval_grid=None,
) -> MfpcaModel:
    """Fit on several completed versions of one sample and pool them.

    Each sample gets its own location/scale and coefficient-space
    covariance; the covariances (and location/scale functions) are
    averaged before the final eigendecomposition, which is how multiply
    imputed data sets are combined.
    """
    if flavor not in ("robust", "classical"):
        raise ValidationError(f"flavor must be 'robust' or 'classical', got {flavor!r}")
    if not samples:
        raise ValidationError("need at least one sample")
    bs = samples[0].basis
    n, p, K = samples[0].coefs.shape
    for s in samples:
        if s.coefs.shape != (n, p, K) or s.basis != bs:
            raise ShapeError("pooled samples must share shape and basis")
        if not s.observed.all():
            raise IncompleteObservationError("fit_mfpca requires complete samples")
    if n < 10:
        raise InsufficientSampleError(f"fit_mfpca needs n >= 10 cases, got {n}")
    if eval_grid is None:
        eval_grid = _basis.uniform_grid(_robust.EVAL_GRID_SIZE)
    gm = _basis.gram(bs)
    robust_flag = flavor == "robust"

    cov_sum = np.zeros((p * K, p * K))
    mean_sum = np.zeros((p, K))
    var_sum = np.zeros((p, eval_grid.size))
    for i, s in enumerate(samples):
        ls = _robust.estimate_location_scale(s.coefs, bs, eval_grid, robust=robust_flag)
        if robust_flag:
            cov = robust_coefficient_covariance(s, ls, gm, seed=seed + i, alpha_h=alpha_h)
        else:
            cov = classical_coefficient_covariance(s, ls, gm)
        cov_sum += cov
        mean_sum += ls.mean_coefs
        var_sum += ls.var_grid
    m = len(samples)
    b, eigval = _spectrum_from_cov(cov_sum / m, gm, p, K, n_cases=n)
    model = MfpcaModel(
        basis=bs,
        gram=gm,
        mean_coefs=mean_sum / m,
        var_grid=var_sum / m,
        eval_grid=np.asarray(eval_grid, dtype=float),
        eigvec_coefs=b,
        eigenvalues=eigval,
        n_retained=select_n_retained(eigval, variance_target),
        flavor=flavor,
        variance_target=float(variance_target),
        seed=seed,
    )
    return model


def scores(model: MfpcaModel, curves, n_components: int | None = None, observed=None):
    """Principal component scores xi_l = <psi_l, Z> of complete curves.

    `curves` is (p, K) or (n, p, K) raw (unstandardized) coefficients.
    """
    if observed is not None and not np.asarray(observed, dtype=bool).all():
        raise IncompleteObservationError("scores require complete observations")
    L = model.n_retained if n_components is None else int(n_components)
    if L > model.n_components_max:
        raise ValidationError(
            f"requested {L} components but only {model.n_components_max} available"
        )
    arr, single = _as_coef_array(curves, model.p, model.basis.n_basis)
    z = standardize(model, arr)
    flat = z.reshape(arr.shape[0], -1)
    xi = flat @ model._score_map()[:, :L]
    return xi[0] if single else xi


def scores_from_standardized(model: MfpcaModel, z_coefs, n_components: int | None = None):
    """Scores of already-standardized coefficient stacks."""
    L = model.n_retained if n_components is None else int(n_components)
    arr, single = _as_coef_array(z_coefs, model.p, model.basis.n_basis)
    xi = arr.reshape(arr.shape[0], -1) @ model._score_map()[:, :L]
    return xi[0] if single else xi


def reconstruct(model: MfpcaModel, score_vec) -> MultiCurve:
    """Curve implied by a score vector: x = mu + sqrt(v) * sum_l xi_l psi_l."""
    s = np.asarray(score_vec, dtype=float).ravel()
    if s.size > model.n_components_max:
        raise ValidationError("more scores than available components")
    z_flat = model.eigvec_coefs[:, : s.size] @ s
    z = z_flat.reshape(model.p, model.basis.n_basis)
    x = unstandardize(model, z)
    return MultiCurve(coefs=x, observed=np.ones(model.p, dtype=bool))


def residual_sq_norm(model: MfpcaModel, curves, n_components: int | None = None):
    """Squared H-norm of Z minus its projection on the leading eigenfunctions."""
    L = model.n_retained if n_components is None else int(n_components)
    arr, single = _as_coef_array(curves, model.p, model.basis.n_basis)
    z = standardize(model, arr)
    out = residual_sq_norm_standardized(model, z, L)
    return out[0] if single else out


def residual_sq_norm_standardized(model: MfpcaModel, z_coefs, n_components: int):
    """As `residual_sq_norm` but on standardized coefficients, batched."""
    arr, single = _as_coef_array(z_coefs, model.p, model.basis.n_basis)
    n = arr.shape[0]
    flat = arr.reshape(n, -1)
    xi = flat @ model._score_map()[:, :n_components]
    resid = flat - xi @ model.eigvec_coefs[:, :n_components].T
    rblocks = resid.reshape(n, model.p, -1)
    out = np.einsum("npk,kl,npl->n", rblocks, model.gram.W, rblocks)
    out = np.maximum(out, 0.0)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# serialization


def model_to_dict(model: MfpcaModel) -> dict:
    return {
        "basis": {
            "order": model.basis.order,
            "interior_knots": list(model.basis.interior_knots),
            "penalty_order": model.basis.penalty_order,
        },
        "W": model.gram.W.tolist(),
        "mu_hat": model.mean_coefs.tolist(),
        "v_hat": model.var_grid.tolist(),
        "eval_grid": model.eval_grid.tolist(),
        "B_hat": model.eigvec_coefs.tolist(),
        "lambda_hat": model.eigenvalues.tolist(),
        "L": model.n_retained,
        "flavor": model.flavor,
        "variance_target": model.variance_target,
        "seed": model.seed,
    }


def model_from_dict(doc: dict) -> MfpcaModel:
    bs = _basis.BasisSystem(
        order=int(doc["basis"]["order"]),
        interior_knots=tuple(doc["basis"]["interior_knots"]),
        penalty_order=int(doc["basis"].get("penalty_order", 2)),
    )
    gm = _basis.GramMatrix.from_w(np.asarray(doc["W"], dtype=float))
    return MfpcaModel(
        basis=bs,
        gram=gm,
        mean_coefs=np.asarray(doc["mu_hat"], dtype=float),
        var_grid=np.asarray(doc["v_hat"], dtype=float),
        eval_grid=np.asarray(doc["eval_grid"], dtype=float),
        eigvec_coefs=np.asarray(doc["B_hat"], dtype=float),
        eigenvalues=np.asarray(doc["lambda_hat"], dtype=float),
        n_retained=int(doc["L"]),
        flavor=str(doc["flavor"]),
        variance_target=float(doc.get("variance_target", DEFAULT_VARIANCE_TARGET)),
        seed=doc.get("seed"),
    )
