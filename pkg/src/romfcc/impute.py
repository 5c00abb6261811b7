"""Sequential robust imputation of missing functional components.

A case with missing components is completed by minimizing its score
distance under a robust functional PCA fitted on the fully observed cases:
the minimizing coefficients have the closed form -C_mm^+ C_mo c_o, where C
is the Gram-weighted quadratic form of the score distance and the blocks
select missing/observed rows.  A multivariate normal residual, whose
covariance is robustly estimated from closed-form prediction residuals on
the complete cases, is added so repeated imputations do not understate
variability.  Incomplete cases are processed in order of increasing number
of missing components, each joining the complete set once imputed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import mfpca as _mfpca
from ._utils import derive_seed, seed_sequence
from .errors import (
    CannotInitializeError,
    InsufficientSampleError,
    ValidationError,
)
from .mfpca import FunctionalSample, MfpcaModel, MultiCurve
from .robpca import reweighted_mcd

#: variance fraction the imputation representation must capture
DEFAULT_VARIANCE_TARGET = 0.999

#: eigenvalues below this fraction of the leading one are dropped from C
_LAMBDA_DROP = 1e-10

#: coverage of the robust residual covariance
_RESIDUAL_ALPHA_H = 0.75


@dataclass(eq=False)
class ImputationModel:
    """Robust PCA of the complete cases plus the score-distance quadratic form."""

    base: MfpcaModel
    n_components: int
    C: np.ndarray                     # (p*K, p*K), symmetric PSD
    z_complete: np.ndarray            # (n_c, p, K) standardized complete cases
    residual_cov: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def K(self) -> int:
        return self.base.basis.n_basis


def _build_c(model: MfpcaModel, n_components: int) -> np.ndarray:
    lam = model.eigenvalues[:n_components]
    keep = lam >= _LAMBDA_DROP * max(lam[0], 1e-300)
    lam = lam[keep]
    bw = model._score_map()[:, :n_components][:, keep]  # W B, blockwise
    return (bw / lam) @ bw.T


def fit_imputation_model(
    complete: FunctionalSample,
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    seed: int = 0,
    flavor: str = "robust",
) -> ImputationModel:
    """Fit the model backing sequential imputation on fully observed cases."""
    if not complete.observed.all():
        raise ValidationError("fit_imputation_model expects complete cases only")
    model = _mfpca.fit_mfpca(
        complete, flavor=flavor, variance_target=variance_target, seed=seed
    )
    z = _mfpca.standardize(model, complete.coefs)
    return ImputationModel(
        base=model,
        n_components=model.n_retained,
        C=_build_c(model, model.n_retained),
        z_complete=z,
        seed=seed,
    )


def imputation_order(observed) -> np.ndarray:
    """Incomplete case indices sorted by missing count, ties by case index."""
    obs = np.asarray(observed, dtype=bool)
    if obs.ndim != 2:
        raise ValidationError("observed mask must be 2-d")
    if not obs.all(axis=1).any():
        raise CannotInitializeError("no complete cases to initialize imputation")
    missing_counts = (~obs).sum(axis=1)
    incomplete = np.nonzero(missing_counts > 0)[0]
    order = np.lexsort((incomplete, missing_counts[incomplete]))
    return incomplete[order]


def _pattern_rows(pattern: tuple, K: int) -> np.ndarray:
    return np.concatenate([np.arange(j * K, (j + 1) * K) for j in pattern])


def closed_form_fill(imodel: ImputationModel, z_obs_flat, pattern: tuple) -> np.ndarray:
    """Minimizer of the score distance over the missing coefficient block.

    z_obs_flat holds the standardized coefficients of the observed
    components (stacked in component order); returns the imputed
    standardized coefficients for the `pattern` components.
    """
    K = imodel.K
    rows_m = _pattern_rows(pattern, K)
    rows_o = _pattern_rows(tuple(j for j in range(imodel.p) if j not in pattern), K)
    C_mm = imodel.C[np.ix_(rows_m, rows_m)]
    C_mo = imodel.C[np.ix_(rows_m, rows_o)]
    return -np.linalg.pinv(C_mm, hermitian=True) @ (C_mo @ z_obs_flat)


def estimate_residual_cov(imodel: ImputationModel, pattern: tuple) -> np.ndarray | None:
    """Robust covariance of closed-form prediction residuals for a pattern.

    Every complete case has its `pattern` components predicted from the
    rest; the coefficient-space residuals are pooled and their covariance
    estimated by a reweighted MCD.  Returns None (with a warning) when the
    complete set is too small for the pattern's dimension.
    """
    pattern = tuple(sorted(pattern))
    if pattern in imodel.residual_cov:
        return imodel.residual_cov[pattern]
    K = imodel.K
    n_c = imodel.z_complete.shape[0]
    dim = len(pattern) * K
    if n_c < dim + 2:
        warnings.warn(
            f"complete set too small ({n_c}) to estimate a residual covariance "
            f"of dimension {dim}; falling back to deterministic imputation",
            RuntimeWarning,
            stacklevel=2,
        )
        imodel.residual_cov[pattern] = None
        return None
    rows_m = _pattern_rows(pattern, K)
    rows_o = _pattern_rows(tuple(j for j in range(imodel.p) if j not in pattern), K)
    z_flat = imodel.z_complete.reshape(n_c, -1)
    C_mm = imodel.C[np.ix_(rows_m, rows_m)]
    C_mo = imodel.C[np.ix_(rows_m, rows_o)]
    pred = -(np.linalg.pinv(C_mm, hermitian=True) @ (C_mo @ z_flat[:, rows_o].T)).T
    resid = z_flat[:, rows_m] - pred
    h = int(np.ceil(_RESIDUAL_ALPHA_H * n_c))
    _, cov, _ = reweighted_mcd(
        resid, h, seed=derive_seed(imodel.seed, "residual", *pattern), n_starts=150
    )
    imodel.residual_cov[pattern] = cov
    return cov


def _draw_residual(cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Multivariate normal draw via spectral factorization, eigenvalues floored at 0."""
    eigval, eigvec = np.linalg.eigh((cov + cov.T) / 2.0)
    root = np.sqrt(np.maximum(eigval, 0.0))
    return eigvec @ (root * rng.standard_normal(cov.shape[0]))


def impute_one(
    imodel: ImputationModel,
    curve: MultiCurve,
    rng: np.random.Generator | None = None,
) -> MultiCurve:
    """Complete a single curve; observed components pass through bit-exact.

    With `rng` None the stochastic residual is skipped (deterministic
    imputation); this is also the fallback when no residual covariance is
    available for the curve's missing pattern.
    """
    if curve.complete:
        return MultiCurve(curve.coefs.copy(), curve.observed.copy())
    if not curve.observed.any():
        raise ValidationError("cannot impute a curve with no observed components")
    p, K = imodel.p, imodel.K
    if curve.coefs.shape != (p, K):
        raise ValidationError("curve does not match the imputation model")
    pattern = tuple(np.nonzero(~curve.observed)[0].tolist())
    obs_idx = [j for j in range(p) if j not in pattern]

    z = _mfpca.standardize(imodel.base, curve.coefs)
    z_obs_flat = z[obs_idx].reshape(-1)
    z_m = closed_form_fill(imodel, z_obs_flat, pattern)
    if rng is not None:
        cov = estimate_residual_cov(imodel, pattern)
        if cov is not None:
            z_m = z_m + _draw_residual(cov, rng)
    z_full = z.copy()
    z_full[list(pattern)] = z_m.reshape(len(pattern), K)
    x_full = _mfpca.unstandardize(imodel.base, z_full)
    out = curve.coefs.copy()
    out[list(pattern)] = x_full[list(pattern)]
    return MultiCurve(out, np.ones(p, dtype=bool))


def impute_sample(
    sample: FunctionalSample,
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    seed: int = 0,
    rng: np.random.Generator | None = None,
    update_every: int | None = None,
    flavor: str = "robust",
    imodel: ImputationModel | None = None,
) -> FunctionalSample:
    """One sequential imputation pass over a sample with missing cells."""
    complete_mask = sample.complete_mask
    n_complete = int(complete_mask.sum())
    if n_complete < 10:
        raise InsufficientSampleError(
            f"imputation needs >= 10 complete cases, got {n_complete}"
        )
    order = (
        imputation_order(sample.observed)
        if not sample.observed.all()
        else np.empty(0, dtype=int)
    )
    coefs = sample.coefs.copy()
    observed = sample.observed.copy()
    s_c = list(np.nonzero(complete_mask)[0])
    if imodel is None:
        imodel = fit_imputation_model(
            sample.subset(np.asarray(s_c)), variance_target, seed=seed, flavor=flavor
        )
    added = 0
    for i in order:
        filled = impute_one(imodel, MultiCurve(coefs[i], observed[i]), rng=rng)
        coefs[i] = filled.coefs
        observed[i] = True
        s_c.append(i)
        added += 1
        if update_every is not None and added % update_every == 0:
            imodel = fit_imputation_model(
                FunctionalSample(
                    basis=sample.basis,
                    coefs=coefs[np.asarray(s_c)],
                    case_ids=sample.case_ids[np.asarray(s_c)],
                ),
                variance_target,
                seed=derive_seed(seed, "refresh", added),
                flavor=flavor,
            )
    return FunctionalSample(
        basis=sample.basis, coefs=coefs, observed=observed, case_ids=sample.case_ids
    )


def multiple_imputation(
    sample: FunctionalSample,
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    n_imputations: int = 5,
    seed: int = 0,
    update_every: int | None = None,
    flavor: str = "robust",
) -> list[FunctionalSample]:
    """Independent sequential passes with distinct residual draws.

    All passes share the same fitted imputation model (the complete set is
    identical); only the stochastic residuals differ, so the returned data
    sets agree on every originally observed cell.
    """
    if n_imputations < 1:
        raise ValidationError("n_imputations must be >= 1")
    streams = [np.random.default_rng(c) for c in seed_sequence(seed, "impute").spawn(n_imputations)]
    shared = None
    if update_every is None and not sample.observed.all():
        complete_idx = np.nonzero(sample.complete_mask)[0]
        if complete_idx.size >= 10:
            shared = fit_imputation_model(
                sample.subset(complete_idx), variance_target, seed=seed, flavor=flavor
            )
    return [
        impute_sample(
            sample,
            variance_target,
            seed=seed,
            rng=streams[m],
            update_every=update_every,
            flavor=flavor,
            imodel=shared,
        )
        for m in range(n_imputations)
    ]
