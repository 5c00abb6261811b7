"""T2 / SPE profile monitoring: Phase I design and Phase II scoring.

Phase I turns a (possibly contaminated) historical sample into a
monitoring scheme: cellwise screening, robust imputation of the masked
cells, a pooled robust functional PCA over the imputed data sets, score
calibration on a held-out tuning set, and control limits for the two
charts.  The T2 chart watches the retained score space, the SPE chart the
orthogonal complement; the per-chart level is Sidak-corrected so the pair
controls the family-wise false alarm rate.  Phase II projects new complete
observations onto the fitted model and raises an alarm when either
statistic exceeds its limit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2, norm

from . import basis as _basis
from . import cellfilter as _cellfilter
from . import impute as _impute
from . import mfpca as _mfpca
from . import robust as _robust
from ._utils import derive_seed
from .cellfilter import FilterReport
from .dataio import CurveSet
from .errors import (
    IncompleteObservationError,
    InsufficientSampleError,
    NumericDegenerateError,
    ValidationError,
)
from .mfpca import FunctionalSample, MfpcaModel

_CONFIG_DEFAULTS = {
    "delta_fil": 0.999,
    "delta_imp": 0.999,
    "delta_mon": 0.7,
    "alpha": 0.05,
    "m_imputations": 5,
    "seed": 0,
    "flavor": "robust",
    "limits": "parametric",
    "n_basis": 10,
    "order": 4,
    "filter_alpha": 0.95,
}


@dataclass(frozen=True)
class PhaseIConfig:
    """Knobs of the Phase I pipeline (see module docstring)."""

    delta_fil: float = 0.999
    delta_imp: float = 0.999
    delta_mon: float = 0.7
    alpha: float = 0.05
    m_imputations: int = 5
    seed: int = 0
    flavor: str = "robust"
    limits: str = "parametric"
    n_basis: int = 10
    order: int = 4
    filter_alpha: float = 0.95

    def __post_init__(self):
        if self.flavor not in ("robust", "classical"):
            raise ValidationError("flavor must be 'robust' or 'classical'")
        if self.limits not in ("parametric", "empirical"):
            raise ValidationError("limits must be 'parametric' or 'empirical'")
        if not (0 < self.alpha <= 1):
            raise ValidationError("alpha must lie in (0, 1]")
        for name in ("delta_fil", "delta_imp", "delta_mon"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ValidationError(f"{name} must lie in (0, 1]")
        if self.m_imputations < 1:
            raise ValidationError("m_imputations must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "PhaseIConfig":
        unknown = set(doc) - set(_CONFIG_DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{**_CONFIG_DEFAULTS, **doc})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in _CONFIG_DEFAULTS}


@dataclass(eq=False)
class ScoreCalibration:
    """Tuning-set score distribution summary backing the control limits.

    lambda_mon holds the robust variances of the retained scores; theta the
    first three power sums of the residual score variances; h0 the exponent
    of the SPE limit formula.  theta[0] == 0 marks a disabled SPE chart.
    """

    lambda_mon: np.ndarray
    theta: tuple
    h0: float

    @property
    def spe_enabled(self) -> bool:
        return self.theta[0] > 0


@dataclass(eq=False)
class MonitoringScheme:
    """Phase I product: fitted model, calibration, and control limits."""

    model: MfpcaModel
    calibration: ScoreCalibration
    t2_limit: float
    spe_limit: float
    alpha: float
    alpha_star: float
    limits: str = "parametric"
    filter_report: FilterReport | None = field(default=None, repr=False)

    @property
    def n_retained(self) -> int:
        return self.calibration.lambda_mon.size


@dataclass(eq=False)
class MonitorResult:
    """Per-case Phase II statistics and alarm decisions."""

    case_ids: np.ndarray
    t2: np.ndarray
    spe: np.ndarray
    alarm: np.ndarray


def sidak_level(alpha: float, n_charts: int = 2) -> float:
    """Per-chart level alpha* with (1 - alpha*)^n_charts = 1 - alpha."""
    if not (0 < alpha <= 1):
        raise ValidationError("alpha must lie in (0, 1]")
    return 1.0 - (1.0 - alpha) ** (1.0 / n_charts)


def t2_limit(n_retained: int, alpha_star: float) -> float:
    """Chi-squared control limit for the T2 chart."""
    if n_retained < 1:
        raise ValidationError("need at least one retained component")
    if not (0 < alpha_star <= 1):
        raise ValidationError("alpha_star must lie in (0, 1]")
    return float(chi2.ppf(1.0 - alpha_star, n_retained))


def jackson_h0(theta) -> float:
    """Exponent h0 = 1 - 2*theta1*theta3 / (3*theta2^2) of the SPE limit."""
    t1, t2, t3 = (float(x) for x in theta)
    if t2 <= 0:
        raise NumericDegenerateError(f"theta2 must be positive, got {t2}")
    return 1.0 - 2.0 * t1 * t3 / (3.0 * t2**2)


def spe_limit(theta, h0: float, alpha_star: float) -> float:
    """Normal-approximation control limit for the SPE chart.

    CL = theta1 * [c*sqrt(2*theta2*h0^2)/theta1 + 1
                   + theta2*h0*(h0-1)/theta1^2]^(1/h0)
    with c the normal deviate cutting off upper-tail area alpha_star.
    """
    t1, t2, t3 = (float(x) for x in theta)
    if t1 <= 0:
        raise NumericDegenerateError("SPE chart disabled: theta1 must be positive")
    if not (0 < alpha_star <= 1):
        raise ValidationError("alpha_star must lie in (0, 1]")
    if alpha_star == 1.0:
        return 0.0
    c = norm.ppf(1.0 - alpha_star)
    bracket = c * np.sqrt(2.0 * t2 * h0**2) / t1 + 1.0 + t2 * h0 * (h0 - 1.0) / t1**2
    if bracket <= 0:
        raise NumericDegenerateError(
            f"SPE limit bracket nonpositive: theta={theta}, h0={h0}, "
            f"alpha_star={alpha_star}, bracket={bracket}"
        )
    return float(t1 * bracket ** (1.0 / h0))


def t2_statistic(scheme: MonitoringScheme, curves, observed=None):
    """T2 = sum_{l<=L} xi_l^2 / lambda_l under the calibrated score variances."""
    if observed is not None and not np.asarray(observed, dtype=bool).all():
        raise IncompleteObservationError("T2 requires complete observations")
    L = scheme.n_retained
    xi = _mfpca.scores(scheme.model, curves, n_components=L)
    lam = np.maximum(scheme.calibration.lambda_mon, 1e-300)
    return np.sum(np.atleast_2d(xi) ** 2 / lam, axis=1) if np.ndim(xi) > 1 else float(
        np.sum(xi**2 / lam)
    )


def spe_statistic(scheme: MonitoringScheme, curves, observed=None):
    """Squared H-norm of the part of Z orthogonal to the retained eigenfunctions."""
    if observed is not None and not np.asarray(observed, dtype=bool).all():
        raise IncompleteObservationError("SPE requires complete observations")
    out = _mfpca.residual_sq_norm(scheme.model, curves, n_components=scheme.n_retained)
    return out


def _tuning_score_variances(xi: np.ndarray, robust: bool) -> np.ndarray:
    """Per-direction variances of the tuning scores (nMAD^2 or sample variance)."""
    if robust:
        med = np.median(xi, axis=0)
        mad = _robust.MAD_SCALE * np.median(np.abs(xi - med), axis=0)
        return mad**2
    return xi.var(axis=0, ddof=1)


def _theta_sums(residual_variances: np.ndarray) -> tuple:
    lam = np.maximum(np.asarray(residual_variances, dtype=float), 0.0)
    return (float(lam.sum()), float((lam**2).sum()), float((lam**3).sum()))


def fit_phase1(
    training: CurveSet,
    tuning: CurveSet,
    config: PhaseIConfig | dict | None = None,
) -> MonitoringScheme:
    """Design a monitoring scheme from historical data.

    The robust flavor screens cellwise outliers, imputes the masked cells
    `m_imputations` times, fits one robust PCA per completed training set
    and pools them by averaging the coefficient-space covariances; the
    classical flavor skips screening and imputation entirely and uses
    sample moments throughout (the non-robust baseline).  The tuning set
    goes through the same screening/imputation treatment, is projected on
    the pooled model, and its score distribution fixes the calibrated
    variances, the residual power sums and the control limits.
    """
    if config is None:
        config = PhaseIConfig()
    elif isinstance(config, dict):
        config = PhaseIConfig.from_dict(config)
    if training.n_cases < 10 or tuning.n_cases < 10:
        raise InsufficientSampleError("training and tuning sets need >= 10 cases each")
    if training.n_components != tuning.n_components:
        raise ValidationError("training and tuning sets disagree on component count")
    if training.has_missing or tuning.has_missing:
        raise IncompleteObservationError("Phase I inputs must not contain NaN cells")

    bs = _basis.build_basis(config.order, config.n_basis)
    robust_flag = config.flavor == "robust"
    train = _mfpca.smooth_sample(training, bs)
    tune = _mfpca.smooth_sample(tuning, bs)

    report = None
    if robust_flag:
        filtered, report = _cellfilter.apply_filter(
            train,
            variance_target=config.delta_fil,
            alpha=config.filter_alpha,
            seed=derive_seed(config.seed, "filter-train"),
        )
        if filtered.n_cases < 10:
            raise InsufficientSampleError(
                "fewer than 10 training cases survived the cellwise filter"
            )
        imputed = _impute.multiple_imputation(
            filtered,
            variance_target=config.delta_imp,
            n_imputations=config.m_imputations,
            seed=derive_seed(config.seed, "impute-train"),
        )
        model = _mfpca.fit_mfpca_pooled(
            imputed,
            flavor="robust",
            variance_target=config.delta_mon,
            seed=derive_seed(config.seed, "mfpca"),
        )
        tune_filtered, _ = _cellfilter.apply_filter(
            tune,
            variance_target=config.delta_fil,
            alpha=config.filter_alpha,
            seed=derive_seed(config.seed, "filter-tune"),
        )
        tune_complete = _impute.impute_sample(
            tune_filtered,
            variance_target=config.delta_imp,
            seed=derive_seed(config.seed, "impute-tune"),
            rng=np.random.default_rng(derive_seed(config.seed, "impute-tune-draws")),
        )
    else:
        model = _mfpca.fit_mfpca(
            train,
            flavor="classical",
            variance_target=config.delta_mon,
            seed=derive_seed(config.seed, "mfpca"),
        )
        tune_complete = tune

    n_retained = model.n_retained
    xi_tune = _mfpca.scores(model, tune_complete.coefs, n_components=model.n_components_max)
    variances = _tuning_score_variances(xi_tune, robust=robust_flag)
    lambda_mon = np.maximum(variances[:n_retained], 1e-12 * max(variances.max(), 1e-300))
    theta = _theta_sums(variances[n_retained:])
    calibration = ScoreCalibration(
        lambda_mon=lambda_mon,
        theta=theta,
        h0=jackson_h0(theta) if theta[1] > 0 else 1.0,
    )

    alpha_star = sidak_level(config.alpha)
    scheme = MonitoringScheme(
        model=model,
        calibration=calibration,
        t2_limit=0.0,
        spe_limit=0.0,
        alpha=config.alpha,
        alpha_star=alpha_star,
        limits=config.limits,
        filter_report=report,
    )
    if config.limits == "parametric":
        scheme.t2_limit = t2_limit(n_retained, alpha_star) if alpha_star < 1 else 0.0
        if not calibration.spe_enabled:
            warnings.warn(
                "empty residual spectrum: SPE chart disabled", RuntimeWarning, stacklevel=2
            )
            scheme.spe_limit = np.inf
        else:
            scheme.spe_limit = spe_limit(theta, calibration.h0, alpha_star)
    else:
        t2_vals = t2_statistic(scheme, tune_complete.coefs)
        spe_vals = spe_statistic(scheme, tune_complete.coefs)
        scheme.t2_limit = float(np.quantile(t2_vals, 1.0 - alpha_star))
        scheme.spe_limit = float(np.quantile(spe_vals, 1.0 - alpha_star))
    if config.alpha == 1.0:
        scheme.t2_limit = 0.0
        scheme.spe_limit = 0.0
    return scheme


def monitor_batch(scheme: MonitoringScheme, batch: CurveSet) -> MonitorResult:
    """Phase II scoring: project, compute T2/SPE, raise alarms.

    Phase II observations are never filtered or imputed; inputs with
    missing cells are rejected.
    """
    if batch.has_missing:
        raise IncompleteObservationError(
            "Phase II observations must be complete (no NaN cells)"
        )
    if batch.n_components != scheme.model.p:
        raise ValidationError(
            f"batch has {batch.n_components} components, model expects {scheme.model.p}"
        )
    sample = _mfpca.smooth_sample(batch, scheme.model.basis)
    return monitor_sample(scheme, sample)


def monitor_sample(scheme: MonitoringScheme, sample: FunctionalSample) -> MonitorResult:
    """As `monitor_batch` for curves already represented on the model basis."""
    if not sample.observed.all():
        raise IncompleteObservationError("Phase II observations must be complete")
    t2 = np.atleast_1d(t2_statistic(scheme, sample.coefs))
    spe = np.atleast_1d(spe_statistic(scheme, sample.coefs))
    alarm = (t2 > scheme.t2_limit) | (spe > scheme.spe_limit)
    return MonitorResult(case_ids=sample.case_ids, t2=t2, spe=spe, alarm=alarm)


# ---------------------------------------------------------------------------
# serialization


def scheme_to_dict(scheme: MonitoringScheme) -> dict:
    return {
        "model": _mfpca.model_to_dict(scheme.model),
        "calibration": {
            "lambda_mon": scheme.calibration.lambda_mon.tolist(),
            "theta": list(scheme.calibration.theta),
            "h0": scheme.calibration.h0,
        },
        "t2_limit": scheme.t2_limit,
        "spe_limit": scheme.spe_limit if np.isfinite(scheme.spe_limit) else None,
        "alpha": scheme.alpha,
        "alpha_star": scheme.alpha_star,
        "limits": scheme.limits,
    }


def scheme_from_dict(doc: dict) -> MonitoringScheme:
    cal = ScoreCalibration(
        lambda_mon=np.asarray(doc["calibration"]["lambda_mon"], dtype=float),
        theta=tuple(doc["calibration"]["theta"]),
        h0=float(doc["calibration"]["h0"]),
    )
    spe_lim = doc["spe_limit"]
    return MonitoringScheme(
        model=_mfpca.model_from_dict(doc["model"]),
        calibration=cal,
        t2_limit=float(doc["t2_limit"]),
        spe_limit=np.inf if spe_lim is None else float(spe_lim),
        alpha=float(doc["alpha"]),
        alpha_star=float(doc["alpha_star"]),
        limits=str(doc["limits"]),
    )
