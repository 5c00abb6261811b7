"""Robust multivariate functional control charts.

A numpy/scipy library for profile monitoring of multivariate functional
data contaminated by cellwise and casewise outliers: B-spline curve
representation, robust functional location/scale, casewise-robust PCA,
a univariate cellwise filter, robust sequential imputation, T2/SPE
control charts with Sidak-corrected limits, a synthetic-profile
generator, and a Monte Carlo FAR/TDR study harness.
"""

__version__ = "0.1.0"

from .basis import (
    BasisSystem,
    GramMatrix,
    build_basis,
    eval_basis,
    gram,
    inner_product,
    norm_h,
    penalty_matrix,
    smooth_curve,
    smooth_curves,
    uniform_grid,
)
from .cellfilter import FilterReport, apply_filter, filter_distances, flag_proportion
from .dataio import CurveSet, read_curves, write_curves, write_labels
from .impute import (
    ImputationModel,
    estimate_residual_cov,
    fit_imputation_model,
    imputation_order,
    impute_one,
    impute_sample,
    multiple_imputation,
)
from .mfpca import (
    FunctionalSample,
    MfpcaModel,
    MultiCurve,
    fit_mfpca,
    fit_mfpca_pooled,
    reconstruct,
    residual_sq_norm,
    scores,
    smooth_sample,
    standardize,
    unstandardize,
)
from .monitor import (
    MonitoringScheme,
    MonitorResult,
    PhaseIConfig,
    ScoreCalibration,
    fit_phase1,
    jackson_h0,
    monitor_batch,
    monitor_sample,
    scheme_from_dict,
    scheme_to_dict,
    sidak_level,
    spe_limit,
    spe_statistic,
    t2_limit,
    t2_statistic,
)
from .robpca import RobpcaResult, fast_mcd, reweighted_mcd, robpca, univariate_mcd
from .robust import (
    LocationScale,
    estimate_location_scale,
    functional_m_mean,
    functional_mad_scale,
    median_mad,
)
from .simulate import (
    ContaminationLabels,
    EigenStructure,
    SimScenario,
    bessel_corr,
    build_eigenstructure,
    contam_e,
    contam_p,
    generate,
    mean_m,
    preset_names,
    scenario_preset,
    warp_h,
)
from .study import (
    METHOD_FLAVORS,
    PAPER_SCALE,
    StudyConfig,
    StudyResult,
    emit_plot_data,
    far_tdr,
    run_study,
)

__all__ = [name for name in dir() if not name.startswith("_")]
