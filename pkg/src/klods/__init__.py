"""KL-divergence based out-of-distribution detection on latent representations."""

from klods.baselines import NllSet, entropy_estimate, latent_typicality_score, tytest_score
from klods.decomposition import (
    DecompositionResult,
    SplitConfig,
    decompose_gaussian,
    estimate_dg_pooled,
    pooled_subvectors,
)
from klods.detector import (
    DetectorConfig,
    GroupVerdict,
    score_group,
    score_group_correlation_std,
    score_point,
)
from klods.diffeo import (
    AffineMap,
    CouplingMap,
    DensityModel,
    GaussianMixture,
    MCEstimate,
    PreservationReport,
    StandardizedProduct,
    mc_divergence,
    moment_matched,
    pushforward_logpdf,
    verify_preservation,
)
from klods.errors import (
    DegenerateDataError,
    DimensionMismatchError,
    DomainError,
    FormatError,
    InsufficientSamplesError,
    InvalidSplitError,
    KlodsError,
    NotPositiveDefiniteError,
    SchemaError,
)
from klods.evaluation import (
    DetectionReport,
    ExperimentConfig,
    SyntheticSource,
    aupr,
    auroc,
    make_groups,
    run_experiment,
)
from klods.gaussian import (
    CholeskyFactor,
    CorrelationStats,
    GaussianParams,
    PriorSpec,
    RepresentationSet,
    cholesky_factor,
    criterion_standard,
    denormalize,
    estimate_gaussian,
    kl_gaussians,
    normalize_against_prior,
    offdiag_correlation_stats,
)
from klods.io import load_matrix, load_prior, read_report, save_matrix, save_prior, write_report
from klods.lambertw import (
    BoundReport,
    evaluate_bound,
    lambert_w0,
    lambert_wm1,
    relaxed_triangle_bound,
    reverse_kl_lower_bound,
    reverse_kl_upper_bound,
)
from klods.manipulations import adjust_contrast, rescale_to_typical_set
from klods.normality import (
    NormalityResult,
    generalized_sw_multivariate,
    shapiro_wilk_univariate,
    subsample_for_test,
)
from klods.synthetic import DirectionConcentrated, Gaussian, Mixture, Scaled, UniformCube, generate

__version__ = "0.1.0"
