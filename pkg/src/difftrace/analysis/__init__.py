from .manipulation import (
    RANK_CONVENTION,
    ManipulationResult,
    magnitude_ranks,
    rank_after_change,
    sign_test,
    timestep_manipulation,
    uninfluential_samples,
)
from .metrics import (
    MetricTable,
    method_rank_correlation,
    outlier_detection,
    rank_correlation_table,
    tracing_precision,
    uniqueness,
    uniqueness_table,
)
from .norms import (
    CorrelationResult,
    NormBin,
    NormPoint,
    NormProfile,
    bin_norm_profile,
    find_t_max,
    mid_training_checkpoint,
    norm_profiles,
    norm_ranks,
    norm_trend,
    norm_vs_timestep,
    probe_timesteps,
    spearman,
    timestep_norm_correlation,
)

__all__ = [
    "RANK_CONVENTION",
    "ManipulationResult",
    "magnitude_ranks",
    "rank_after_change",
    "sign_test",
    "timestep_manipulation",
    "uninfluential_samples",
    "MetricTable",
    "method_rank_correlation",
    "outlier_detection",
    "rank_correlation_table",
    "tracing_precision",
    "uniqueness",
    "uniqueness_table",
    "CorrelationResult",
    "NormBin",
    "NormPoint",
    "NormProfile",
    "bin_norm_profile",
    "find_t_max",
    "mid_training_checkpoint",
    "norm_profiles",
    "norm_ranks",
    "norm_trend",
    "norm_vs_timestep",
    "probe_timesteps",
    "spearman",
    "timestep_norm_correlation",
]
