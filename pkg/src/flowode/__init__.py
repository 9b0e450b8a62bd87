"""Flow ODE analysis over point-cloud measures with exact closed-form denoisers."""

from .denoiser import (
    DenoiserEval,
    PerturbedDenoiser,
    denoise,
    denoise_fn,
    denoise_smoothed,
    jacobian,
    perturbed_denoise_fn,
    posterior_entropy,
    posterior_log_weights,
    smoothed_denoise_fn,
)
from .diagnostics import (
    BoundCheck,
    RateFit,
    SimilarityTransform,
    convergence_slope,
    equivariance_residual,
    manifold_rate_check,
    memorization_run,
    posterior_nn_bound_check,
    smoothing_w2_estimate,
    subspace_residual,
    w2_to_dirac,
)
from .geometry import dist_conv_hull, in_shrunk_voronoi, point_stats, separation
from .integrate import (
    IntegrationError,
    Trajectory,
    integrate,
    save_trajectory_csv,
    to_t_space,
)
from .measure import (
    ClusterSpec,
    DiscreteMeasure,
    SmoothedMeasure,
    cluster_spec,
    diameter,
    gen_circle,
    gen_three_clusters,
    gen_two_point,
    load_measure_csv,
    philox_rng,
    save_measure_csv,
    summary,
)
from .schedule import Schedule, SigmaGrid, edm_grid, lambda_of_sigma, sigma_of_lambda
from .stages import (
    StageThresholds,
    cluster_denoiser_bound,
    hull_decay_bound,
    mean_bound,
    sigma_cluster,
    sigma_init,
    sigma_terminal,
    stage_report,
    stage_thresholds,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterSpec",
    "BoundCheck",
    "DenoiserEval",
    "DiscreteMeasure",
    "IntegrationError",
    "PerturbedDenoiser",
    "RateFit",
    "Schedule",
    "SigmaGrid",
    "SimilarityTransform",
    "SmoothedMeasure",
    "StageThresholds",
    "Trajectory",
    "cluster_denoiser_bound",
    "cluster_spec",
    "convergence_slope",
    "denoise",
    "denoise_fn",
    "denoise_smoothed",
    "diameter",
    "dist_conv_hull",
    "edm_grid",
    "equivariance_residual",
    "gen_circle",
    "gen_three_clusters",
    "gen_two_point",
    "hull_decay_bound",
    "in_shrunk_voronoi",
    "integrate",
    "jacobian",
    "lambda_of_sigma",
    "load_measure_csv",
    "manifold_rate_check",
    "mean_bound",
    "memorization_run",
    "perturbed_denoise_fn",
    "philox_rng",
    "point_stats",
    "posterior_entropy",
    "posterior_log_weights",
    "posterior_nn_bound_check",
    "save_measure_csv",
    "save_trajectory_csv",
    "separation",
    "sigma_cluster",
    "sigma_init",
    "sigma_of_lambda",
    "sigma_terminal",
    "smoothed_denoise_fn",
    "smoothing_w2_estimate",
    "stage_report",
    "stage_thresholds",
    "subspace_residual",
    "summary",
    "to_t_space",
    "w2_to_dirac",
    "__version__",
]
