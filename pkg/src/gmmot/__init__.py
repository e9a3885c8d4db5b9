"""Optimal-transport distances, registrations and transfer maps between Gaussian mixtures."""

from .discrete_ot import (
    Coupling,
    SolverConfig,
    gw_objective,
    sinkhorn,
    solve_entropic_gw,
    solve_exact_ot,
    solve_gw,
)
from .distances import (
    METRICS,
    MixtureOtResult,
    Registration,
    annealed_init_P,
    component_w2_matrix,
    mew2,
    mgw2,
    mgw2_registration,
    mw2,
    pairwise_distance_matrix,
)
from .em import EmConfig, fit_em, fit_em_details
from .estimators import GmmDensity, MixtureTransport
from .exceptions import GmmOtError
from .gaussians import (
    AffineMap,
    EwGaussianSolution,
    Gaussian,
    bures_map_matrix,
    ew2_gaussian_closed_form,
    psd_sqrt,
    w2_gaussian_map,
    w2_gaussian_sq,
)
from .mixtures import (
    Gmm,
    density,
    gmm_from_dict,
    gmm_to_dict,
    load_gmm,
    mixture_cov,
    mixture_mean,
    sample,
    save_gmm,
    transform,
)
from .plans import MixturePlan, build_plan, distortion_score, match_points, t_mean
from .stiefel import project_stiefel

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "Coupling",
    "EmConfig",
    "EwGaussianSolution",
    "Gaussian",
    "Gmm",
    "GmmDensity",
    "GmmOtError",
    "METRICS",
    "MixtureOtResult",
    "MixturePlan",
    "MixtureTransport",
    "Registration",
    "SolverConfig",
    "annealed_init_P",
    "bures_map_matrix",
    "build_plan",
    "component_w2_matrix",
    "density",
    "distortion_score",
    "ew2_gaussian_closed_form",
    "fit_em",
    "fit_em_details",
    "gmm_from_dict",
    "gmm_to_dict",
    "gw_objective",
    "load_gmm",
    "match_points",
    "mew2",
    "mgw2",
    "mgw2_registration",
    "mixture_cov",
    "mixture_mean",
    "mw2",
    "pairwise_distance_matrix",
    "project_stiefel",
    "psd_sqrt",
    "sample",
    "save_gmm",
    "sinkhorn",
    "solve_entropic_gw",
    "solve_exact_ot",
    "solve_gw",
    "t_mean",
    "w2_gaussian_map",
    "w2_gaussian_sq",
]
