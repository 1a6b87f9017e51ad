from .correctors import (
    CorrectorSet,
    build_corrector_set,
    corrector_phi,
    flux_corrector_sigma,
    flux_q,
    homogenized_matrix,
)
from .excess import BoundarySpec, excess_decay_experiment, harmonic_sample, intrinsic_excess
from .growth import GrowthReport, fit_alpha_rstar, growth_profile, growth_report

__all__ = [
    "BoundarySpec",
    "CorrectorSet",
    "GrowthReport",
    "build_corrector_set",
    "corrector_phi",
    "excess_decay_experiment",
    "fit_alpha_rstar",
    "flux_corrector_sigma",
    "flux_q",
    "growth_profile",
    "growth_report",
    "harmonic_sample",
    "homogenized_matrix",
    "intrinsic_excess",
]
