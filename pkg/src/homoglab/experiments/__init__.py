from .green import continuum_green, continuum_hessian, corollary_C_experiment
from .invariants import InvariantsReport, invariants_check
from .lemma_l import brute_force_rhs, lemma_L_check
from .reports import DecayReport, LemmaLReport
from .sources import GSpec
from .theorem_t import solve_pair, theorem_T_experiment, two_scale_error_field

__all__ = [
    "DecayReport",
    "GSpec",
    "InvariantsReport",
    "LemmaLReport",
    "brute_force_rhs",
    "continuum_green",
    "continuum_hessian",
    "corollary_C_experiment",
    "invariants_check",
    "lemma_L_check",
    "solve_pair",
    "theorem_T_experiment",
    "two_scale_error_field",
]
