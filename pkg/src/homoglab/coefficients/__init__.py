from .base import EnsembleSampler, EnsembleSpec, SeedSpec, edge_uniforms, philox, spawn_seeds
from .factory import SamplerFactory, make_constant, sample
from .io import dump_field, load_field

__all__ = [
    "EnsembleSampler",
    "EnsembleSpec",
    "SeedSpec",
    "SamplerFactory",
    "dump_field",
    "edge_uniforms",
    "load_field",
    "make_constant",
    "philox",
    "sample",
    "spawn_seeds",
]
