"""homoglab: numerical experiments for quantitative stochastic homogenization on lattices."""
from .errors import ConfigError, HomoglabError, PreconditionError, SolverError
from .lattice import Ball, DirichletBox, ScalarField, SkewTensorField, TorusGrid, VectorField

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "ConfigError",
    "DirichletBox",
    "HomoglabError",
    "PreconditionError",
    "ScalarField",
    "SkewTensorField",
    "SolverError",
    "TorusGrid",
    "VectorField",
]
