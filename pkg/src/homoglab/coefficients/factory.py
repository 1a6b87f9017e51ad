"""Factory for coefficient ensembles."""
from typing import Sequence

from ..lattice import TorusGrid
from ..media import CoefficientField
from .base import EnsembleSampler, EnsembleSpec, SeedSpec
from .ensembles import CheckerboardSampler, ConstantSampler, CorrelatedSampler, LayeredSampler


class SamplerFactory:
    """Factory for creating ensemble samplers."""

    @staticmethod
    def create(spec: EnsembleSpec) -> EnsembleSampler:
        """Create the sampler matching `spec.kind`.

        Args:
            spec: Ensemble specification

        Returns:
            EnsembleSampler: A sampler bound to the specification
        """
        samplers = {
            "constant": ConstantSampler,
            "layered": LayeredSampler,
            "checkerboard": CheckerboardSampler,
            "correlated": CorrelatedSampler,
        }

        if spec.kind not in samplers:
            raise ValueError(f"Unknown ensemble kind: {spec.kind}. Available kinds: {list(samplers.keys())}")

        return samplers[spec.kind](spec)


def sample(spec: EnsembleSpec, seed: SeedSpec, grid: TorusGrid) -> CoefficientField:
    """Draw one coefficient field; identical inputs give bitwise-identical fields."""
    return SamplerFactory.create(spec).sample(grid, seed)


def make_constant(grid: TorusGrid, diag: Sequence[float], lam: float) -> CoefficientField:
    """Constant medium with diag_j on every edge of direction j."""
    spec = EnsembleSpec(kind="constant", lam=lam, diag=tuple(float(v) for v in diag))
    return sample(spec, SeedSpec(seed=0), grid)
