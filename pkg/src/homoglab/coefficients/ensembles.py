"""Concrete stationary ensembles on the torus."""
import numpy as np
from scipy.ndimage import uniform_filter
from scipy.stats import norm

from ..errors import PreconditionError
from ..lattice import TorusGrid
from .base import EnsembleSampler, SeedSpec, edge_uniforms


class ConstantSampler(EnsembleSampler):
    """Every edge in direction j carries diag_j."""

    def conductance(self, grid: TorusGrid, seed: SeedSpec) -> np.ndarray:
        diag = self.spec.used_values(grid.dim)
        if len(diag) != grid.dim:
            raise PreconditionError("GRID_MISMATCH", f"diag {diag} does not match dim {grid.dim}")
        out = np.empty((grid.dim,) + grid.shape)
        for j, value in enumerate(diag):
            out[j] = value
        return out


class LayeredSampler(EnsembleSampler):
    """Stripes orthogonal to e_1; the seed only picks the phase of the stripes."""

    def conductance(self, grid: TorusGrid, seed: SeedSpec) -> np.ndarray:
        period = self.spec.period
        if grid.side % period:
            raise PreconditionError("INVALID_ENSEMBLE", f"period {period} does not divide L={grid.side}")
        offset = int(edge_uniforms(grid, seed).flat[0] * period)
        layer = (np.arange(grid.side) + offset) % period
        low, high = self.spec.values
        profile = np.where(layer < period / 2, low, high)
        view = (grid.side,) + (1,) * (grid.dim - 1)
        return np.broadcast_to(profile.reshape(view), (grid.dim,) + grid.shape).copy()


class CheckerboardSampler(EnsembleSampler):
    """I.i.d. edges: high with the given probability, low otherwise."""

    def conductance(self, grid: TorusGrid, seed: SeedSpec) -> np.ndarray:
        low, high = self.spec.values
        return np.where(edge_uniforms(grid, seed) < self.spec.probability, high, low)


class CorrelatedSampler(EnsembleSampler):
    """Thresholded periodic moving average of i.i.d. Gaussians.

    Gaussians come from the inverse normal CDF of the edge uniforms so that the
    value on an edge stays a pure function of (seed, edge). The threshold makes
    P(high) equal the requested probability.
    """

    def conductance(self, grid: TorusGrid, seed: SeedSpec) -> np.ndarray:
        low, high = self.spec.values
        width = 2 * self.spec.correlation_range + 1
        window = width ** grid.dim
        gaussians = norm.ppf(edge_uniforms(grid, seed) + 2.0 ** -54)
        threshold = norm.ppf(1.0 - self.spec.probability) / np.sqrt(window)
        out = np.empty((grid.dim,) + grid.shape)
        for j in range(grid.dim):
            averaged = uniform_filter(gaussians[j], size=width, mode="wrap")
            out[j] = np.where(averaged > threshold, high, low)
        return out
