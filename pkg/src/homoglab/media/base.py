"""Base class for the media an elliptic operator can be built from."""
from abc import ABC, abstractmethod
from typing import List

import numpy as np
import scipy.sparse as sp

from ..lattice import TorusGrid


def difference_matrices(grid: TorusGrid) -> List[sp.csr_matrix]:
    """Sparse forward differences D_j^+ on the flattened torus, one per direction."""
    index = np.arange(grid.n_sites).reshape(grid.shape)
    identity = sp.identity(grid.n_sites, format="csr")
    ones = np.ones(grid.n_sites)
    matrices = []
    for j in range(grid.dim):
        neighbour = np.roll(index, -1, axis=j).ravel()
        shift = sp.csr_matrix((ones, (np.arange(grid.n_sites), neighbour)), shape=(grid.n_sites,) * 2)
        matrices.append((shift - identity).tocsr())
    return matrices


class Medium(ABC):
    """Symmetric, uniformly elliptic medium on a torus grid."""

    grid: TorusGrid
    lam: float

    @abstractmethod
    def flux(self, gradient: np.ndarray) -> np.ndarray:
        """Map an edge gradient of shape (d, L, ..., L) to the edge flux a∇u."""
        pass

    @abstractmethod
    def stiffness(self) -> sp.csr_matrix:
        """Matrix of -div(a grad .) on the flattened torus."""
        pass

    def apply(self, values: np.ndarray) -> np.ndarray:
        """-div(a grad u) evaluated with the same stencils as lattice.grad/div."""
        gradient = np.stack([np.roll(values, -1, axis=j) - values for j in range(self.grid.dim)])
        flux = self.flux(gradient)
        out = np.zeros(self.grid.shape)
        for j in range(self.grid.dim):
            out -= flux[j] - np.roll(flux[j], 1, axis=j)
        return out
