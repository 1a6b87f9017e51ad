"""Random conductance medium: one conductance per lattice edge."""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ..errors import PreconditionError
from ..lattice import TorusGrid, VectorField, shift
from .base import Medium, difference_matrices


@dataclass(frozen=True, eq=False)
class CoefficientField(Medium):
    """Edge conductances a_e in [lam, 1]; value j at x sits on the edge (x, x+e_j)."""

    grid: TorusGrid
    conductance: np.ndarray
    lam: float
    kind: str = "custom"
    seed: Optional[int] = field(default=None)

    def __post_init__(self):
        values = np.array(self.conductance, dtype=float)
        expected = (self.grid.dim,) + self.grid.shape
        if values.shape != expected:
            raise PreconditionError("GRID_MISMATCH", f"conductance {values.shape} != {expected}")
        if not 0.0 < self.lam <= 1.0:
            raise PreconditionError("ELLIPTICITY_VIOLATION", f"lambda={self.lam} must lie in (0, 1]")
        low, high = float(values.min()), float(values.max())
        if low < self.lam or high > 1.0:
            raise PreconditionError(
                "ELLIPTICITY_VIOLATION",
                f"conductances span [{low}, {high}], outside [{self.lam}, 1]",
            )
        values.setflags(write=False)
        object.__setattr__(self, "conductance", values)

    def flux(self, gradient: np.ndarray) -> np.ndarray:
        return self.conductance * gradient

    @cached_property
    def _stiffness(self) -> sp.csr_matrix:
        total = sp.csr_matrix((self.grid.n_sites, self.grid.n_sites))
        for j, D in enumerate(difference_matrices(self.grid)):
            total = total + D.T @ sp.diags(self.conductance[j].ravel()) @ D
        return total.tocsr()

    def stiffness(self) -> sp.csr_matrix:
        return self._stiffness

    def as_vector_field(self) -> VectorField:
        return VectorField(self.grid, self.conductance)

    def shifted(self, z: Sequence[int]) -> "CoefficientField":
        """The medium x -> a(x + z)."""
        moved = shift(self.as_vector_field(), z)
        return CoefficientField(self.grid, moved.values, self.lam, self.kind, self.seed)

    def is_constant(self) -> bool:
        return all(np.all(self.conductance[j] == self.conductance[j].flat[0]) for j in range(self.grid.dim))
