"""Constant full-matrix medium, used for the homogenized operator."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..errors import PreconditionError
from ..lattice import TorusGrid
from .base import Medium, difference_matrices

SYMMETRY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ConstantMatrixMedium(Medium):
    """-div(A grad u) with (A grad u)_j(x) = sum_k A_jk D_k^+ u(x).

    A is symmetrized on construction; asymmetry above SYMMETRY_TOL (relative)
    or eigenvalues outside [lam, 1] are rejected.
    """

    grid: TorusGrid
    matrix: np.ndarray
    lam: float

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        d = self.grid.dim
        if A.shape != (d, d):
            raise PreconditionError("GRID_MISMATCH", f"matrix shape {A.shape} != {(d, d)}")
        if np.max(np.abs(A - A.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(A))):
            raise PreconditionError("ELLIPTICITY_VIOLATION", "homogenized matrix is not symmetric")
        A = 0.5 * (A + A.T)
        eigenvalues = np.linalg.eigvalsh(A)
        if eigenvalues[0] < self.lam - SYMMETRY_TOL or eigenvalues[-1] > 1.0 + SYMMETRY_TOL:
            raise PreconditionError(
                "ELLIPTICITY_VIOLATION",
                f"eigenvalues {eigenvalues.tolist()} outside [{self.lam}, 1]",
            )
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    def flux(self, gradient: np.ndarray) -> np.ndarray:
        return np.tensordot(self.matrix, gradient, axes=(1, 0))

    @cached_property
    def _stiffness(self) -> sp.csr_matrix:
        D = difference_matrices(self.grid)
        total = sp.csr_matrix((self.grid.n_sites, self.grid.n_sites))
        for j in range(self.grid.dim):
            for k in range(self.grid.dim):
                if self.matrix[j, k] != 0.0:
                    total = total + self.matrix[j, k] * (D[j].T @ D[k])
        return total.tocsr()

    def stiffness(self) -> sp.csr_matrix:
        return self._stiffness
