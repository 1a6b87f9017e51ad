"""Base class for preconditioners of the lattice operators."""
from abc import ABC, abstractmethod
from typing import Tuple

import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator


class Preconditioner(ABC):
    """Builds an SPD approximate inverse for a stiffness matrix."""

    @abstractmethod
    def build(self, matrix: sp.csr_matrix, shape: Tuple[int, ...]) -> LinearOperator:
        """Return M ~ matrix^-1.

        Args:
            matrix: Stiffness matrix on the unknowns
            shape: Lattice shape of the unknowns in lexicographic order
        """
        pass
