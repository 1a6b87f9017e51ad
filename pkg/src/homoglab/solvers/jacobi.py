"""Diagonal (Jacobi) preconditioner."""
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .base import Preconditioner


class JacobiPreconditioner(Preconditioner):
    def build(self, matrix: sp.csr_matrix, shape: Tuple[int, ...]) -> LinearOperator:
        inverse_diagonal = 1.0 / matrix.diagonal()
        n = matrix.shape[0]
        return LinearOperator((n, n), matvec=lambda r: inverse_diagonal * np.ravel(r), dtype=float)
