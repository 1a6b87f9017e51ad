"""Geometric multigrid V-cycle used as a CG preconditioner.

Coarse levels aggregate 2^d blocks of lattice sites (piecewise constant
prolongation P) and use the Galerkin operator P^T A P. Damped Jacobi smoothing
with equal pre- and post-sweeps keeps the cycle symmetric; the coarsest level
is inverted densely with a pseudo-inverse so the singular torus operator is
handled as well.
"""
import logging
from typing import List, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .base import Preconditioner

logger = logging.getLogger(__name__)


def aggregation(shape: Tuple[int, ...]) -> Tuple[sp.csr_matrix, Tuple[int, ...]]:
    """Prolongation from 2^d-block aggregates to the sites of `shape`."""
    coarse_shape = tuple((n + 1) // 2 for n in shape)
    fine = np.indices(shape).reshape(len(shape), -1)
    coarse = np.ravel_multi_index(tuple(fine // 2), coarse_shape)
    n_fine = fine.shape[1]
    P = sp.csr_matrix(
        (np.ones(n_fine), (np.arange(n_fine), coarse)),
        shape=(n_fine, int(np.prod(coarse_shape))),
    )
    return P, coarse_shape


class MultigridPreconditioner(Preconditioner):
    def __init__(self, smoothing_steps: int = 2, damping: float = 0.6, coarsest_size: int = 64):
        self.smoothing_steps = smoothing_steps
        self.damping = damping
        self.coarsest_size = coarsest_size

    def _hierarchy(self, matrix: sp.csr_matrix, shape: Tuple[int, ...]):
        operators: List[sp.csr_matrix] = [matrix.tocsr()]
        prolongations: List[sp.csr_matrix] = []
        while int(np.prod(shape)) > self.coarsest_size and min(shape) > 2:
            P, shape = aggregation(shape)
            prolongations.append(P)
            operators.append((P.T @ operators[-1] @ P).tocsr())
        coarsest = np.linalg.pinv(operators[-1].toarray(), hermitian=True)
        logger.debug("multigrid hierarchy with %d levels, coarsest %s", len(operators), shape)
        return operators, prolongations, coarsest

    def build(self, matrix: sp.csr_matrix, shape: Tuple[int, ...]) -> LinearOperator:
        operators, prolongations, coarsest = self._hierarchy(matrix, shape)
        inverse_diagonals = [1.0 / A.diagonal() for A in operators[:-1]]
        omega = self.damping
        steps = self.smoothing_steps

        def cycle(level: int, r: np.ndarray) -> np.ndarray:
            if level == len(operators) - 1:
                return coarsest @ r
            A = operators[level]
            dinv = inverse_diagonals[level]
            x = np.zeros_like(r)
            for _ in range(steps):
                x += omega * dinv * (r - A @ x)
            P = prolongations[level]
            x += P @ cycle(level + 1, P.T @ (r - A @ x))
            for _ in range(steps):
                x += omega * dinv * (r - A @ x)
            return x

        n = matrix.shape[0]
        return LinearOperator((n, n), matvec=lambda r: cycle(0, np.ravel(r).astype(float)), dtype=float)
