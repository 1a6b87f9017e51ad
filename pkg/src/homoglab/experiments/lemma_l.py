"""Interior energy of an a-harmonic ensemble against its bounded functionals.

Dictionary functions u_1..u_M are a-harmonic on B_{2R+1}; the ensemble is
u_1..u_N with equal weights. With K and K_half the gradient Gram matrices on
B_R and B_{R/2} and C the ensemble second moment in dictionary coordinates,

    lhs = tr(C K_half),   rhs = lambda_max(K^1/2 C K^1/2),

where rhs is the supremum of <|Fu|^2> over functionals on the dictionary span
with |Fu| <= (sum_{B_R} |grad u|^2)^1/2.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import eigh

from ..coefficients import philox, spawn_seeds
from ..errors import PreconditionError
from ..lattice import Ball, DirichletBox, grad
from ..media import Medium
from ..solvers import DEFAULT_TOL
from ..core.excess import BoundarySpec, harmonic_sample
from .reports import LemmaLReport

logger = logging.getLogger(__name__)

NULL_TOL = 1e-12


def gradient_gram(gradients: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """sum over the masked sites of grad u_m . grad u_n; gradients is (M, d, L, ..., L)."""
    flat = gradients[:, :, mask].reshape(gradients.shape[0], -1)
    return flat @ flat.T


def kernel_root(K: np.ndarray) -> Tuple[np.ndarray, int]:
    """K^1/2 on the range of K, dropping eigenvalues below NULL_TOL * max."""
    values, vectors = eigh(K)
    top = max(float(values[-1]), 0.0)
    keep = values > NULL_TOL * top
    root = (vectors[:, keep] * np.sqrt(values[keep])) @ vectors[:, keep].T
    return root, int(np.count_nonzero(~keep))


def ensemble_moment(M: int, N: int) -> np.ndarray:
    """Equal-weight second moment of the first N dictionary elements."""
    C = np.zeros((M, M))
    C[np.arange(N), np.arange(N)] = 1.0 / N
    return C


def lemma_ratio(K: np.ndarray, K_half: np.ndarray, C: np.ndarray) -> Tuple[float, float, int]:
    root, dropped = kernel_root(K)
    lhs = float(np.trace(C @ K_half))
    rhs = float(eigh(root @ C @ root, eigvals_only=True)[-1])
    return lhs, rhs, dropped


def brute_force_rhs(K: np.ndarray, C: np.ndarray, samples: int = 200_000, seed: int = 0) -> float:
    """max of f.C.f over sampled f = K^1/2 s with |s| = 1."""
    root, _ = kernel_root(K)
    s = philox(seed).standard_normal((samples, K.shape[0]))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    f = s @ root
    return float(np.max(np.einsum("nm,mk,nk->n", f, C, f)))


def dictionary_gradients(
    a: Medium,
    box: DirichletBox,
    M: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    boundary: Optional[BoundarySpec] = None,
    n_jobs: int = 1,
    preconditioner: str = "jacobi",
) -> np.ndarray:
    template = boundary if boundary is not None else BoundarySpec(kind="random", degree=1, noise=1.0)
    seeds = spawn_seeds(seed, M)
    samples = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(harmonic_sample)(a, box, template, tol, s, None, preconditioner) for s in seeds
    )
    return np.stack([grad(sample.values).values for sample in samples])


def lemma_L_check(
    a: Medium,
    R: int,
    N: int,
    M: int,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    center: Optional[Sequence[int]] = None,
    boundary: Optional[BoundarySpec] = None,
    n_jobs: int = 1,
    preconditioner: str = "jacobi",
) -> LemmaLReport:
    """Ratio of interior ensemble energy to the functional supremum.

    Raises:
        PreconditionError: PRECONDITION_GEOMETRY if M < N or the 2R box does not fit
    """
    grid = a.grid
    if N < 1 or M < N:
        raise PreconditionError("PRECONDITION_GEOMETRY", f"need 1 <= N <= M, got N={N}, M={M}")
    if R < 2 or 4 * R + 3 > grid.side:
        raise PreconditionError("PRECONDITION_GEOMETRY", f"box of half-width {2 * R + 1} does not fit L={grid.side}")
    center = grid.wrap(center if center is not None else (0,) * grid.dim)
    box = DirichletBox.centered(grid, center, 2 * R + 1)

    gradients = dictionary_gradients(a, box, M, seed, tol, boundary, n_jobs, preconditioner)
    K = gradient_gram(gradients, Ball(grid, center, R).mask)
    K_half = gradient_gram(gradients, Ball(grid, center, R / 2).mask)
    lhs, rhs, dropped = lemma_ratio(K, K_half, ensemble_moment(M, N))
    if dropped:
        logger.warning("lemma L: dropped %d near-null dictionary directions", dropped)
    ratio = lhs / rhs if rhs > 0 else float("inf")
    logger.info("lemma L R=%d N=%d M=%d: ratio %.4f", R, N, M, ratio)
    return LemmaLReport(R=R, N=N, M=M, lhs=lhs, rhs=rhs, ratio=ratio, regularized=dropped > 0, dropped=dropped)
