"""Mixed second derivatives of the Green's function from dipole solves.

A dipole source g = e_j delta_y gives u = -D_{y,j} G(., y), hence
M_kj(x, y) = D_{x,k} D_{y,j} G(x, y) = -D_k^+ u(x). The same construction with
a_h gives H, and the corrected difference

    M_kj(x, y) - sum_il H_il(x, y) F_i(x)_k F_l(y)_j,    F_i = e_i + grad phi_i,

decays like |x - y|^-(d + alpha) up to a logarithm.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from ..core.correctors import CorrectorSet
from ..core.growth import GrowthReport
from ..lattice import Ball, DirichletBox, TorusGrid, grad
from ..media import Medium
from ..solvers import DEFAULT_TOL, SolveRequest, solve
from .reports import DecayReport, decay_report
from .sources import activation_radius, check_far_points, dipole, experiment_box, require_inside
from .theorem_t import homogenized_medium

logger = logging.getLogger(__name__)


def ball_sites(grid: TorusGrid, center: Sequence[int], radius: float) -> List[Tuple[int, ...]]:
    """Sites of B_radius(center) as wrapped tuples, in lexicographic order."""
    mask = Ball(grid, grid.wrap(center), radius).mask
    return [tuple(int(c) for c in site) for site in np.argwhere(mask)]


def dipole_gradients(
    medium: Medium,
    box: DirichletBox,
    sources: Sequence[Tuple[int, ...]],
    targets: Sequence[Tuple[int, ...]],
    tol: float = DEFAULT_TOL,
    n_jobs: int = 1,
    preconditioner: str = "jacobi",
    label: str = "dipole",
    progress: bool = False,
):
    """-D_k^+ u^(y, j)(x) for every source y, direction j and target x.

    Returns an array of shape (len(targets), len(sources), d, d) indexed
    [x, y, k, j], and the total iteration count.
    """
    grid = medium.grid
    d = grid.dim
    target_index = tuple(np.array(targets).T)

    def one(n: int, j: int):
        request = SolveRequest(
            medium=medium,
            rhs_g=dipole(grid, sources[n], j),
            domain=box,
            tol=tol,
            preconditioner=preconditioner,
            label=f"{label}_{n}_{j}",
        )
        u, report = solve(request)
        gu = grad(u).values
        return -np.stack([gu[k][target_index] for k in range(d)]), report.iterations

    jobs = [(n, j) for n in range(len(sources)) for j in range(d)]
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(one)(n, j) for n, j in tqdm(jobs, desc=label, disable=not progress)
    )
    out = np.zeros((len(targets), len(sources), d, d))
    iterations = 0
    for (n, j), (values, its) in zip(jobs, results):
        out[:, n, :, j] = values.T
        iterations += its
    return out, iterations


def corrected_difference(
    M: np.ndarray,
    H: np.ndarray,
    F_targets: np.ndarray,
    F_sources: np.ndarray,
) -> np.ndarray:
    """M - sum_il H_il F_i(x)_k F_l(y)_j, all arrays indexed [x, y, ...].

    F_targets has shape (n_x, d, d) indexed [x, i, k]; F_sources (n_y, d, d).
    """
    return M - np.einsum("xyil,xik,ylj->xykj", H, F_targets, F_sources)


def continuum_green(a_h: np.ndarray, z: np.ndarray) -> float:
    """Whole-space Green's function of -div(a_h grad) at z != 0, d = 2 or 3."""
    d = a_h.shape[0]
    B = np.linalg.inv(a_h)
    s = float(np.sqrt(z @ B @ z))
    root = float(np.sqrt(np.linalg.det(a_h)))
    if d == 2:
        return -np.log(s) / (2 * np.pi * root)
    return 1.0 / (4 * np.pi * root * s)


def continuum_hessian(a_h: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Closed-form Hessian of continuum_green at z."""
    d = a_h.shape[0]
    B = np.linalg.inv(a_h)
    Bz = B @ z
    s2 = float(z @ Bz)
    root = float(np.sqrt(np.linalg.det(a_h)))
    if d == 2:
        hess_log = B / s2 - 2.0 * np.outer(Bz, Bz) / s2 ** 2
        return -hess_log / (2 * np.pi * root)
    s = np.sqrt(s2)
    hess_inv = -B / s ** 3 + 3.0 * np.outer(Bz, Bz) / s ** 5
    return hess_inv / (4 * np.pi * root)


@dataclass(frozen=True)
class SymmetryCheck:
    target: Tuple[int, ...]
    max_difference: float
    scale: float

    @property
    def relative(self) -> float:
        return self.max_difference / self.scale if self.scale > 0 else self.max_difference


def symmetry_check(
    medium: Medium,
    box: DirichletBox,
    sources: Sequence[Tuple[int, ...]],
    x: Tuple[int, ...],
    M_at_x: np.ndarray,
    tol: float = DEFAULT_TOL,
    preconditioner: str = "jacobi",
) -> SymmetryCheck:
    """Compare M_kj(x, y) with M_jk(y, x) from dipole solves placed at x.

    M_at_x is indexed [y, k, j] for the fixed target x.
    """
    swapped, _ = dipole_gradients(medium, box, [x], sources, tol, 1, preconditioner, "symmetry")
    # swapped[y, 0, j, k] = M_jk(y, x)
    difference = M_at_x - np.swapaxes(swapped[:, 0], 1, 2)
    return SymmetryCheck(x, float(np.max(np.abs(difference))), float(np.max(np.abs(M_at_x))))


def corollary_C_experiment(
    a: Medium,
    correctors: CorrectorSet,
    growth: Sequence[GrowthReport],
    x0_list: Sequence[Sequence[int]],
    tol: float = DEFAULT_TOL,
    box_factor: float = 8.0,
    n_jobs: int = 1,
    preconditioner: str = "jacobi",
    symmetry: bool = True,
    continuum: bool = False,
    progress: bool = False,
) -> DecayReport:
    """Ball-averaged corrected difference per far point x0.

    Sources run over B_{r_star/2}(0) and targets over B_{r_star/2}(x0); both
    quenched and homogenized kernels come from the same discrete solver.

    Raises:
        PreconditionError: PRECONDITION_GROWTH, PRECONDITION_GEOMETRY
    """
    grid = correctors.grid
    r_star, alpha = activation_radius(growth)
    norms = check_far_points(x0_list, r_star)
    geometry = experiment_box(grid, max(norms), box_factor)
    origin = (0,) * grid.dim
    radius = r_star / 2.0
    require_inside(geometry.box, [Ball(grid, origin, radius + 1)])
    require_inside(geometry.box, [Ball(grid, grid.wrap(x0), radius + 1) for x0 in x0_list])

    sources = ball_sites(grid, origin, radius)
    target_sets = [ball_sites(grid, x0, radius) for x0 in x0_list]
    targets = [site for group in target_sets for site in group]

    M, its_a = dipole_gradients(a, geometry.box, sources, targets, tol, n_jobs, preconditioner, "green_a", progress)
    a_h = homogenized_medium(correctors)
    H, its_h = dipole_gradients(a_h, geometry.box, sources, targets, tol, n_jobs, preconditioner, "green_ah", progress)

    F = correctors.corrected_gradients()
    F_sources = np.stack([F[(slice(None), slice(None)) + y] for y in sources])
    F_targets = np.stack([F[(slice(None), slice(None)) + x] for x in targets])
    D = corrected_difference(M, H, F_targets, F_sources)

    errors = []
    start = 0
    for group in target_sets:
        block = D[start:start + len(group)]
        errors.append(float(np.sqrt(np.mean(np.sum(block ** 2, axis=(2, 3))))))
        start += len(group)

    metadata: Dict[str, object] = {
        "grid": (grid.dim, grid.side),
        "box_side": geometry.box.side,
        "box_requested": geometry.requested_side,
        "box_clipped": geometry.clipped,
        "sources": len(sources),
        "iterations": its_a + its_h,
    }
    if symmetry:
        x = grid.wrap(x0_list[0])
        column = targets.index(x)
        check = symmetry_check(a, geometry.box, sources, x, M[column], tol, preconditioner)
        metadata["symmetry_relative"] = check.relative
        logger.info("Green symmetry at %s: relative difference %.3e", x, check.relative)
    if continuum:
        far = int(np.argmax(norms))
        first = sum(len(group) for group in target_sets[:far])
        rows = range(first, first + len(target_sets[far]))
        metadata["continuum_mismatch"] = continuum_mismatch(grid, correctors.a_h, H, sources, targets, rows)

    report = decay_report("corC", norms, errors, r_star, grid.dim, alpha, metadata)
    if report.slope is not None:
        logger.info("corC slope %.3f (residual %.3f)", report.slope.slope, report.slope.residual)
    return report


def unwrap(grid: TorusGrid, site: Sequence[int]) -> np.ndarray:
    """Site coordinates shifted into [-L/2, L/2)."""
    half = grid.side // 2
    return np.mod(np.asarray(site, dtype=float) + half, grid.side) - half


def continuum_mismatch(
    grid: TorusGrid,
    a_h: np.ndarray,
    H: np.ndarray,
    sources: Sequence[Tuple[int, ...]],
    targets: Sequence[Tuple[int, ...]],
    rows: Sequence[int],
) -> float:
    """Relative L2 gap between H[rows] and -Hess G_h evaluated at edge midpoints."""
    d = grid.dim
    eye = np.eye(d)
    total, norm = 0.0, 0.0
    for n in rows:
        x = unwrap(grid, targets[n])
        for m, y in enumerate(sources):
            z = x - unwrap(grid, y)
            exact = np.array(
                [[-continuum_hessian(a_h, z + 0.5 * (eye[i] - eye[l]))[i, l] for l in range(d)] for i in range(d)]
            )
            total += float(np.sum((H[n, m] - exact) ** 2))
            norm += float(np.sum(exact ** 2))
    return float(np.sqrt(total / norm)) if norm > 0 else 0.0
