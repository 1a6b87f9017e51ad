"""Right-hand sides and geometry shared by the homogenization-error and Green experiments."""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..coefficients import philox
from ..core.correctors import CorrectorSet
from ..core.growth import GrowthReport
from ..errors import PreconditionError
from ..lattice import Ball, DirichletBox, TorusGrid, VectorField, forward_diff

logger = logging.getLogger(__name__)


class GSpec(BaseModel):
    """Random edge field on B_radius(origin), unit-normalized then scaled.

    `radius=None` means the activation radius r_star of the experiment.
    """

    model_config = ConfigDict(frozen=True)

    radius: Optional[float] = Field(default=None, gt=0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    scale: float = Field(default=1.0, gt=0)


def random_source(grid: TorusGrid, spec: GSpec, radius: float, center: Optional[Sequence[int]] = None) -> VectorField:
    """Gaussian values on the edges starting in B_radius(center), norm `spec.scale`."""
    center = tuple(center) if center is not None else (0,) * grid.dim
    mask = Ball(grid, center, radius).mask
    draws = philox(spec.seed).standard_normal((grid.dim,) + grid.shape)
    values = np.where(mask, draws, 0.0)
    values = values / np.linalg.norm(values)
    return VectorField(grid, values * spec.scale)


def dipole(grid: TorusGrid, site: Sequence[int], j: int) -> VectorField:
    """e_j on the single edge (site, site + e_j)."""
    values = np.zeros((grid.dim,) + grid.shape)
    values[(j,) + grid.wrap(site)] = 1.0
    return VectorField(grid, values)


def corrected_source(g: VectorField, correctors: CorrectorSet) -> VectorField:
    """Component k at x is sum_i g_i(x) (delta_ik + D_i^+ phi_k(x))."""
    d = g.grid.dim
    out = np.array(g.values)
    for k in range(d):
        for i in range(d):
            out[k] += g.values[i] * forward_diff(correctors.phi[k].values, i)
    return VectorField(g.grid, out)


def activation_radius(growth: Sequence[GrowthReport]) -> Tuple[float, float]:
    """Largest certified r_star over the given centers and the smallest exponent used.

    Raises:
        PreconditionError: PRECONDITION_GROWTH if a center is missing its certificate
    """
    if not growth:
        raise PreconditionError("PRECONDITION_GROWTH", "no growth certificate supplied")
    failed = [report.center for report in growth if not report.certified]
    if failed:
        raise PreconditionError("PRECONDITION_GROWTH", f"growth not certified at {failed}")
    r_star = max(report.r_star for report in growth)
    alphas = [report.alpha_used for report in growth if report.alpha_used is not None]
    return float(r_star), float(min(alphas)) if alphas else 1.0


def check_far_points(x0_list: Sequence[Sequence[int]], r_star: float) -> List[float]:
    """|x0| for each point; every one must satisfy |x0| >= 4 r_star."""
    if not x0_list:
        raise PreconditionError("PRECONDITION_GEOMETRY", "no far points given")
    norms = []
    for x0 in x0_list:
        norm = float(np.linalg.norm(np.asarray(x0, dtype=float)))
        if norm < 4 * r_star:
            raise PreconditionError(
                "PRECONDITION_GEOMETRY", f"x0={tuple(x0)} has |x0|={norm:.3f} < 4 r_star = {4 * r_star:.3f}"
            )
        norms.append(norm)
    return norms


@dataclass(frozen=True)
class ExperimentBox:
    box: DirichletBox
    requested_side: int
    clipped: bool


def experiment_box(grid: TorusGrid, far_norm: float, box_factor: float = 8.0) -> ExperimentBox:
    """Zero-Dirichlet box centred at the origin with side box_factor * max|x0|, clipped to L."""
    requested = int(np.ceil(box_factor * far_norm))
    half_width = min(requested // 2, (grid.side - 1) // 2)
    clipped = 2 * half_width + 1 < requested
    if clipped:
        logger.warning("box side %d clipped to %d by the torus", requested, 2 * half_width + 1)
    box = DirichletBox.centered(grid, (0,) * grid.dim, half_width)
    return ExperimentBox(box, requested, clipped)


def require_inside(box: DirichletBox, balls: Sequence[Ball]) -> None:
    for ball in balls:
        if not box.contains(ball):
            raise PreconditionError(
                "PRECONDITION_GEOMETRY", f"B_{ball.radius}({ball.center}) is not inside the Dirichlet box"
            )
