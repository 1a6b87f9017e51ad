"""Two-scale error decay away from a localized right-hand side.

u solves -div(a grad u) = div g on a zero-Dirichlet box and v solves the
homogenized problem -div(a_h grad v) = div g~ with the corrected source g~.
Far from supp g the error e = grad u - D_i^+ v (e_i + grad phi_i) decays like
ln(|x0|/r_star) (|x0|/r_star)^-(d+alpha).
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..core.correctors import CorrectorSet
from ..core.growth import GrowthReport
from ..errors import PreconditionError
from ..lattice import Ball, DirichletBox, ScalarField, VectorField, forward_diff, grad
from ..media import ConstantMatrixMedium, Medium
from ..solvers import DEFAULT_TOL, SolveReport, SolveRequest, solve
from .reports import DecayReport, decay_report
from .sources import (
    GSpec,
    activation_radius,
    check_far_points,
    corrected_source,
    experiment_box,
    random_source,
    require_inside,
)

logger = logging.getLogger(__name__)


def homogenized_medium(correctors: CorrectorSet) -> ConstantMatrixMedium:
    return ConstantMatrixMedium(correctors.grid, correctors.a_h, correctors.medium.lam)


def corrected_homogenized_gradient(v: ScalarField, correctors: CorrectorSet) -> np.ndarray:
    """Component j at x is sum_i D_i^+ v(x) (delta_ij + D_j^+ phi_i(x))."""
    dv = grad(v).values
    return np.einsum("i...,ij...->j...", dv, correctors.corrected_gradients())


def homogenization_error(u: ScalarField, v: ScalarField, correctors: CorrectorSet) -> VectorField:
    """e = grad u - D_i^+ v (e_i + grad phi_i)."""
    return VectorField(u.grid, grad(u).values - corrected_homogenized_gradient(v, correctors))


def higher_order_term(v: ScalarField, correctors: CorrectorSet) -> VectorField:
    """Component j at x is sum_i phi_i(x + e_j) D_j^+ D_i^+ v(x)."""
    d = v.grid.dim
    dv = grad(v).values
    out = np.zeros((d,) + v.grid.shape)
    for j in range(d):
        for i in range(d):
            out[j] += np.roll(correctors.phi[i].values, -1, axis=j) * forward_diff(dv[i], j)
    return VectorField(v.grid, out)


def two_scale_error_field(u: ScalarField, v: ScalarField, correctors: CorrectorSet) -> VectorField:
    """grad w for w = u - (v + phi_i D_i^+ v), the unblended two-scale remainder.

    The discrete product rule places phi_i at the far end of each edge:
    grad w = e - higher_order_term(v), exactly.
    """
    w = u.values - v.values
    dv = grad(v).values
    for i in range(u.grid.dim):
        w = w - correctors.phi[i].values * dv[i]
    return grad(ScalarField(u.grid, w))


@dataclass(frozen=True, eq=False)
class TwoScaleSolution:
    g: VectorField
    u: ScalarField
    v: ScalarField
    box: DirichletBox
    reports: Tuple[SolveReport, SolveReport]


def solve_pair(
    a: Medium,
    correctors: CorrectorSet,
    g: VectorField,
    box: DirichletBox,
    tol: float = DEFAULT_TOL,
    preconditioner: str = "jacobi",
) -> TwoScaleSolution:
    """Quenched u and homogenized v on the same box with zero boundary values."""
    u, report_u = solve(
        SolveRequest(medium=a, rhs_g=g, domain=box, tol=tol, preconditioner=preconditioner, label="thmT_u")
    )
    v, report_v = solve(
        SolveRequest(
            medium=homogenized_medium(correctors),
            rhs_g=corrected_source(g, correctors),
            domain=box,
            tol=tol,
            preconditioner=preconditioner,
            label="thmT_v",
        )
    )
    return TwoScaleSolution(g, u, v, box, (report_u, report_v))


def ball_norm(field: VectorField, ball: Ball) -> float:
    return float(np.sqrt(np.sum(field.values[:, ball.mask] ** 2)))


def _far_errors(solution: TwoScaleSolution, correctors: CorrectorSet, x0_list, r_star: float):
    grid = correctors.grid
    g_norm = solution.g.norm()
    error = homogenization_error(solution.u, solution.v, correctors)
    remainder = two_scale_error_field(solution.u, solution.v, correctors)
    errors, two_scale = [], []
    for x0 in x0_list:
        ball = Ball(grid, grid.wrap(x0), r_star)
        errors.append(ball_norm(error, ball) / g_norm)
        two_scale.append(ball_norm(remainder, ball) / g_norm)
    return errors, two_scale


def run_theorem_T(
    a: Medium,
    correctors: CorrectorSet,
    growth: Sequence[GrowthReport],
    g_spec: Optional[GSpec],
    x0_list: Sequence[Sequence[int]],
    tol: float = DEFAULT_TOL,
    seed: Optional[int] = None,
    box_factor: float = 8.0,
    doubling_check: bool = False,
    preconditioner: str = "jacobi",
) -> Tuple[DecayReport, TwoScaleSolution]:
    """Error norms on B_{r_star}(x0), divided by |g|, for every far point x0.

    `growth` holds the certified reports at the origin and at the far points;
    r_star is the largest of them. `seed` overrides the seed of `g_spec`.

    Raises:
        PreconditionError: PRECONDITION_GROWTH, PRECONDITION_GEOMETRY
    """
    grid = correctors.grid
    r_star, alpha = activation_radius(growth)
    norms = check_far_points(x0_list, r_star)

    g_spec = g_spec if g_spec is not None else GSpec()
    if seed is not None:
        g_spec = g_spec.model_copy(update={"seed": seed})
    support = g_spec.radius if g_spec.radius is not None else r_star
    if support > r_star:
        raise PreconditionError(
            "PRECONDITION_GEOMETRY", f"support radius {support} of g exceeds r_star = {r_star}"
        )

    geometry = experiment_box(grid, max(norms), box_factor)
    origin = (0,) * grid.dim
    require_inside(geometry.box, [Ball(grid, origin, support + 1)])
    require_inside(geometry.box, [Ball(grid, grid.wrap(x0), r_star) for x0 in x0_list])

    g = random_source(grid, g_spec, support)
    solution = solve_pair(a, correctors, g, geometry.box, tol, preconditioner)
    errors, two_scale = _far_errors(solution, correctors, x0_list, r_star)
    metadata = {
        "grid": (grid.dim, grid.side),
        "seed": g_spec.seed,
        "box_side": geometry.box.side,
        "box_requested": geometry.requested_side,
        "box_clipped": geometry.clipped,
        "iterations": sum(r.iterations for r in solution.reports),
    }

    if doubling_check:
        doubled = experiment_box(grid, max(norms), 2 * box_factor)
        if doubled.box.side == geometry.box.side:
            logger.warning("box doubling has no room on L=%d", grid.side)
            metadata["doubling_change"] = None
        else:
            wide = solve_pair(a, correctors, g, doubled.box, tol, preconditioner)
            wide_errors, _ = _far_errors(wide, correctors, x0_list, r_star)
            metadata["doubling_change"] = float(
                max(abs(w - e) / max(e, np.finfo(float).tiny) for w, e in zip(wide_errors, errors))
            )
            metadata["iterations"] += sum(r.iterations for r in wide.reports)

    report = decay_report(
        "thmT", norms, errors, r_star, grid.dim, alpha, metadata, extra={"two_scale_l2": two_scale}
    )
    if report.slope is not None:
        logger.info("thmT slope %.3f (residual %.3f) vs -(d+alpha) = %.3f",
                    report.slope.slope, report.slope.residual, -(grid.dim + alpha))
    return report, solution


def theorem_T_experiment(
    a: Medium,
    correctors: CorrectorSet,
    growth: Sequence[GrowthReport],
    g_spec: Optional[GSpec],
    x0_list: Sequence[Sequence[int]],
    tol: float = DEFAULT_TOL,
    seed: Optional[int] = None,
    **options,
) -> DecayReport:
    """Decay report of run_theorem_T without the underlying solutions."""
    report, _ = run_theorem_T(a, correctors, growth, g_spec, x0_list, tol, seed, **options)
    return report
