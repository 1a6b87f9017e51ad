"""Constant and linear flux invariants through cutoff shells.

For a cutoff eta that is 1 on B_r and 0 outside B_2r, with supp g inside the
plateau, the discrete forms

    I0(r)     = <a grad u, grad eta>
    Ik(r)     = <a grad u, grad(eta (x_k + phi_k))> - <a(e_k + grad phi_k), grad(eta u)>

vanish and equal -sum g~_k respectively, for every admissible r. The
homogenized side uses a_h, v and the affine coordinate x_k.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.correctors import CorrectorSet, corrected_gradient
from ..errors import PreconditionError
from ..lattice import Ball, DirichletBox, ScalarField, TorusGrid, VectorField, cutoff_eta, grad
from ..media import Medium
from .sources import corrected_source
from .theorem_t import homogenized_medium

logger = logging.getLogger(__name__)


def centered_coordinates(grid: TorusGrid, center: Sequence[int]) -> np.ndarray:
    """x - center unwrapped into [-L/2, L/2) per axis."""
    coords = grid.coordinates()
    offset = np.asarray(center, dtype=float).reshape((-1,) + (1,) * grid.dim)
    half = grid.side / 2.0
    return np.mod(coords - offset + half, grid.side) - half


def _flux_pairing(flux: np.ndarray, w: np.ndarray) -> float:
    gw = np.stack([np.roll(w, -1, axis=j) - w for j in range(w.ndim)])
    return float(np.sum(flux * gw))


@dataclass(frozen=True)
class InvariantRow:
    r: float
    k: int
    lhs: float
    rhs: float
    mismatch: float
    scale: float


@dataclass(frozen=True)
class InvariantsReport:
    rows: Tuple[InvariantRow, ...]
    support_radius: float

    def as_rows(self) -> List[Dict[str, float]]:
        return [
            {"r": row.r, "k": row.k, "lhs": row.lhs, "rhs": row.rhs, "mismatch": row.mismatch}
            for row in self.rows
        ]

    def constant(self) -> List[InvariantRow]:
        return [row for row in self.rows if row.k == 0]

    def linear(self, k: int) -> List[InvariantRow]:
        return [row for row in self.rows if row.k == k]

    def max_relative_mismatch(self) -> float:
        return max((row.mismatch / row.scale for row in self.rows if row.k > 0 and row.scale > 0), default=0.0)

    def max_constant_residual(self) -> float:
        return max((max(abs(row.lhs), abs(row.rhs)) / row.scale for row in self.constant() if row.scale > 0),
                   default=0.0)

    def r_spread(self) -> float:
        """Largest relative change of a linear invariant across radii."""
        spread = 0.0
        ks = sorted({row.k for row in self.rows if row.k > 0})
        for k in ks:
            values = np.array([row.lhs for row in self.linear(k)])
            scale = max(float(np.max(np.abs(values))), np.finfo(float).tiny)
            spread = max(spread, float(np.ptp(values)) / scale)
        return spread


def support_radius(g: VectorField, center: Sequence[int]) -> float:
    """Radius of the smallest centred ball holding every edge start of supp g."""
    distance = g.grid.distance_from(center)
    active = np.any(g.values != 0.0, axis=0)
    return float(distance[active].max()) if np.any(active) else 0.0


def invariants_check(
    a: Medium,
    correctors: CorrectorSet,
    u: ScalarField,
    v: ScalarField,
    g: VectorField,
    r_list: Sequence[float],
    center: Optional[Sequence[int]] = None,
    box: Optional[DirichletBox] = None,
) -> InvariantsReport:
    """Constant invariants (k = 0) and linear invariants (k = 1..d) per radius.

    Raises:
        PreconditionError: CUTOFF_TOO_LARGE from the cutoff, PRECONDITION_GEOMETRY
            when a plateau misses supp g or a shell leaves `box`
    """
    grid = a.grid
    center = grid.wrap(center if center is not None else (0,) * grid.dim)
    rho = support_radius(g, center)
    y = centered_coordinates(grid, center)
    a_h = homogenized_medium(correctors)
    g_tilde = corrected_source(g, correctors)
    flux_u = a.flux(grad(u).values)
    flux_v = a_h.flux(grad(v).values)

    rows: List[InvariantRow] = []
    for r in sorted(float(r) for r in r_list):
        eta = cutoff_eta(grid, center, r).values
        if 2 * r + 1 >= grid.side / 2:
            raise PreconditionError("CUTOFF_TOO_LARGE", f"shell of radius {2 * r} plus one edge reaches L/2")
        if r < rho + 1:
            raise PreconditionError(
                "PRECONDITION_GEOMETRY", f"plateau radius {r} does not cover supp g (radius {rho}) plus one"
            )
        if box is not None and not box.contains(Ball(grid, center, 2 * r + 1)):
            raise PreconditionError("PRECONDITION_GEOMETRY", f"shell of radius {2 * r} leaves the box")

        eta_scale = float(np.linalg.norm(grad(ScalarField(grid, eta)).values))
        i0 = _flux_pairing(flux_u, eta)
        i0_h = _flux_pairing(flux_v, eta)
        scale0 = max(float(np.linalg.norm(flux_u)), float(np.linalg.norm(flux_v))) * eta_scale
        rows.append(InvariantRow(r, 0, i0, i0_h, abs(i0 - i0_h), scale0))

        for k in range(grid.dim):
            coordinate = y[k] + correctors.phi[k].values
            lhs = _flux_pairing(flux_u, eta * coordinate) - _flux_pairing(
                a.flux(corrected_gradient(correctors.phi[k], k)), eta * u.values
            )
            unit = np.zeros((grid.dim,) + grid.shape)
            unit[k] = 1.0
            rhs = _flux_pairing(flux_v, eta * y[k]) - _flux_pairing(a_h.flux(unit), eta * v.values)
            scale = max(abs(lhs), abs(rhs), float(np.sum(np.abs(g_tilde.values[k]))), np.finfo(float).tiny)
            rows.append(InvariantRow(r, k + 1, lhs, rhs, abs(lhs - rhs), scale))

    report = InvariantsReport(tuple(rows), rho)
    logger.info(
        "invariants: constant residual %.3e, linear mismatch %.3e, r-spread %.3e",
        report.max_constant_residual(),
        report.max_relative_mismatch(),
        report.r_spread(),
    )
    return report
