"""Sublinear growth of the corrector couple (phi, sigma).

omega(r) is the centered L2 deviation of (phi, sigma) over B_r(center). The
growth condition with exponent alpha and activation radius r_star reads

    omega(s) <= (s / r_star)^(1 - alpha)    for every listed s >= r_star.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import PreconditionError
from ..lattice import Ball, ball_l2_dev
from .correctors import CorrectorSet
from .fitting import fit_loglog

logger = logging.getLogger(__name__)

MIN_FIT_RADII = 4


def dyadic_radii(side: int, smallest: int = 2) -> List[int]:
    """Radii smallest, 2*smallest, ... up to L/4."""
    radii = []
    r = smallest
    while r <= side / 4:
        radii.append(r)
        r *= 2
    return radii


@dataclass(frozen=True)
class GrowthProfile:
    center: Tuple[int, ...]
    radii: Tuple[float, ...]
    omega_phi: Tuple[float, ...]
    omega_sigma: Tuple[float, ...]
    omega: Tuple[float, ...]


@dataclass(frozen=True)
class GrowthReport:
    profile: GrowthProfile
    alpha_fit: Optional[float]
    alpha_used: Optional[float]
    r_star: float
    fit_window: Tuple[float, ...]
    fit_residual: Optional[float]
    certified: bool
    degenerate: bool = False

    @property
    def center(self) -> Tuple[int, ...]:
        return self.profile.center

    def rows(self) -> List[Dict[str, float]]:
        rows = []
        for r, w_phi, w_sigma, w in zip(
            self.profile.radii, self.profile.omega_phi, self.profile.omega_sigma, self.profile.omega
        ):
            row: Dict[str, float] = {f"center_x{j + 1}": c for j, c in enumerate(self.center)}
            row.update(r=r, omega_phi=w_phi, omega_sigma=w_sigma, omega_total=w)
            rows.append(row)
        return rows


def growth_profile(
    correctors: CorrectorSet, center: Sequence[int], radii: Optional[Sequence[float]] = None
) -> GrowthProfile:
    """omega_phi, omega_sigma and omega of the stacked couple on each ball.

    Raises:
        PreconditionError: RADIUS_TOO_LARGE if a radius exceeds L/4
    """
    grid = correctors.grid
    if radii is None:
        radii = dyadic_radii(grid.side)
    radii = tuple(float(r) for r in sorted(radii))
    if not radii:
        raise PreconditionError("RADIUS_TOO_LARGE", f"no radius fits below L/4 = {grid.side / 4}")
    for r in radii:
        if r <= 0 or r > grid.side / 4:
            raise PreconditionError("RADIUS_TOO_LARGE", f"radius {r} outside (0, L/4 = {grid.side / 4}]")

    center = grid.wrap(center)
    phi = correctors.stacked_phi()
    sigma = correctors.stacked_sigma()
    omega_phi, omega_sigma, omega = [], [], []
    for r in radii:
        ball = Ball(grid, center, r)
        omega_phi.append(ball_l2_dev(phi, ball))
        omega_sigma.append(ball_l2_dev(sigma, ball))
        omega.append(ball_l2_dev(phi + sigma, ball))
    return GrowthProfile(center, radii, tuple(omega_phi), tuple(omega_sigma), tuple(omega))


def holds_from(profile: GrowthProfile, r0: float, alpha: float) -> bool:
    """Literal check of omega(s) <= (s / r0)^(1 - alpha) over listed s >= r0."""
    return all(
        w <= (s / r0) ** (1.0 - alpha) for s, w in zip(profile.radii, profile.omega) if s >= r0
    )


def fit_alpha_rstar(profile: GrowthProfile, alpha_nominal: Optional[float] = None) -> GrowthReport:
    """Fit alpha on the inner window and find the smallest certified r_star.

    The fit window drops the smallest and the largest radius. r_star is the
    smallest listed r0 from which the growth bound holds with alpha_nominal,
    or with alpha_fit when no nominal exponent is given.
    """
    radii = np.asarray(profile.radii)
    omega = np.asarray(profile.omega)
    smallest = float(radii[0])

    if np.all(omega == 0.0):
        logger.info("degenerate growth profile at %s: omega vanishes", profile.center)
        return GrowthReport(profile, None, alpha_nominal, smallest, (), None, True, degenerate=True)

    alpha_fit = None
    residual = None
    window: Tuple[float, ...] = ()
    if np.count_nonzero(omega > 0) >= MIN_FIT_RADII:
        window = tuple(float(r) for r in radii[1:-1])
        fit = fit_loglog(radii[1:-1], omega[1:-1])
        if fit is not None:
            alpha_fit = 1.0 - fit.slope
            residual = fit.residual

    alpha = alpha_nominal if alpha_nominal is not None else alpha_fit
    if alpha is None:
        logger.warning("too few positive radii at %s to fit alpha", profile.center)
        return GrowthReport(profile, None, None, smallest, window, residual, False)

    for r0 in profile.radii:
        if holds_from(profile, r0, alpha):
            return GrowthReport(profile, alpha_fit, alpha, float(r0), window, residual, True)

    logger.warning("growth bound with alpha=%.3f fails at every listed radius around %s", alpha, profile.center)
    return GrowthReport(profile, alpha_fit, alpha, float(radii[-1]), window, residual, False)


def certify(report: GrowthReport) -> bool:
    """Re-verify a report's certificate pointwise instead of trusting the flag."""
    if report.degenerate:
        return all(w == 0.0 for w in report.profile.omega)
    if report.alpha_used is None:
        return False
    return holds_from(report.profile, report.r_star, report.alpha_used)


def growth_report(
    correctors: CorrectorSet,
    center: Sequence[int],
    radii: Optional[Sequence[float]] = None,
    alpha_nominal: Optional[float] = None,
) -> GrowthReport:
    report = fit_alpha_rstar(growth_profile(correctors, center, radii), alpha_nominal)
    if report.certified and not certify(report):
        raise AssertionError(f"growth certificate at {report.center} does not re-verify")
    return report
