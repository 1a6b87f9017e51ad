from dataclasses import replace

import numpy as np
import pytest

from homoglab.core import build_corrector_set
from homoglab.core.growth import (
    GrowthProfile,
    certify,
    dyadic_radii,
    fit_alpha_rstar,
    growth_profile,
    growth_report,
    holds_from,
)
from homoglab.errors import PreconditionError
from homoglab.lattice import ScalarField

from .conftest import checkerboard

RADII = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0)


def synthetic(omega, radii=RADII):
    omega = tuple(float(w) for w in omega)
    return GrowthProfile((0, 0), tuple(radii), omega, (0.0,) * len(omega), omega)


def brute_force_rstar(profile, alpha):
    for r0 in profile.radii:
        if all(w <= (s / r0) ** (1 - alpha) for s, w in zip(profile.radii, profile.omega) if s >= r0):
            return r0
    return None


def test_dyadic_radii():
    assert dyadic_radii(64) == [2, 4, 8, 16]
    assert dyadic_radii(7) == []


def test_square_root_growth_fits_one_half():
    report = fit_alpha_rstar(synthetic([r ** 0.5 for r in RADII]))
    assert report.alpha_fit == pytest.approx(0.5, abs=1e-12)
    assert report.fit_window == RADII[1:-1]
    assert report.fit_residual == pytest.approx(0.0, abs=1e-12)


def test_alpha_is_scale_invariant():
    base = fit_alpha_rstar(synthetic([r ** 0.4 * (1 + 0.1 * np.sin(r)) for r in RADII]))
    scaled = fit_alpha_rstar(synthetic([5.0 * r ** 0.4 * (1 + 0.1 * np.sin(r)) for r in RADII]))
    assert scaled.alpha_fit == pytest.approx(base.alpha_fit, abs=1e-12)


def test_small_sublinear_growth_is_certified_from_the_first_radius():
    profile = synthetic([0.1 * r ** 0.3 for r in RADII])
    report = fit_alpha_rstar(profile, alpha_nominal=0.7)
    assert report.certified
    assert report.r_star == brute_force_rstar(profile, 0.7) == 2.0
    assert certify(report)


def test_large_prefactor_is_never_certified():
    profile = synthetic([2.0 * r ** 0.3 for r in RADII])
    report = fit_alpha_rstar(profile, alpha_nominal=0.7)
    assert not report.certified
    assert brute_force_rstar(profile, 0.7) is None
    assert report.r_star == RADII[-1]


def test_rstar_is_the_smallest_radius_from_which_the_bound_holds():
    profile = synthetic([3.0, 1.0, 1.2, 1.5, 1.8], radii=RADII[:5])
    report = fit_alpha_rstar(profile, alpha_nominal=0.7)
    assert report.certified
    assert report.r_star == 4.0 == brute_force_rstar(profile, 0.7)
    assert not holds_from(profile, 2.0, 0.7)


def test_too_few_positive_radii_without_nominal_exponent():
    report = fit_alpha_rstar(synthetic([0.0, 0.0, 0.5, 1.0, 0.0, 0.0]))
    assert not report.certified
    assert report.alpha_fit is None
    assert report.r_star == RADII[0]


def test_certify_rechecks_the_profile():
    profile = synthetic([0.1 * r ** 0.3 for r in RADII])
    report = fit_alpha_rstar(profile, alpha_nominal=0.7)
    tampered = replace(report, r_star=2.0, alpha_used=0.99, profile=synthetic([2.0] * 6))
    assert not certify(tampered)


def test_constant_medium_is_degenerate(constant_correctors64):
    report = growth_report(constant_correctors64, (0, 0))
    assert report.degenerate
    assert report.certified
    assert report.r_star == 2.0
    assert all(w == 0.0 for w in report.profile.omega)


def test_omega_ignores_additive_constants(checkerboard32_correctors):
    shifted = replace(
        checkerboard32_correctors,
        phi=tuple(ScalarField(p.grid, p.values + 3.0) for p in checkerboard32_correctors.phi),
    )
    base = growth_profile(checkerboard32_correctors, (5, 7))
    moved = growth_profile(shifted, (5, 7))
    np.testing.assert_allclose(moved.omega, base.omega, rtol=1e-10)


def test_checkerboard_growth_is_sublinear(checkerboard32_correctors):
    profile = growth_profile(checkerboard32_correctors, (0, 0))
    assert profile.radii == (2.0, 4.0, 8.0)
    assert profile.omega[-1] / 8.0 < profile.omega[0] / 2.0
    for w_phi, w_sigma, w in zip(profile.omega_phi, profile.omega_sigma, profile.omega):
        assert w ** 2 == pytest.approx(w_phi ** 2 + w_sigma ** 2)


def test_rows_carry_the_center(checkerboard32_correctors):
    rows = growth_report(checkerboard32_correctors, (3, 4), alpha_nominal=0.5).rows()
    assert [row["r"] for row in rows] == [2.0, 4.0, 8.0]
    assert rows[0]["center_x1"] == 3 and rows[0]["center_x2"] == 4


@pytest.mark.parametrize("radii", [[0.0], [9.0], []])
def test_radius_outside_range(checkerboard32_correctors, radii):
    with pytest.raises(PreconditionError) as excinfo:
        growth_profile(checkerboard32_correctors, (0, 0), radii)
    assert excinfo.value.code == "RADIUS_TOO_LARGE"


def omega_over_r_decreases(report, smallest=4.0, largest=64.0):
    pairs = [(r, w) for r, w in zip(report.profile.radii, report.profile.omega) if smallest <= r <= largest]
    ratios = np.array([w / r for r, w in pairs])
    return len(pairs) >= 2 and bool(np.all(np.diff(ratios) < 0))


@pytest.mark.slow
def test_large_checkerboard_growth_is_sublinear():
    decreasing = 0
    for seed in range(16):
        correctors = build_corrector_set(checkerboard(2, 256, seed=seed), preconditioner="multigrid")
        report = growth_report(correctors, (0, 0))
        decreasing += omega_over_r_decreases(report)
        assert report.alpha_fit is not None
        assert report.alpha_used == report.alpha_fit
        assert report.certified, f"seed {seed}"
        assert certify(report)
    assert decreasing >= 14


@pytest.mark.slow
def test_far_point_growth_is_certified_with_fitted_alpha(checkerboard256_growth):
    for report in checkerboard256_growth:
        assert report.alpha_used == report.alpha_fit
        assert certify(report)
        assert report.r_star <= 4.0
