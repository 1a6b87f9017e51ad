from dataclasses import replace

import numpy as np
import pytest

from homoglab.core import (
    BoundarySpec,
    excess_decay_experiment,
    harmonic_sample,
    intrinsic_excess,
)
from homoglab.core.excess import (
    boundary_values,
    excess_curve,
    fixed_slope_excess,
    reference_matrix,
    trace_free_hessian,
)
from homoglab.core.growth import GrowthProfile, GrowthReport
from homoglab.errors import PreconditionError
from homoglab.lattice import DirichletBox, ScalarField


@pytest.fixture(scope="module")
def corrected_sample(checkerboard32, checkerboard32_correctors):
    box = DirichletBox.centered(checkerboard32.grid, (0, 0), 11)
    spec = BoundarySpec(kind="corrected", xi=(1.0, 0.0))
    return harmonic_sample(checkerboard32, box, spec, correctors=checkerboard32_correctors)


@pytest.fixture(scope="module")
def random_sample(checkerboard32, checkerboard32_correctors):
    box = DirichletBox.centered(checkerboard32.grid, (0, 0), 11)
    return harmonic_sample(checkerboard32, box, BoundarySpec(), seed=5, correctors=checkerboard32_correctors)


def test_affine_data_on_constant_medium_has_no_excess(constant_correctors64):
    medium = constant_correctors64.medium
    box = DirichletBox.centered(medium.grid, (0, 0), 9)
    sample = harmonic_sample(medium, box, BoundarySpec(kind="affine", xi=(0.3, -0.7)))
    value = intrinsic_excess(sample, constant_correctors64, (0, 0), 6.0)
    assert value.value <= 1e-12
    np.testing.assert_allclose(value.xi, (0.3, -0.7), atol=1e-7)
    assert not value.singular
    assert value.gram_constant == pytest.approx(1.0)


@pytest.mark.parametrize("r", [4.0, 8.0])
def test_corrected_affine_data_has_no_excess(corrected_sample, checkerboard32_correctors, r):
    value = intrinsic_excess(corrected_sample, checkerboard32_correctors, (0, 0), r)
    assert value.value <= 1e-12
    np.testing.assert_allclose(value.xi, (1.0, 0.0), atol=1e-6)


def test_excess_ignores_constants(random_sample, checkerboard32_correctors):
    moved = replace(random_sample, values=ScalarField(random_sample.values.grid, random_sample.values.values + 4.0))
    base = intrinsic_excess(random_sample, checkerboard32_correctors, (0, 0), 8.0)
    shifted = intrinsic_excess(moved, checkerboard32_correctors, (0, 0), 8.0)
    assert shifted.value == pytest.approx(base.value, rel=1e-8)
    np.testing.assert_allclose(shifted.xi, base.xi, atol=1e-10)


@pytest.mark.parametrize("k", [0, 1])
def test_adding_a_corrected_coordinate_moves_only_the_slope(random_sample, checkerboard32_correctors, k):
    box = random_sample.box
    extra = 0.5 * (box.local_coordinates[k] + checkerboard32_correctors.phi[k].values)
    moved = replace(
        random_sample,
        values=ScalarField(box.grid, random_sample.values.values + np.where(box.mask, extra, 0.0)),
    )
    base = intrinsic_excess(random_sample, checkerboard32_correctors, (0, 0), 8.0)
    shifted = intrinsic_excess(moved, checkerboard32_correctors, (0, 0), 8.0)
    assert shifted.value == pytest.approx(base.value, rel=1e-8, abs=1e-14)
    np.testing.assert_allclose(np.subtract(shifted.xi, base.xi), 0.5 * np.eye(2)[k], atol=1e-10)


def test_fixed_slope_never_beats_the_optimum(random_sample, checkerboard32_correctors):
    curve = excess_curve(random_sample, checkerboard32_correctors, (0, 0), [2, 4, 8], outer_radius=10)
    for optimal, fixed in zip(curve.excess, curve.excess_fixed):
        assert fixed >= optimal - 1e-12
    assert curve.excess_fixed[0] == pytest.approx(curve.excess[0])
    assert fixed_slope_excess(random_sample, checkerboard32_correctors, (0, 0), 4, curve.xi[0]) == curve.excess_fixed[1]
    assert [row["r"] for row in curve.rows()] == [2.0, 4.0, 8.0]


def test_samples_are_reproducible(checkerboard32, checkerboard32_correctors, random_sample):
    again = harmonic_sample(
        checkerboard32, random_sample.box, BoundarySpec(), seed=5, correctors=checkerboard32_correctors
    )
    assert np.array_equal(again.values.values, random_sample.values.values)


def test_ball_must_stay_inside_the_box(random_sample, checkerboard32_correctors):
    with pytest.raises(PreconditionError) as excinfo:
        intrinsic_excess(random_sample, checkerboard32_correctors, (0, 0), 11.0)
    assert excinfo.value.code == "BALL_OUTSIDE_DOMAIN"


def test_trace_free_hessian_is_harmonic_for_a_h():
    a_h = np.array([[0.6, 0.1], [0.1, 0.4]])
    M = trace_free_hessian(a_h, np.array([[1.0, 2.0], [0.0, -0.5]]))
    np.testing.assert_allclose(M, M.T)
    assert np.trace(a_h @ M) == pytest.approx(0.0, abs=1e-14)


def test_random_medium_needs_correctors(checkerboard32):
    with pytest.raises(PreconditionError) as excinfo:
        reference_matrix(checkerboard32)
    assert excinfo.value.code == "PRECONDITION_CORRECTORS"


def test_boundary_data_vanishes_outside_the_box(checkerboard32, checkerboard32_correctors):
    box = DirichletBox.centered(checkerboard32.grid, (0, 0), 5)
    data = boundary_values(checkerboard32, box, BoundarySpec(seed=3), checkerboard32_correctors)
    assert np.all(data.values[~box.mask] == 0.0)
    assert np.any(data.values[box.boundary_mask] != 0.0)


def test_quadratic_data_decays_linearly(constant_correctors64):
    report = excess_decay_experiment(
        constant_correctors64.medium,
        constant_correctors64,
        R=24,
        n_samples=3,
        seed=2,
        boundary=BoundarySpec(kind="polynomial", noise=0.0),
    )
    assert report.radii == (2.0, 4.0, 8.0, 16.0)
    assert len(report.curves) == 3 and not report.skipped
    assert report.median_slope >= 0.9
    aggregate = report.aggregate_rows()
    assert aggregate[-1]["sample_id"] == "median"
    assert len(report.rows()) == 3 * 4


def test_uncertified_growth_is_rejected(constant_correctors64):
    profile = GrowthProfile((0, 0), (2.0,), (1.0,), (1.0,), (1.0,))
    growth = GrowthReport(profile, None, None, 2.0, (), None, False)
    with pytest.raises(PreconditionError) as excinfo:
        excess_decay_experiment(constant_correctors64.medium, constant_correctors64, R=8, growth=growth)
    assert excinfo.value.code == "PRECONDITION_GROWTH"


def test_box_must_fit_the_torus(constant_correctors64):
    with pytest.raises(PreconditionError) as excinfo:
        excess_decay_experiment(constant_correctors64.medium, constant_correctors64, R=31, radii=[2, 4])
    assert excinfo.value.code == "PRECONDITION_GEOMETRY"


@pytest.mark.slow
def test_checkerboard_excess_decays(checkerboard256_correctors, checkerboard256_growth):
    correctors = checkerboard256_correctors
    growth = checkerboard256_growth[0]
    report = excess_decay_experiment(
        correctors.medium, correctors, R=64, n_samples=16, growth=growth, preconditioner="multigrid",
    )
    assert len(report.curves) == 16
    assert report.radii[0] >= growth.r_star and report.radii[-1] <= 64
    assert report.median_slope >= growth.alpha_fit - 0.2
    assert abs(report.median_slope_fixed - report.median_slope) <= 0.3
    assert report.max_slope_bound_constant <= 20.0
