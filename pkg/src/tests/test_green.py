import numpy as np
import pytest

from homoglab.errors import PreconditionError
from homoglab.experiments import continuum_green, continuum_hessian, corollary_C_experiment
from homoglab.experiments.green import ball_sites, corrected_difference, unwrap

from .conftest import FAR_POINTS_256

A_H = {
    2: np.array([[0.6, 0.15], [0.15, 0.45]]),
    3: np.array([[0.6, 0.1, 0.0], [0.1, 0.5, 0.05], [0.0, 0.05, 0.7]]),
}


@pytest.mark.parametrize("z", [np.array([3.0, 1.5]), np.array([2.0, 1.0, 1.5])], ids=["2d", "3d"])
def test_continuum_hessian_matches_finite_differences(z):
    a_h = A_H[z.size]
    h = 1e-4
    eye = np.eye(z.size)
    numeric = np.array(
        [
            [
                (
                    continuum_green(a_h, z + h * (eye[i] + eye[j]))
                    - continuum_green(a_h, z + h * (eye[i] - eye[j]))
                    - continuum_green(a_h, z - h * (eye[i] - eye[j]))
                    + continuum_green(a_h, z - h * (eye[i] + eye[j]))
                )
                / (4 * h * h)
                for j in range(z.size)
            ]
            for i in range(z.size)
        ]
    )
    np.testing.assert_allclose(continuum_hessian(a_h, z), numeric, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("dim", [2, 3])
def test_continuum_green_is_a_h_harmonic(dim):
    a_h = A_H[dim]
    z = np.linspace(1.0, 2.0, dim)
    assert np.sum(a_h * continuum_hessian(a_h, z)) == pytest.approx(0.0, abs=1e-12)


def test_corrected_difference_with_identity_gradients():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((3, 2, 2, 2))
    H = rng.standard_normal((3, 2, 2, 2))
    F_targets = np.broadcast_to(np.eye(2), (3, 2, 2))
    F_sources = np.broadcast_to(np.eye(2), (2, 2, 2))
    np.testing.assert_allclose(corrected_difference(M, H, F_targets, F_sources), M - H)


def test_ball_sites_and_unwrap(grid2):
    sites = ball_sites(grid2, (0, 0), 1.0)
    assert sites == [(0, 0), (0, 1), (0, 15), (1, 0), (15, 0)]
    np.testing.assert_array_equal(unwrap(grid2, (15, 3)), [-1.0, 3.0])


def test_constant_medium_has_no_corrected_difference(constant_correctors64, certified_growth):
    x0_list = [(8, 0), (12, 0), (16, 0)]
    growth = [certified_growth((0, 0))] + [certified_growth(x0) for x0 in x0_list]
    report = corollary_C_experiment(
        constant_correctors64.medium, constant_correctors64, growth, x0_list, tol=1e-12, continuum=True
    )
    assert report.label == "corC"
    assert max(report.errors) <= 1e-7
    assert report.metadata["sources"] == 5
    assert report.metadata["symmetry_relative"] <= 1e-8
    assert 0.0 <= report.metadata["continuum_mismatch"] < 1.0


def test_green_function_is_symmetric(checkerboard32, checkerboard32_correctors, certified_growth):
    growth = [certified_growth((0, 0)), certified_growth((8, 0))]
    report = corollary_C_experiment(checkerboard32, checkerboard32_correctors, growth, [(8, 0)], tol=1e-12)
    assert report.metadata["symmetry_relative"] <= 1e-8
    assert report.errors[0] > 0


def test_far_point_inside_activation_region(checkerboard32, checkerboard32_correctors, certified_growth):
    growth = [certified_growth((0, 0), r_star=4.0), certified_growth((8, 0), r_star=4.0)]
    with pytest.raises(PreconditionError) as excinfo:
        corollary_C_experiment(checkerboard32, checkerboard32_correctors, growth, [(8, 0)])
    assert excinfo.value.code == "PRECONDITION_GEOMETRY"


@pytest.mark.slow
def test_corrected_difference_decays_like_the_error(
    checkerboard256_correctors, checkerboard256_growth, checkerboard256_decay
):
    correctors = checkerboard256_correctors
    report = corollary_C_experiment(
        correctors.medium, correctors, checkerboard256_growth, FAR_POINTS_256, tol=1e-12, preconditioner="multigrid",
    )
    assert report.abscissa == checkerboard256_decay.abscissa
    assert report.slope.slope <= -2.0
    assert abs(report.slope.slope - checkerboard256_decay.slope.slope) <= 0.3
    assert report.metadata["symmetry_relative"] <= 1e-8
