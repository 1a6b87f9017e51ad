import numpy as np
import pytest

from homoglab.errors import PreconditionError
from homoglab.experiments import brute_force_rhs, lemma_L_check
from homoglab.experiments.lemma_l import (
    dictionary_gradients,
    ensemble_moment,
    gradient_gram,
    kernel_root,
    lemma_ratio,
)
from homoglab.lattice import Ball, DirichletBox

from .conftest import checkerboard


def test_single_element_ensemble_never_exceeds_one(checkerboard32):
    report = lemma_L_check(checkerboard32, R=4, N=1, M=4, seed=3)
    assert 0.0 < report.ratio <= 1.0 + 1e-12
    assert report.row() == {"R": 4, "N": 1, "lhs": report.lhs, "rhs": report.rhs, "ratio": report.ratio}


def test_brute_force_supremum_agrees(checkerboard32):
    grid = checkerboard32.grid
    box = DirichletBox.centered(grid, (0, 0), 9)
    gradients = dictionary_gradients(checkerboard32, box, 3, seed=1)
    K = gradient_gram(gradients, Ball(grid, (0, 0), 4.0).mask)
    K_half = gradient_gram(gradients, Ball(grid, (0, 0), 2.0).mask)
    C = ensemble_moment(3, 3)
    lhs, rhs, dropped = lemma_ratio(K, K_half, C)
    assert dropped == 0
    assert lhs <= np.trace(C @ K) + 1e-12
    sampled = brute_force_rhs(K, C, samples=200_000, seed=2)
    assert sampled <= rhs * (1 + 1e-12)
    assert sampled == pytest.approx(rhs, rel=0.01)


def test_kernel_root_drops_null_directions():
    root, dropped = kernel_root(np.diag([4.0, 0.0]))
    assert dropped == 1
    np.testing.assert_allclose(root, np.diag([2.0, 0.0]))


def test_ensemble_moment_weights():
    C = ensemble_moment(4, 2)
    np.testing.assert_array_equal(np.diag(C), [0.5, 0.5, 0.0, 0.0])


@pytest.mark.parametrize("R, N, M", [(4, 3, 2), (4, 0, 2), (8, 1, 1), (1, 1, 1)])
def test_geometry_preconditions(checkerboard32, R, N, M):
    with pytest.raises(PreconditionError) as excinfo:
        lemma_L_check(checkerboard32, R=R, N=N, M=M)
    assert excinfo.value.code == "PRECONDITION_GEOMETRY"


def test_reproducible_for_a_seed(checkerboard32):
    first = lemma_L_check(checkerboard32, R=4, N=2, M=3, seed=7)
    second = lemma_L_check(checkerboard32, R=4, N=2, M=3, seed=7)
    assert first == second


@pytest.mark.slow
def test_ratio_stays_bounded_as_r_grows():
    medium = checkerboard(2, 136, seed=0)
    reports = [lemma_L_check(medium, R=R, N=32, M=32, preconditioner="multigrid") for R in (8, 16, 32)]
    ratios = [report.ratio for report in reports]
    assert max(ratios) <= 10.0
    for smaller, larger in zip(ratios, ratios[1:]):
        assert larger <= 2.0 * smaller
