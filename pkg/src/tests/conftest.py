"""Shared fixtures: small grids, media and corrector sets."""
from typing import Sequence

import numpy as np
import pytest

from homoglab.coefficients import EnsembleSpec, SeedSpec, make_constant, sample
from homoglab.core.correctors import build_corrector_set
from homoglab.core.growth import GrowthProfile, GrowthReport, growth_report
from homoglab.experiments import GSpec, theorem_T_experiment
from homoglab.lattice import TorusGrid

LAM = 0.25


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid2():
    return TorusGrid(2, 16)


@pytest.fixture
def grid3():
    return TorusGrid(3, 8)


@pytest.fixture
def constant_medium(grid2):
    return make_constant(grid2, (0.5, 0.75), LAM)


def checkerboard(dim: int, side: int, seed: int, lam: float = LAM):
    spec = EnsembleSpec(kind="checkerboard", lam=lam, values=(lam, 1.0), probability=0.5)
    return sample(spec, SeedSpec(seed=seed), TorusGrid(dim, side))


@pytest.fixture(scope="module")
def checkerboard32():
    return checkerboard(2, 32, seed=3)


@pytest.fixture(scope="module")
def checkerboard32_correctors(checkerboard32):
    return build_corrector_set(checkerboard32)


@pytest.fixture(scope="module")
def constant_correctors64():
    medium = make_constant(TorusGrid(2, 64), (0.5, 0.75), LAM)
    return build_corrector_set(medium)


@pytest.fixture
def certified_growth():
    """Factory for a certified growth report with a prescribed r_star."""

    def make(center: Sequence[int], r_star: float = 2.0, alpha: float = 0.5) -> GrowthReport:
        profile = GrowthProfile(tuple(center), (r_star,), (0.0,), (0.0,), (0.0,))
        return GrowthReport(profile, None, alpha, r_star, (), None, True)

    return make


# desk-scale medium shared by the slow acceptance tests
FAR_POINTS_256 = [(t, 0) for t in (16, 24, 32, 48, 64)]


@pytest.fixture(scope="session")
def checkerboard256_correctors():
    return build_corrector_set(checkerboard(2, 256, seed=0), preconditioner="multigrid")


@pytest.fixture(scope="session")
def checkerboard256_growth(checkerboard256_correctors):
    """Growth reports with the fitted alpha at the origin and at every far point."""
    centers = [(0, 0)] + FAR_POINTS_256
    reports = [growth_report(checkerboard256_correctors, center) for center in centers]
    assert all(report.certified for report in reports), [r.center for r in reports if not r.certified]
    return reports


@pytest.fixture(scope="session")
def checkerboard256_decay(checkerboard256_correctors, checkerboard256_growth):
    correctors = checkerboard256_correctors
    return theorem_T_experiment(
        correctors.medium, correctors, checkerboard256_growth, GSpec(seed=0), FAR_POINTS_256,
        preconditioner="multigrid",
    )
