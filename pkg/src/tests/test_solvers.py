import numpy as np
import pytest

from homoglab.coefficients import make_constant
from homoglab.errors import PreconditionError, SolverError
from homoglab.lattice import DirichletBox, ScalarField, VectorField, grad
from homoglab.solvers import PreconditionerFactory, SolveRequest, apply_operator, listening, solve
from homoglab.solvers.multigrid import aggregation

from .conftest import checkerboard


def mean_zero_source(grid, rng):
    values = rng.standard_normal(grid.shape)
    return ScalarField(grid, values - values.mean())


@pytest.mark.parametrize("preconditioner", ["jacobi", "multigrid"])
def test_torus_solve_reaches_tolerance(preconditioner, rng):
    medium = checkerboard(2, 32, seed=1)
    f = mean_zero_source(medium.grid, rng)
    u, report = solve(SolveRequest(medium, rhs_f=f, tol=1e-10, preconditioner=preconditioner))
    assert report.converged
    assert report.relative_residual <= 1e-10
    assert abs(u.mean()) < 1e-12
    residual = apply_operator(medium, u).values - f.values
    assert np.linalg.norm(residual) <= 1e-9 * f.norm()


def test_preconditioners_agree(rng):
    medium = checkerboard(3, 8, seed=6)
    g = VectorField(medium.grid, rng.standard_normal((3,) + medium.grid.shape))
    u_jacobi, _ = solve(SolveRequest(medium, rhs_g=g, preconditioner="jacobi"))
    u_multigrid, _ = solve(SolveRequest(medium, rhs_g=g, preconditioner="multigrid"))
    np.testing.assert_allclose(u_jacobi.values, u_multigrid.values, atol=1e-8 * u_jacobi.norm())


def test_non_compatible_rhs(grid2, constant_medium):
    with pytest.raises(PreconditionError) as excinfo:
        solve(SolveRequest(constant_medium, rhs_f=ScalarField(grid2, np.ones(grid2.shape))))
    assert excinfo.value.code == "NON_COMPATIBLE_RHS"


def test_zero_rhs_gives_zero(constant_medium):
    u, report = solve(SolveRequest(constant_medium, rhs_f=ScalarField.zeros(constant_medium.grid)))
    assert np.all(u.values == 0.0)
    assert report.iterations == 0


def test_box_solve_reproduces_affine_data(grid2):
    medium = make_constant(grid2, (0.5, 0.75), 0.25)
    box = DirichletBox.centered(grid2, (8, 8), 5)
    y = box.local_coordinates
    boundary = ScalarField(grid2, 0.3 * y[0] - 1.2 * y[1] + 2.0)
    u, report = solve(SolveRequest(medium, domain=box, boundary_values=boundary, tol=1e-12))
    assert report.unknowns == 81
    np.testing.assert_allclose(u.values[box.mask], boundary.values[box.mask], atol=1e-8)
    assert np.all(u.values[~box.mask] == 0.0)


def test_max_iter_keeps_best_iterate(rng):
    medium = checkerboard(2, 32, seed=1)
    f = mean_zero_source(medium.grid, rng)
    with pytest.raises(SolverError) as excinfo:
        solve(SolveRequest(medium, rhs_f=f, max_iter=2))
    assert excinfo.value.code == "MAX_ITER_EXCEEDED"
    assert excinfo.value.solution is not None
    assert not excinfo.value.report.converged


def test_invalid_tolerance(constant_medium):
    with pytest.raises(PreconditionError) as excinfo:
        solve(SolveRequest(constant_medium, tol=0.0))
    assert excinfo.value.code == "INVALID_TOLERANCE"


def test_listeners_see_every_solve(constant_medium, rng):
    seen = []
    f = mean_zero_source(constant_medium.grid, rng)
    with listening(seen.append):
        solve(SolveRequest(constant_medium, rhs_f=f, label="first"))
        solve(SolveRequest(constant_medium, rhs_f=f, label="second"))
    solve(SolveRequest(constant_medium, rhs_f=f, label="third"))
    assert [report.label for report in seen] == ["first", "second"]


def test_unknown_preconditioner():
    with pytest.raises(ValueError, match="Unknown preconditioner"):
        PreconditionerFactory.create("ilu")


def test_aggregation_covers_every_site():
    P, coarse_shape = aggregation((5, 4))
    assert coarse_shape == (3, 2)
    np.testing.assert_array_equal(P.sum(axis=1).A1, 1.0)
    assert P.shape == (20, 6)


@pytest.mark.parametrize("box_half_width", [None, 10])
def test_energy_estimate(rng, box_half_width):
    medium = checkerboard(2, 32, seed=2)
    grid = medium.grid
    box = DirichletBox.centered(grid, (0, 0), box_half_width) if box_half_width is not None else None
    g = VectorField(grid, rng.standard_normal((2,) + grid.shape))
    u, report = solve(SolveRequest(medium, rhs_g=g, domain=box, tol=1e-12))
    assert report.converged
    gradient = grad(u)
    assert gradient.norm() <= g.norm() / medium.lam
    energy = np.sum(medium.flux(gradient.values) * gradient.values)
    assert energy == pytest.approx(-np.sum(g.values * gradient.values), rel=1e-8)
