import numpy as np
import pytest

from homoglab.coefficients import (
    EnsembleSpec,
    SamplerFactory,
    SeedSpec,
    dump_field,
    edge_uniforms,
    load_field,
    philox,
    sample,
    spawn_seeds,
)
from homoglab.errors import PreconditionError
from homoglab.lattice import TorusGrid


@pytest.mark.parametrize("kind", ["checkerboard", "correlated", "layered"])
def test_same_seed_gives_identical_fields(kind):
    grid = TorusGrid(2, 16)
    spec = EnsembleSpec(kind=kind, lam=0.25, values=(0.25, 1.0))
    first = sample(spec, SeedSpec(seed=7), grid)
    second = sample(spec, SeedSpec(seed=7), grid)
    assert np.array_equal(first.conductance, second.conductance)


def test_different_seeds_differ():
    grid = TorusGrid(2, 16)
    spec = EnsembleSpec(kind="checkerboard", lam=0.25, values=(0.25, 1.0))
    first = sample(spec, SeedSpec(seed=1), grid)
    second = sample(spec, SeedSpec(seed=2), grid)
    assert not np.array_equal(first.conductance, second.conductance)


def test_edge_uniforms_follow_the_philox_stream():
    grid = TorusGrid(3, 4)
    expected = philox(99).random(3 * 64).reshape((3, 4, 4, 4))
    assert np.array_equal(edge_uniforms(grid, SeedSpec(seed=99)), expected)


def test_checkerboard_takes_two_values_with_given_frequency():
    grid = TorusGrid(2, 64)
    spec = EnsembleSpec(kind="checkerboard", lam=0.25, values=(0.25, 1.0), probability=0.3)
    a = sample(spec, SeedSpec(seed=4), grid).conductance
    assert set(np.unique(a)) == {0.25, 1.0}
    assert np.mean(a == 1.0) == pytest.approx(0.3, abs=0.03)


def test_correlated_field_hits_requested_probability():
    grid = TorusGrid(2, 64)
    spec = EnsembleSpec(kind="correlated", lam=0.25, values=(0.25, 1.0), probability=0.5, correlation_range=1)
    a = sample(spec, SeedSpec(seed=8), grid).conductance
    assert np.mean(a == 1.0) == pytest.approx(0.5, abs=0.1)


def test_layered_depends_on_first_coordinate_only():
    grid = TorusGrid(2, 16)
    spec = EnsembleSpec(kind="layered", lam=0.25, values=(0.25, 1.0), period=4)
    a = sample(spec, SeedSpec(seed=3), grid).conductance
    for j in range(2):
        assert np.all(a[j] == a[j][:, :1])
    assert np.array_equal(a[0], a[1])
    assert np.mean(a == 1.0) == pytest.approx(0.5)


def test_layered_period_must_divide_side():
    spec = EnsembleSpec(kind="layered", lam=0.25, values=(0.25, 1.0), period=3)
    with pytest.raises(PreconditionError) as excinfo:
        sample(spec, SeedSpec(seed=0), TorusGrid(2, 16))
    assert excinfo.value.code == "INVALID_ENSEMBLE"


def test_values_below_lambda_are_rejected():
    spec = EnsembleSpec(kind="checkerboard", lam=0.25, values=(0.1, 1.0))
    with pytest.raises(PreconditionError) as excinfo:
        sample(spec, SeedSpec(seed=0), TorusGrid(2, 8))
    assert excinfo.value.code == "ELLIPTICITY_VIOLATION"


def test_unknown_kind():
    spec = EnsembleSpec.model_construct(kind="percolation", lam=0.5)
    with pytest.raises(ValueError, match="Unknown ensemble kind"):
        SamplerFactory.create(spec)


def test_spawned_seeds_are_stable_and_distinct():
    seeds = spawn_seeds(5, 4)
    assert seeds == spawn_seeds(5, 4)
    assert spawn_seeds(5, 2) == seeds[:2]
    assert len(set(seeds)) == 4


def test_dump_preserves_the_medium(tmp_path):
    medium = sample(
        EnsembleSpec(kind="checkerboard", lam=0.25, values=(0.25, 1.0)), SeedSpec(seed=12), TorusGrid(2, 8)
    )
    path = tmp_path / "a.txt"
    dump_field(medium, path)
    restored = load_field(path)
    assert restored.grid == medium.grid
    assert restored.lam == medium.lam
    assert restored.seed == 12
    assert np.array_equal(restored.conductance, medium.conductance)
