"""Discrete geometry and calculus on the periodic lattice.

Sites of the torus (Z/LZ)^d are stored as numpy arrays of shape (L,)*d with
array axis j carrying coordinate direction e_{j+1}. A vector field stores one
value per site and direction; component j at x lives on the edge (x, x+e_j).

grad is the forward difference and div the backward difference, so
sum(u * div(F)) == -sum(grad(u) * F) holds exactly on the torus.
"""
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import PreconditionError


@dataclass(frozen=True)
class TorusGrid:
    """Periodic lattice with `side` sites per axis in `dim` dimensions."""

    dim: int
    side: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise PreconditionError("INVALID_GRID", f"dim must be 2 or 3, got {self.dim}")
        if self.side < 4:
            raise PreconditionError("INVALID_GRID", f"side must be >= 4, got {self.side}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.side,) * self.dim

    @property
    def n_sites(self) -> int:
        return self.side ** self.dim

    def coordinates(self) -> np.ndarray:
        """Site coordinates in {0..L-1}, shape (d, L, ..., L)."""
        return np.indices(self.shape, dtype=float)

    def wrap(self, site: Sequence[int]) -> Tuple[int, ...]:
        return tuple(int(s) % self.side for s in site)

    def distance_from(self, center: Sequence[float]) -> np.ndarray:
        """Euclidean periodic distance of every site to `center`."""
        if len(center) != self.dim:
            raise PreconditionError("GRID_MISMATCH", f"center {tuple(center)} is not {self.dim}-dimensional")
        squared = np.zeros(self.shape)
        for axis, c in enumerate(center):
            line = np.mod(np.arange(self.side, dtype=float) - float(c), self.side)
            line = np.minimum(line, self.side - line)
            view = [1] * self.dim
            view[axis] = self.side
            squared = squared + line.reshape(view) ** 2
        return np.sqrt(squared)


def _frozen(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != self.grid.shape:
            raise PreconditionError("GRID_MISMATCH", f"scalar values {values.shape} != grid {self.grid.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2)))

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        expected = (self.grid.dim,) + self.grid.shape
        if values.shape != expected:
            raise PreconditionError("GRID_MISMATCH", f"vector values {values.shape} != {expected}")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "VectorField":
        return cls(grid, np.zeros((grid.dim,) + grid.shape))

    def component(self, j: int) -> np.ndarray:
        return self.values[j]

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2)))


def skew_pairs(dim: int) -> List[Tuple[int, int]]:
    """Independent index pairs (j, k) with j < k, in storage order."""
    return list(combinations(range(dim), 2))


@dataclass(frozen=True, eq=False)
class SkewTensorField:
    """Skew tensor field stored through its d(d-1)/2 upper components."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        expected = (len(skew_pairs(self.grid.dim)),) + self.grid.shape
        if values.shape != expected:
            raise PreconditionError("GRID_MISMATCH", f"skew values {values.shape} != {expected}")
        object.__setattr__(self, "values", values)

    @property
    def pairs(self) -> List[Tuple[int, int]]:
        return skew_pairs(self.grid.dim)

    def component(self, j: int, k: int) -> np.ndarray:
        if j == k:
            return np.zeros(self.grid.shape)
        if j < k:
            return self.values[self.pairs.index((j, k))]
        return -self.values[self.pairs.index((k, j))]

    def full(self) -> np.ndarray:
        """Full tensor, shape (d, d, L, ..., L); sigma[k, j] == -sigma[j, k] exactly."""
        d = self.grid.dim
        out = np.zeros((d, d) + self.grid.shape)
        for idx, (j, k) in enumerate(self.pairs):
            out[j, k] = self.values[idx]
            out[k, j] = -self.values[idx]
        return out


Field = Union[ScalarField, VectorField, SkewTensorField]


@dataclass(frozen=True)
class Ball:
    """Sites within Euclidean periodic distance `radius` of `center`."""

    grid: TorusGrid
    center: Tuple[float, ...]
    radius: float

    @cached_property
    def mask(self) -> np.ndarray:
        return self.grid.distance_from(self.center) <= self.radius

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.mask))


@dataclass(frozen=True)
class DirichletBox:
    """Cube of `side` sites per axis starting at `corner`, wrapped on the torus.

    The outermost layer of the box carries boundary values; equations are
    posed on the interior sites only.
    """

    grid: TorusGrid
    corner: Tuple[int, ...]
    side: int

    def __post_init__(self):
        if len(self.corner) != self.grid.dim:
            raise PreconditionError("GRID_MISMATCH", f"corner {self.corner} is not {self.grid.dim}-dimensional")
        if not 3 <= self.side <= self.grid.side:
            raise PreconditionError(
                "PRECONDITION_GEOMETRY",
                f"box side {self.side} must lie in [3, {self.grid.side}]",
            )
        object.__setattr__(self, "corner", self.grid.wrap(self.corner))

    @classmethod
    def centered(cls, grid: TorusGrid, center: Sequence[int], half_width: int) -> "DirichletBox":
        corner = tuple(int(c) - half_width for c in center)
        return cls(grid, corner, 2 * half_width + 1)

    @property
    def center(self) -> Tuple[int, ...]:
        return self.grid.wrap(c + (self.side - 1) // 2 for c in self.corner)

    @cached_property
    def local_coordinates(self) -> np.ndarray:
        """(x - corner) mod L per axis; continuous across the whole box."""
        coords = self.grid.coordinates()
        corner = np.array(self.corner, dtype=float).reshape((-1,) + (1,) * self.grid.dim)
        return np.mod(coords - corner, self.grid.side)

    @cached_property
    def mask(self) -> np.ndarray:
        return np.all(self.local_coordinates < self.side, axis=0)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        local = self.local_coordinates
        return np.all((local >= 1) & (local <= self.side - 2), axis=0)

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.mask & ~self.interior_mask

    @property
    def interior_shape(self) -> Tuple[int, ...]:
        return (self.side - 2,) * self.grid.dim

    @cached_property
    def interior_index(self) -> np.ndarray:
        """Flat torus indices of the interior sites in local lexicographic order."""
        local = np.indices(self.interior_shape).reshape(self.grid.dim, -1) + 1
        sites = np.mod(local + np.array(self.corner).reshape(-1, 1), self.grid.side)
        return np.ravel_multi_index(tuple(sites), self.grid.shape)

    def contains(self, ball: Ball) -> bool:
        return bool(np.all(self.interior_mask[ball.mask]))


def forward_diff(values: np.ndarray, axis: int) -> np.ndarray:
    """f(x + e_axis) - f(x) on a periodic array whose leading axes are spatial."""
    return np.roll(values, -1, axis=axis) - values


def backward_diff(values: np.ndarray, axis: int) -> np.ndarray:
    """f(x) - f(x - e_axis) on a periodic array."""
    return values - np.roll(values, 1, axis=axis)


def grad(u: ScalarField) -> VectorField:
    return VectorField(u.grid, np.stack([forward_diff(u.values, j) for j in range(u.grid.dim)]))


def div(F: VectorField) -> ScalarField:
    total = np.zeros(F.grid.shape)
    for j in range(F.grid.dim):
        total += backward_diff(F.values[j], j)
    return ScalarField(F.grid, total)


def shift(field: Field, z: Sequence[int]) -> Field:
    """Return the field x -> field(x + z)."""
    d = field.grid.dim
    axes = tuple(range(field.values.ndim - d, field.values.ndim))
    moved = np.roll(field.values, tuple(-int(s) for s in z), axis=axes)
    return type(field)(field.grid, moved)


def _components(f: Union[Field, Sequence[Field]]) -> np.ndarray:
    if isinstance(f, ScalarField):
        return f.values[np.newaxis]
    if isinstance(f, (VectorField, SkewTensorField)):
        return f.values
    return np.concatenate([_components(item) for item in f], axis=0)


def _members(f, ball: Ball) -> np.ndarray:
    if ball.size == 0:
        raise PreconditionError(
            "EMPTY_BALL", f"ball of radius {ball.radius} around {ball.center} has no sites"
        )
    return _components(f)[:, ball.mask]


def ball_mean(f: Union[Field, Sequence[Field]], ball: Ball):
    """Componentwise mean over the ball; a float for scalar fields."""
    means = _members(f, ball).mean(axis=1)
    if isinstance(f, ScalarField):
        return float(means[0])
    return means


def ball_l2_dev(f: Union[Field, Sequence[Field]], ball: Ball) -> float:
    """(mean over B of |f - mean_B f|^2)^(1/2), summed over components."""
    members = _members(f, ball)
    centered = members - members.mean(axis=1, keepdims=True)
    return float(np.sqrt(np.mean(np.sum(centered ** 2, axis=0))))


def cutoff_eta(grid: TorusGrid, center: Sequence[float], r: float) -> ScalarField:
    """Cutoff equal to 1 on B_r(center), 0 outside B_2r, linear in distance between."""
    if r <= 0 or 2 * r >= grid.side / 2:
        raise PreconditionError(
            "CUTOFF_TOO_LARGE", f"cutoff radius {r} needs 0 < 2r < L/2 = {grid.side / 2}"
        )
    distance = grid.distance_from(center)
    return ScalarField(grid, np.clip(2.0 - distance / r, 0.0, 1.0))
