"""Base classes for coefficient ensembles."""
from abc import ABC, abstractmethod
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import PreconditionError
from ..lattice import TorusGrid
from ..media import CoefficientField

EnsembleKind = Literal["constant", "layered", "checkerboard", "correlated"]


class SeedSpec(BaseModel):
    """Key of the counter-based stream; edge (x, j) reads counter j*L^d + lex(x)."""

    model_config = ConfigDict(frozen=True)

    seed: int = Field(ge=0, lt=2 ** 64)


class EnsembleSpec(BaseModel):
    """Statistical specification of a stationary coefficient ensemble.

    `values` holds the two conductances (low, high); `probability` is the
    chance of `high` on an edge for checkerboard and correlated fields.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    kind: EnsembleKind
    lam: float = Field(alias="lambda", gt=0.0, le=1.0)
    diag: Optional[Tuple[float, ...]] = None
    values: Tuple[float, float] = (1.0, 1.0)
    probability: float = Field(default=0.5, ge=0.0, le=1.0)
    period: int = Field(default=2, ge=2)
    correlation_range: int = Field(default=1, ge=0)

    @model_validator(mode="after")
    def _check_diag(self) -> "EnsembleSpec":
        if self.kind == "constant" and self.diag is not None and len(self.diag) not in (2, 3):
            raise ValueError("diag needs one entry per direction")
        return self

    def used_values(self, dim: int) -> Tuple[float, ...]:
        if self.kind == "constant":
            return tuple(self.diag) if self.diag is not None else (1.0,) * dim
        return tuple(self.values)


class EnsembleSampler(ABC):
    """Draws coefficient fields of one ensemble kind."""

    def __init__(self, spec: EnsembleSpec):
        self.spec = spec

    @abstractmethod
    def conductance(self, grid: TorusGrid, seed: SeedSpec) -> np.ndarray:
        """Edge conductances of shape (d, L, ..., L)."""
        pass

    def check(self, grid: TorusGrid) -> None:
        values = self.spec.used_values(grid.dim)
        bad = [v for v in values if not self.spec.lam <= v <= 1.0]
        if bad:
            raise PreconditionError(
                "ELLIPTICITY_VIOLATION", f"values {bad} outside [{self.spec.lam}, 1]"
            )

    def sample(self, grid: TorusGrid, seed: SeedSpec) -> CoefficientField:
        self.check(grid)
        return CoefficientField(
            grid, self.conductance(grid, seed), self.spec.lam, kind=self.spec.kind, seed=seed.seed
        )


def edge_uniforms(grid: TorusGrid, seed: SeedSpec) -> np.ndarray:
    """Uniforms in [0, 1) per edge, direction-major, from a Philox stream keyed by the seed."""
    generator = philox(seed.seed)
    return generator.random(grid.dim * grid.n_sites).reshape((grid.dim,) + grid.shape)


def spawn_seeds(seed: int, count: int) -> List[int]:
    """Independent 64-bit child seeds, stable in (seed, index)."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))
