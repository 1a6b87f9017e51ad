"""a-harmonic samples on Dirichlet boxes and their intrinsic excess.

The excess of u on B_r is

    inf over xi of  mean_{B_r} |grad u - sum_i xi_i (e_i + grad phi_i)|^2,

a d-dimensional least-squares problem in the corrected gradients.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from ..coefficients import philox, spawn_seeds
from ..errors import HomoglabError, PreconditionError
from ..lattice import Ball, DirichletBox, ScalarField, grad
from ..media import CoefficientField, ConstantMatrixMedium, Medium
from ..solvers import DEFAULT_TOL, SolveReport, SolveRequest, solve
from .correctors import CorrectorSet
from .fitting import SlopeFit, fit_loglog
from .growth import GrowthReport

logger = logging.getLogger(__name__)

SINGULAR_TOL = 1e-12
MONOTONE_SLACK = 1e-12

BoundaryKind = Literal["affine", "polynomial", "random", "corrected"]


class BoundarySpec(BaseModel):
    """Dirichlet data on the box boundary, in coordinates centred on the box.

    affine: xi . y. polynomial: xi . y + y.M y / 2 with M seeded and trace-free
    against a_h. random: seeded xi and M plus Gaussian trace noise.
    corrected: xi . (y + phi(x)), an exactly a-harmonic function.
    """

    model_config = ConfigDict(frozen=True)

    kind: BoundaryKind = "random"
    xi: Optional[Tuple[float, ...]] = None
    degree: int = Field(default=2, ge=1, le=2)
    noise: float = Field(default=0.1, ge=0.0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)


def reference_matrix(a: Medium, correctors: Optional[CorrectorSet] = None) -> np.ndarray:
    """a_h from the corrector set, or the medium's own matrix when it is constant."""
    if correctors is not None:
        return correctors.a_h
    if isinstance(a, ConstantMatrixMedium):
        return np.array(a.matrix)
    if isinstance(a, CoefficientField) and a.is_constant():
        return np.diag([a.conductance[j].flat[0] for j in range(a.grid.dim)])
    raise PreconditionError("PRECONDITION_CORRECTORS", "a random medium needs its corrector set here")


def trace_free_hessian(a_h: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """Symmetrize `raw` and remove a multiple of the identity so that tr(a_h M) = 0."""
    M = 0.5 * (raw + raw.T)
    return M - (np.trace(a_h @ M) / np.trace(a_h)) * np.eye(a_h.shape[0])


def boundary_values(
    a: Medium,
    box: DirichletBox,
    spec: BoundarySpec,
    correctors: Optional[CorrectorSet] = None,
) -> ScalarField:
    grid = a.grid
    d = grid.dim
    y = box.local_coordinates - (box.side - 1) / 2.0
    rng = philox(spec.seed)
    half_width = (box.side - 1) / 2.0

    if spec.xi is not None:
        xi = np.asarray(spec.xi, dtype=float)
        if xi.shape != (d,):
            raise PreconditionError("GRID_MISMATCH", f"slope {spec.xi} is not {d}-dimensional")
    elif spec.kind == "random":
        xi = rng.standard_normal(d)
        xi /= np.linalg.norm(xi)
    else:
        xi = np.eye(d)[0]

    values = np.tensordot(xi, y, axes=(0, 0))
    if spec.kind == "corrected":
        if correctors is None:
            raise PreconditionError("PRECONDITION_CORRECTORS", "corrected boundary data needs correctors")
        values = values + sum(xi[i] * correctors.phi[i].values for i in range(d))
    elif spec.kind in ("polynomial", "random") and spec.degree == 2:
        raw = rng.standard_normal((d, d)) / (np.sqrt(d) * half_width)
        M = trace_free_hessian(reference_matrix(a, correctors), raw)
        values = values + 0.5 * np.einsum("j...,jk,k...->...", y, M, y)
    if spec.kind == "random" and spec.noise > 0:
        values = values + spec.noise * rng.standard_normal(grid.shape)
    return ScalarField(grid, np.where(box.mask, values, 0.0))


@dataclass(frozen=True, eq=False)
class HarmonicSample:
    box: DirichletBox
    values: ScalarField
    boundary: BoundarySpec
    report: SolveReport

    @property
    def residual(self) -> float:
        return self.report.relative_residual


def harmonic_sample(
    a: Medium,
    box: DirichletBox,
    boundary: BoundarySpec,
    tol: float = DEFAULT_TOL,
    seed: Optional[int] = None,
    correctors: Optional[CorrectorSet] = None,
    preconditioner: str = "jacobi",
) -> HarmonicSample:
    """Solve -div(a grad u) = 0 in the box interior with the given boundary data."""
    if seed is not None:
        boundary = boundary.model_copy(update={"seed": seed})
    data = boundary_values(a, box, boundary, correctors)
    request = SolveRequest(
        medium=a,
        domain=box,
        boundary_values=data,
        tol=tol,
        preconditioner=preconditioner,
        label=f"harmonic_{boundary.kind}_{boundary.seed}",
    )
    u, report = solve(request)
    return HarmonicSample(box, u, boundary, report)


@dataclass(frozen=True)
class ExcessValue:
    value: float
    xi: Tuple[float, ...]
    gram: np.ndarray = field(repr=False)
    singular: bool = False

    @property
    def gram_constant(self) -> float:
        """Smallest C with spectrum(G) inside [1/C, C]; inf when G is singular."""
        eigenvalues = np.linalg.eigvalsh(self.gram)
        if eigenvalues[0] <= 0:
            return float("inf")
        return float(max(eigenvalues[-1], 1.0 / eigenvalues[0]))


def _ball_inside(sample: HarmonicSample, center: Sequence[int], r: float) -> Ball:
    ball = Ball(sample.box.grid, tuple(center), r)
    if ball.size == 0 or not sample.box.contains(ball):
        raise PreconditionError(
            "BALL_OUTSIDE_DOMAIN", f"B_{r}({tuple(center)}) leaves the interior of the sample box"
        )
    return ball


def _ball_gradients(sample: HarmonicSample, correctors: CorrectorSet, ball: Ball):
    """grad u on the ball, shape (n*d,), and corrected gradients as columns (n*d, d)."""
    gu = grad(sample.values).values[:, ball.mask]
    F = correctors.corrected_gradients()[:, :, ball.mask]
    d = gu.shape[0]
    return gu.T.ravel(), np.stack([F[i].T.ravel() for i in range(d)], axis=1), ball.size


def intrinsic_excess(
    sample: HarmonicSample, correctors: CorrectorSet, center: Sequence[int], r: float
) -> ExcessValue:
    """Least-squares excess on B_r(center); singular Gram matrices are flagged.

    Raises:
        PreconditionError: BALL_OUTSIDE_DOMAIN
    """
    ball = _ball_inside(sample, center, r)
    target, columns, n = _ball_gradients(sample, correctors, ball)
    gram = columns.T @ columns / n
    eigenvalues = np.linalg.eigvalsh(gram)
    singular = bool(eigenvalues[0] <= SINGULAR_TOL * max(eigenvalues[-1], np.finfo(float).tiny))
    xi, *_ = np.linalg.lstsq(columns, target, rcond=None)
    residual = target - columns @ xi
    return ExcessValue(float(residual @ residual / n), tuple(float(v) for v in xi), gram, singular)


def fixed_slope_excess(
    sample: HarmonicSample,
    correctors: CorrectorSet,
    center: Sequence[int],
    r: float,
    xi: Sequence[float],
) -> float:
    """mean_{B_r} |grad u - xi_i (e_i + grad phi_i)|^2 for a given slope."""
    ball = _ball_inside(sample, center, r)
    target, columns, n = _ball_gradients(sample, correctors, ball)
    residual = target - columns @ np.asarray(xi, dtype=float)
    return float(residual @ residual / n)


@dataclass(frozen=True)
class ExcessCurve:
    sample_id: int
    radii: Tuple[float, ...]
    excess: Tuple[float, ...]
    excess_fixed: Tuple[float, ...]
    xi: Tuple[Tuple[float, ...], ...]
    slope: Optional[SlopeFit]
    slope_fixed: Optional[SlopeFit]
    slope_bound_constant: float
    stability_constant: float
    gram_constant: float
    singular: bool
    residual: float

    def rows(self) -> List[Dict[str, float]]:
        rows = []
        for r, e, ef, xi in zip(self.radii, self.excess, self.excess_fixed, self.xi):
            row: Dict[str, float] = {
                "sample_id": self.sample_id,
                "r": r,
                "excess_sqrt": float(np.sqrt(e)),
                "excess_sqrt_fixed_slope": float(np.sqrt(ef)),
            }
            row.update({f"xi_{i + 1}": v for i, v in enumerate(xi)})
            rows.append(row)
        return rows


def excess_curve(
    sample: HarmonicSample,
    correctors: CorrectorSet,
    center: Sequence[int],
    radii: Sequence[float],
    outer_radius: float,
    sample_id: int = 0,
    gram_from: float = 0.0,
) -> ExcessCurve:
    """Optimal and fixed-slope excess over `radii` plus the reported constants.

    The fixed slope is the optimal one at the smallest radius. Gram constants
    are collected from radii >= `gram_from`.
    """
    radii = tuple(sorted(float(r) for r in radii))
    values = [intrinsic_excess(sample, correctors, center, r) for r in radii]
    xi0 = values[0].xi
    fixed = [fixed_slope_excess(sample, correctors, center, r, xi0) for r in radii]
    for r, v, f in zip(radii, values, fixed):
        if f < v.value - MONOTONE_SLACK * max(1.0, f):
            raise AssertionError(f"fixed-slope excess {f} below optimum {v.value} at r={r}")

    outer = intrinsic_excess(sample, correctors, center, outer_radius)
    ball = _ball_inside(sample, center, outer_radius)
    energy = float(np.sqrt(np.mean(np.sum(grad(sample.values).values[:, ball.mask] ** 2, axis=0))))
    slopes = [np.linalg.norm(v.xi) for v in values]
    slope_bound = max(slopes) / energy if energy > 0 else 0.0
    drift = max(np.linalg.norm(np.subtract(v.xi, outer.xi)) for v in values)
    stability = drift / np.sqrt(outer.value) if outer.value > 0 else 0.0
    grams = [v.gram_constant for r, v in zip(radii, values) if r >= gram_from]

    sqrt_excess = np.sqrt([v.value for v in values])
    return ExcessCurve(
        sample_id=sample_id,
        radii=radii,
        excess=tuple(v.value for v in values),
        excess_fixed=tuple(fixed),
        xi=tuple(v.xi for v in values),
        slope=fit_loglog(radii, sqrt_excess),
        slope_fixed=fit_loglog(radii, np.sqrt(fixed)),
        slope_bound_constant=float(slope_bound),
        stability_constant=float(stability),
        gram_constant=float(max(grams)) if grams else float("nan"),
        singular=any(v.singular for v in values),
        residual=sample.residual,
    )


@dataclass(frozen=True)
class ExcessReport:
    center: Tuple[int, ...]
    outer_radius: float
    radii: Tuple[float, ...]
    curves: Tuple[ExcessCurve, ...]
    skipped: Tuple[Tuple[int, str], ...]
    median_slope: Optional[float]
    median_slope_fixed: Optional[float]
    max_slope_bound_constant: float
    max_stability_constant: float
    max_gram_constant: float

    def rows(self) -> List[Dict[str, float]]:
        return [row for curve in self.curves for row in curve.rows()]

    def aggregate_rows(self) -> List[Dict[str, object]]:
        def slope(fit: Optional[SlopeFit]):
            return fit.slope if fit is not None else float("nan")

        rows: List[Dict[str, object]] = [
            {
                "sample_id": c.sample_id,
                "slope": slope(c.slope),
                "slope_fixed": slope(c.slope_fixed),
                "fit_residual": c.slope.residual if c.slope is not None else float("nan"),
                "slope_bound_constant": c.slope_bound_constant,
                "stability_constant": c.stability_constant,
                "gram_constant": c.gram_constant,
                "singular_gram": int(c.singular),
            }
            for c in self.curves
        ]
        rows.append(
            {
                "sample_id": "median",
                "slope": self.median_slope if self.median_slope is not None else float("nan"),
                "slope_fixed": self.median_slope_fixed if self.median_slope_fixed is not None else float("nan"),
                "fit_residual": float("nan"),
                "slope_bound_constant": self.max_slope_bound_constant,
                "stability_constant": self.max_stability_constant,
                "gram_constant": self.max_gram_constant,
                "singular_gram": int(any(c.singular for c in self.curves)),
            }
        )
        return rows


def _median(values: Sequence[float]) -> Optional[float]:
    return float(np.median(values)) if len(values) else None


def excess_decay_experiment(
    a: Medium,
    correctors: CorrectorSet,
    R: int,
    radii: Optional[Sequence[float]] = None,
    n_samples: int = 16,
    seed: int = 0,
    growth: Optional[GrowthReport] = None,
    center: Optional[Sequence[int]] = None,
    boundary: Optional[BoundarySpec] = None,
    tol: float = DEFAULT_TOL,
    n_jobs: int = 1,
    preconditioner: str = "jacobi",
    progress: bool = False,
) -> ExcessReport:
    """Excess curves of `n_samples` a-harmonic functions on B_{R+1}(center).

    Samples draw their boundary data from child seeds of `seed`; a sample
    whose solve or geometry fails is skipped and listed with the reason.

    Raises:
        PreconditionError: PRECONDITION_GROWTH if `growth` is not certified,
            PRECONDITION_GEOMETRY if the box or the radii do not fit
    """
    grid = correctors.grid
    center = tuple(grid.wrap(center if center is not None else (0,) * grid.dim))
    if growth is not None and not growth.certified:
        raise PreconditionError("PRECONDITION_GROWTH", f"growth at {growth.center} is not certified")
    r_star = growth.r_star if growth is not None else 1.0
    if radii is None:
        radii = []
        r = max(2.0, r_star)
        while r <= R:
            radii.append(r)
            r *= 2
    radii = tuple(sorted(float(r) for r in radii))
    if not radii or radii[0] < r_star or radii[-1] > R:
        raise PreconditionError("PRECONDITION_GEOMETRY", f"radii {radii} must lie in [{r_star}, {R}]")
    if 2 * R + 3 > grid.side:
        raise PreconditionError("PRECONDITION_GEOMETRY", f"box of half-width {R + 1} exceeds L = {grid.side}")

    box = DirichletBox.centered(grid, center, R + 1)
    template = boundary if boundary is not None else BoundarySpec()
    seeds = spawn_seeds(seed, n_samples)

    def one(index: int):
        try:
            sample = harmonic_sample(a, box, template, tol, seeds[index], correctors, preconditioner)
            return excess_curve(sample, correctors, center, radii, R, index, gram_from=r_star), None
        except HomoglabError as exc:
            logger.warning("excess sample %d skipped: %s", index, exc)
            return None, str(exc)

    jobs = tqdm(range(n_samples), desc="excess samples", disable=not progress)
    results = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(one)(k) for k in jobs)

    curves = tuple(curve for curve, _ in results if curve is not None)
    skipped = tuple((k, reason) for k, (_, reason) in enumerate(results) if reason is not None)
    slopes = [c.slope.slope for c in curves if c.slope is not None]
    fixed = [c.slope_fixed.slope for c in curves if c.slope_fixed is not None]
    report = ExcessReport(
        center=center,
        outer_radius=float(R),
        radii=radii,
        curves=curves,
        skipped=skipped,
        median_slope=_median(slopes),
        median_slope_fixed=_median(fixed),
        max_slope_bound_constant=max((c.slope_bound_constant for c in curves), default=float("nan")),
        max_stability_constant=max((c.stability_constant for c in curves), default=float("nan")),
        max_gram_constant=max((c.gram_constant for c in curves), default=float("nan")),
    )
    logger.info(
        "excess: %d samples, %d skipped, median slope %s", len(curves), len(skipped), report.median_slope
    )
    return report
