"""Solve -div(a grad u) = div g + f on the torus or on a Dirichlet box."""
import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import cg

from ..errors import PreconditionError, SolverError
from ..lattice import DirichletBox, ScalarField, VectorField, div
from ..media import Medium
from .factory import PreconditionerFactory

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
COMPATIBILITY_TOL = 1e-10
# scipy checks its recursive residual; stop a little early so the true one meets tol
CG_SAFETY = 0.5

_listeners: List[Callable[["SolveReport"], None]] = []


@dataclass(frozen=True)
class SolveRequest:
    """One linear solve. `domain=None` means the whole torus."""

    medium: Medium
    rhs_g: Optional[VectorField] = None
    rhs_f: Optional[ScalarField] = None
    domain: Optional[DirichletBox] = None
    boundary_values: Optional[ScalarField] = None
    tol: float = DEFAULT_TOL
    max_iter: Optional[int] = None
    preconditioner: str = "jacobi"
    label: str = ""


@dataclass(frozen=True)
class SolveReport:
    label: str
    unknowns: int
    iterations: int
    relative_residual: float
    wall_time: float
    converged: bool

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


@contextmanager
def listening(listener: Callable[[SolveReport], None]) -> Iterator[None]:
    """Call `listener` with the report of every solve finished inside the block."""
    _listeners.append(listener)
    try:
        yield
    finally:
        _listeners.remove(listener)


def apply_operator(a: Medium, u: ScalarField) -> ScalarField:
    """-div(a ⊙ grad u)."""
    if a.grid != u.grid:
        raise PreconditionError("GRID_MISMATCH", f"medium grid {a.grid} != field grid {u.grid}")
    return ScalarField(u.grid, a.apply(u.values))


def assemble_rhs(request: SolveRequest) -> np.ndarray:
    grid = request.medium.grid
    rhs = np.zeros(grid.shape)
    if request.rhs_g is not None:
        if request.rhs_g.grid != grid:
            raise PreconditionError("GRID_MISMATCH", "rhs_g lives on another grid")
        rhs += div(request.rhs_g).values
    if request.rhs_f is not None:
        if request.rhs_f.grid != grid:
            raise PreconditionError("GRID_MISMATCH", "rhs_f lives on another grid")
        rhs += request.rhs_f.values
    return rhs


def _system(request: SolveRequest, rhs: np.ndarray):
    """Matrix, right-hand side, lattice shape and fixed boundary part of the system."""
    medium = request.medium
    A_full = medium.stiffness()
    if request.domain is None:
        total = float(np.sum(rhs))
        scale = float(np.sum(np.abs(rhs)))
        if abs(total) > COMPATIBILITY_TOL * max(scale, np.finfo(float).tiny):
            raise PreconditionError(
                "NON_COMPATIBLE_RHS", f"torus right-hand side sums to {total}, not zero"
            )
        b = rhs.ravel() - total / rhs.size
        return A_full, b, medium.grid.shape, None

    box = request.domain
    if box.grid != medium.grid:
        raise PreconditionError("GRID_MISMATCH", "box and medium live on different grids")
    fixed = np.zeros(medium.grid.shape)
    if request.boundary_values is not None:
        fixed[box.boundary_mask] = request.boundary_values.values[box.boundary_mask]
    index = box.interior_index
    rows = A_full[index]
    b = rhs.ravel()[index] - rows @ fixed.ravel()
    return rows[:, index].tocsr(), b, box.interior_shape, fixed


def solve(request: SolveRequest) -> Tuple[ScalarField, SolveReport]:
    """Preconditioned CG to relative residual `tol`.

    The torus solution has mean zero; the box solution equals the boundary
    values on the box boundary and zero outside the box.

    Raises:
        PreconditionError: NON_COMPATIBLE_RHS or GRID_MISMATCH
        SolverError: MAX_ITER_EXCEEDED, with the best iterate attached
    """
    if request.tol <= 0:
        raise PreconditionError("INVALID_TOLERANCE", f"tol must be positive, got {request.tol}")
    grid = request.medium.grid
    start = time.perf_counter()
    rhs = assemble_rhs(request)
    A, b, shape, fixed = _system(request, rhs)

    b_norm = float(np.linalg.norm(b))
    iterations = 0
    if b_norm == 0.0:
        x = np.zeros_like(b)
        residual = 0.0
    else:
        M = PreconditionerFactory.create(request.preconditioner).build(A, shape)

        def count(_):
            nonlocal iterations
            iterations += 1

        x, _ = cg(A, b, rtol=CG_SAFETY * request.tol, atol=0.0, maxiter=request.max_iter, M=M, callback=count)
        if fixed is None:
            x = x - np.mean(x)
        residual = float(np.linalg.norm(b - A @ x)) / b_norm

    if fixed is None:
        values = x.reshape(grid.shape)
    else:
        values = fixed.ravel().copy()
        values[request.domain.interior_index] = x
        values = values.reshape(grid.shape)

    report = SolveReport(
        label=request.label,
        unknowns=int(b.size),
        iterations=iterations,
        relative_residual=residual,
        wall_time=time.perf_counter() - start,
        converged=residual <= request.tol,
    )
    logger.debug("solve %s: %d iterations, residual %.3e", request.label, iterations, residual)
    for listener in list(_listeners):
        listener(report)
    solution = ScalarField(grid, values)
    if not report.converged:
        raise SolverError(
            "MAX_ITER_EXCEEDED",
            f"{request.label or 'solve'} stopped at relative residual {residual:.3e} > {request.tol:.1e}",
            solution=solution,
            report=report,
        )
    return solution, report
