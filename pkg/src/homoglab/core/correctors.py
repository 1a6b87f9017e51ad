"""Correctors, fluxes, homogenized matrix and flux correctors on the torus.

For a medium a and direction i (0-based here):

    phi_i   solves  -div(a (e_i + grad phi_i)) = 0, mean zero
    a_h e_i         = site average of a (e_i + grad phi_i)
    q_i             = a (e_i + grad phi_i) - a_h e_i
    sigma_i         skew, -Lap sigma_ijk = D_j^+ q_ik - D_k^+ q_ij, mean zero

With (div sigma_i)_j := sum_k D_k^- sigma_ijk the identity div sigma_i = q_i
holds up to the solver residuals because the difference operators commute.
"""
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from ..coefficients import make_constant
from ..coefficients.io import write_dump
from ..errors import PreconditionError
from ..lattice import (
    ScalarField,
    SkewTensorField,
    VectorField,
    backward_diff,
    div,
    forward_diff,
    grad,
    skew_pairs,
)
from ..media import CoefficientField, Medium
from ..solvers import DEFAULT_TOL, SolveReport, SolveRequest, apply_operator, solve

logger = logging.getLogger(__name__)

DIV_TOL = 1e-6
IDENTITY_TOL = 1e-6
MEAN_TOL = 1e-8
EIGEN_SLACK = 1e-10
# relative checks on q_i never use a denominator below this share of |a (e_i + grad phi_i)|
FLUX_FLOOR = 1e-2


def unit_vector_field(a: Medium, i: int) -> VectorField:
    """The flux a e_i of the affine coordinate x_i."""
    e_i = np.zeros((a.grid.dim,) + a.grid.shape)
    e_i[i] = 1.0
    return VectorField(a.grid, a.flux(e_i))


def _phi_solve(a: Medium, i: int, tol: float, preconditioner: str) -> Tuple[ScalarField, SolveReport]:
    if not 0 <= i < a.grid.dim:
        raise PreconditionError("INVALID_DIRECTION", f"direction {i} outside 0..{a.grid.dim - 1}")
    request = SolveRequest(
        medium=a,
        rhs_g=unit_vector_field(a, i),
        tol=tol,
        preconditioner=preconditioner,
        label=f"phi_{i}",
    )
    return solve(request)


def corrector_phi(a: Medium, i: int, tol: float = DEFAULT_TOL, preconditioner: str = "jacobi") -> ScalarField:
    """Mean-zero corrector phi_i of direction i."""
    phi, _ = _phi_solve(a, i, tol, preconditioner)
    return phi


def corrected_gradient(phi_i: ScalarField, i: int) -> np.ndarray:
    """e_i + grad phi_i as an array of shape (d, L, ..., L)."""
    out = grad(phi_i).values.copy()
    out[i] += 1.0
    return out


def homogenized_matrix(a: Medium, phi: Sequence[ScalarField]) -> np.ndarray:
    """Column i is the torus average of a (e_i + grad phi_i)."""
    d = a.grid.dim
    a_h = np.zeros((d, d))
    axes = tuple(range(1, d + 1))
    for i, phi_i in enumerate(phi):
        a_h[:, i] = a.flux(corrected_gradient(phi_i, i)).mean(axis=axes)
    return a_h


def flux_q(a: Medium, phi_i: ScalarField, i: int, a_h: np.ndarray) -> VectorField:
    """Centered flux a (e_i + grad phi_i) - a_h e_i."""
    flux = a.flux(corrected_gradient(phi_i, i))
    for j in range(a.grid.dim):
        flux[j] -= a_h[j, i]
    return VectorField(a.grid, flux)


def _flux_scale(q_i: VectorField, flux_norm: float) -> float:
    return max(q_i.norm(), FLUX_FLOOR * flux_norm)


def _check_flux(q_i: VectorField, div_tol: float, flux_norm: float = 0.0) -> None:
    grid = q_i.grid
    scale = max(
        2.0 * np.sqrt(grid.dim) * _flux_scale(q_i, flux_norm),
        np.sqrt(grid.n_sites) * np.finfo(float).eps,
    )
    divergence = div(q_i).norm()
    if divergence > div_tol * scale:
        raise PreconditionError(
            "PRECONDITION_DIV", f"flux divergence {divergence:.3e} exceeds {div_tol:.1e} x {scale:.3e}"
        )
    means = np.abs(q_i.values.reshape(grid.dim, -1).mean(axis=1))
    if np.max(means) > div_tol * max(1.0, float(np.max(np.abs(q_i.values)))):
        raise PreconditionError("PRECONDITION_DIV", f"flux has nonzero mean {means.tolist()}")


def _sigma_solves(q_i: VectorField, tol: float, preconditioner: str, n_jobs: int, label: str):
    grid = q_i.grid
    unit = make_constant(grid, (1.0,) * grid.dim, lam=1.0)

    def component(j: int, k: int) -> Tuple[ScalarField, SolveReport]:
        source = forward_diff(q_i.values[k], j) - forward_diff(q_i.values[j], k)
        request = SolveRequest(
            medium=unit,
            rhs_f=ScalarField(grid, source),
            tol=tol,
            preconditioner=preconditioner,
            label=f"sigma_{label}{j}{k}",
        )
        return solve(request)

    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(component)(j, k) for j, k in skew_pairs(grid.dim)
    )
    sigma = SkewTensorField(grid, np.stack([s.values for s, _ in results]))
    return sigma, [report for _, report in results]


def flux_corrector_sigma(
    q_i: VectorField,
    tol: float = DEFAULT_TOL,
    div_tol: float = DIV_TOL,
    preconditioner: str = "jacobi",
) -> SkewTensorField:
    """Skew flux corrector in the Poisson gauge.

    Raises:
        PreconditionError: PRECONDITION_DIV if q_i is not divergence-free and
            centered to `div_tol`
    """
    _check_flux(q_i, div_tol)
    sigma, _ = _sigma_solves(q_i, tol, preconditioner, 1, "")
    return sigma


def sigma_divergence(sigma_i: SkewTensorField) -> np.ndarray:
    """(div sigma_i)_j = sum_k D_k^- sigma_ijk, shape (d, L, ..., L)."""
    d = sigma_i.grid.dim
    out = np.zeros((d,) + sigma_i.grid.shape)
    for j in range(d):
        for k in range(d):
            if j != k:
                out[j] += backward_diff(sigma_i.component(j, k), k)
    return out


@dataclass(frozen=True)
class DirectionCertificate:
    direction: int
    phi_mean: float
    phi_residual: float
    q_mean: float
    q_divergence: float
    sigma_identity: float
    sigma_skew: float
    sigma_mean: float


@dataclass(frozen=True)
class CorrectorCertification:
    directions: Tuple[DirectionCertificate, ...]
    a_h_eigenvalues: Tuple[float, ...]
    a_h_asymmetry: float
    lam: float
    tol: float
    passed: bool
    failures: Tuple[str, ...] = field(default=())

    def as_rows(self) -> List[Dict[str, float]]:
        return [asdict(c) for c in self.directions]


@dataclass(frozen=True, eq=False)
class CorrectorSet:
    medium: Medium
    phi: Tuple[ScalarField, ...]
    sigma: Tuple[SkewTensorField, ...]
    q: Tuple[VectorField, ...]
    a_h: np.ndarray
    certification: CorrectorCertification
    reports: Tuple[SolveReport, ...] = field(default=())

    @property
    def grid(self):
        return self.medium.grid

    def corrected_gradients(self) -> np.ndarray:
        """F[i] = e_i + grad phi_i, shape (d, d, L, ..., L)."""
        return np.stack([corrected_gradient(p, i) for i, p in enumerate(self.phi)])

    def stacked_phi(self) -> List[ScalarField]:
        return list(self.phi)

    def stacked_sigma(self) -> List[SkewTensorField]:
        return list(self.sigma)


def _relative(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else numerator


def certify(
    a: Medium,
    phi: Sequence[ScalarField],
    sigma: Sequence[SkewTensorField],
    q: Sequence[VectorField],
    a_h: np.ndarray,
    tol: float,
) -> CorrectorCertification:
    """Re-evaluate every defining identity of the corrector set."""
    rows = []
    failures = []
    for i in range(a.grid.dim):
        rhs = div(unit_vector_field(a, i))
        # -div(a grad phi_i) = div(a e_i)
        residual = apply_operator(a, phi[i]).values - rhs.values
        phi_residual = _relative(float(np.linalg.norm(residual)), rhs.norm())
        identity = sigma_divergence(sigma[i]) - q[i].values
        flux_norm = float(np.linalg.norm(a.flux(corrected_gradient(phi[i], i))))
        full = sigma[i].full()
        cert = DirectionCertificate(
            direction=i,
            phi_mean=_relative(abs(phi[i].mean()), max(1.0, float(np.max(np.abs(phi[i].values))))),
            phi_residual=phi_residual,
            q_mean=float(np.max(np.abs(q[i].values.reshape(a.grid.dim, -1).mean(axis=1)))),
            q_divergence=_relative(div(q[i]).norm(), 2.0 * np.sqrt(a.grid.dim) * _flux_scale(q[i], flux_norm)),
            sigma_identity=_relative(float(np.linalg.norm(identity)), _flux_scale(q[i], flux_norm)),
            sigma_skew=float(np.max(np.abs(full + np.swapaxes(full, 0, 1)))),
            sigma_mean=float(np.max(np.abs(sigma[i].values.reshape(len(sigma[i].pairs), -1).mean(axis=1))))
            if sigma[i].pairs
            else 0.0,
        )
        rows.append(cert)
        if cert.phi_residual > 10 * tol:
            failures.append(f"phi_{i} residual {cert.phi_residual:.3e}")
        if cert.phi_mean > MEAN_TOL:
            failures.append(f"phi_{i} mean {cert.phi_mean:.3e}")
        if cert.q_divergence > DIV_TOL:
            failures.append(f"q_{i} divergence {cert.q_divergence:.3e}")
        if cert.sigma_identity > IDENTITY_TOL:
            failures.append(f"sigma_{i} identity {cert.sigma_identity:.3e}")
        if cert.sigma_skew != 0.0:
            failures.append(f"sigma_{i} not skew")
        if cert.q_mean > 1e-8:
            failures.append(f"q_{i} mean {cert.q_mean:.3e}")

    asymmetry = float(np.max(np.abs(a_h - a_h.T)))
    eigenvalues = np.linalg.eigvalsh(0.5 * (a_h + a_h.T))
    if eigenvalues[0] < a.lam - EIGEN_SLACK or eigenvalues[-1] > 1.0 + EIGEN_SLACK:
        failures.append(f"a_h eigenvalues {eigenvalues.tolist()} outside [{a.lam}, 1]")
    return CorrectorCertification(
        directions=tuple(rows),
        a_h_eigenvalues=tuple(float(v) for v in eigenvalues),
        a_h_asymmetry=asymmetry,
        lam=a.lam,
        tol=tol,
        passed=not failures,
        failures=tuple(failures),
    )


def build_corrector_set(
    a: Medium,
    tol: float = DEFAULT_TOL,
    n_jobs: int = 1,
    preconditioner: str = "jacobi",
) -> CorrectorSet:
    """Solve for (phi, sigma), assemble q and a_h, and certify the result."""
    d = a.grid.dim
    phi_results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_phi_solve)(a, i, tol, preconditioner) for i in range(d)
    )
    phi = tuple(p for p, _ in phi_results)
    reports: List[SolveReport] = [r for _, r in phi_results]

    a_h = homogenized_matrix(a, phi)
    q = tuple(flux_q(a, phi[i], i, a_h) for i in range(d))

    sigma = []
    for i in range(d):
        flux_norm = float(np.linalg.norm(a.flux(corrected_gradient(phi[i], i))))
        _check_flux(q[i], DIV_TOL, flux_norm)
        sigma_i, sigma_reports = _sigma_solves(q[i], tol, preconditioner, n_jobs, f"{i}_")
        sigma.append(sigma_i)
        reports.extend(sigma_reports)

    certification = certify(a, phi, sigma, q, a_h, tol)
    if certification.passed:
        logger.info("correctors certified, a_h diagonal %s", np.diag(a_h).tolist())
    else:
        logger.warning("corrector certification failed: %s", "; ".join(certification.failures))
    return CorrectorSet(a, phi, tuple(sigma), q, a_h, certification, tuple(reports))


def voigt_reuss_bounds(a: CoefficientField) -> Tuple[np.ndarray, np.ndarray]:
    """Per-direction harmonic and arithmetic means of the edge conductances."""
    d = a.grid.dim
    values = a.conductance.reshape(d, -1)
    harmonic = 1.0 / np.mean(1.0 / values, axis=1)
    arithmetic = np.mean(values, axis=1)
    return harmonic, arithmetic


def dump_corrector_set(correctors: CorrectorSet, path: Union[str, Path]) -> None:
    """Write phi, sigma and q blocks with a header carrying a_h and the certification."""
    grid = correctors.grid
    header: Dict[str, object] = {"d": grid.dim, "L": grid.side, "lambda": repr(correctors.medium.lam)}
    for i in range(grid.dim):
        for j in range(grid.dim):
            header[f"a_h_{i + 1}{j + 1}"] = repr(float(correctors.a_h[i, j]))
    for cert in correctors.certification.directions:
        header[f"phi_residual_{cert.direction + 1}"] = repr(cert.phi_residual)
        header[f"sigma_identity_{cert.direction + 1}"] = repr(cert.sigma_identity)
    header["blocks"] = "phi, sigma, q"
    blocks = [p.values for p in correctors.phi]
    blocks += [s.values for s in correctors.sigma]
    blocks += [v.values for v in correctors.q]
    write_dump(path, header, blocks)
