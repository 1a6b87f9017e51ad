"""Report types shared by the decay experiments."""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.fitting import SlopeFit, fit_loglog, running_slopes

MIN_SLOPE_POINTS = 3


def envelope_shape(distance: Sequence[float], r_star: float, dim: int, alpha: float) -> np.ndarray:
    """ln(t / r_star) / (t / r_star)^(d + alpha) for each distance t."""
    t = np.asarray(distance, dtype=float) / r_star
    return np.log(t) / t ** (dim + alpha)


def fitted_prefactor(errors: Sequence[float], shape: Sequence[float]) -> float:
    """Geometric-mean constant C with errors ~ C * shape over the positive pairs."""
    errors = np.asarray(errors, dtype=float)
    shape = np.asarray(shape, dtype=float)
    keep = (errors > 0) & (shape > 0)
    if not np.any(keep):
        return 0.0
    return float(np.exp(np.mean(np.log(errors[keep]) - np.log(shape[keep]))))


@dataclass(frozen=True)
class DecayReport:
    label: str
    abscissa: Tuple[float, ...]
    errors: Tuple[float, ...]
    envelope: Tuple[float, ...]
    prefactor: float
    slope: Optional[SlopeFit]
    running: Tuple[float, ...]
    alpha: float
    r_star: float
    metadata: Dict[str, Any] = field(default_factory=dict)
    extra: Dict[str, Tuple[float, ...]] = field(default_factory=dict)

    def rows(self) -> List[Dict[str, float]]:
        rows = []
        for n, (t, e, env, s) in enumerate(zip(self.abscissa, self.errors, self.envelope, self.running)):
            row = {"x0_norm": t, "error_l2": e, "envelope": env, "slope_running": s}
            row.update({key: values[n] for key, values in self.extra.items()})
            rows.append(row)
        return rows


def decay_report(
    label: str,
    abscissa: Sequence[float],
    errors: Sequence[float],
    r_star: float,
    dim: int,
    alpha: float,
    metadata: Optional[Dict[str, Any]] = None,
    extra: Optional[Dict[str, Sequence[float]]] = None,
) -> DecayReport:
    """Assemble a DecayReport; the slope is fitted only with three positive errors."""
    order = np.argsort(abscissa, kind="stable")
    abscissa = np.asarray(abscissa, dtype=float)[order]
    errors = np.asarray(errors, dtype=float)[order]
    shape = envelope_shape(abscissa, r_star, dim, alpha)
    prefactor = fitted_prefactor(errors, shape)
    slope = fit_loglog(abscissa, errors) if np.count_nonzero(errors > 0) >= MIN_SLOPE_POINTS else None
    return DecayReport(
        label=label,
        abscissa=tuple(float(t) for t in abscissa),
        errors=tuple(float(e) for e in errors),
        envelope=tuple(float(v) for v in prefactor * shape),
        prefactor=prefactor,
        slope=slope,
        running=tuple(float(s) for s in running_slopes(abscissa, errors)),
        alpha=float(alpha),
        r_star=float(r_star),
        metadata=dict(metadata or {}),
        extra={key: tuple(float(v) for v in np.asarray(values, dtype=float)[order]) for key, values in (extra or {}).items()},
    )


@dataclass(frozen=True)
class LemmaLReport:
    R: int
    N: int
    M: int
    lhs: float
    rhs: float
    ratio: float
    regularized: bool
    dropped: int
    span_restricted: bool = True

    def row(self) -> Dict[str, float]:
        return {"R": self.R, "N": self.N, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio}
