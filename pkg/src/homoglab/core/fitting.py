"""Least-squares slopes in log-log coordinates."""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    points: int

    @property
    def reliable(self) -> bool:
        """Slopes are only compared when the fit residual is below 0.2 log units."""
        return self.points >= 3 and self.residual < 0.2


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> Optional[SlopeFit]:
    """Fit log y = slope * log x + intercept over the points with x, y > 0.

    The residual is the root mean square misfit in natural-log units. Returns
    None when fewer than two usable points remain.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if np.count_nonzero(keep) < 2:
        return None
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    misfit = ly - (slope * lx + intercept)
    return SlopeFit(float(slope), float(intercept), float(np.sqrt(np.mean(misfit ** 2))), int(lx.size))


def running_slopes(x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """Slope between consecutive points; NaN where a value is not positive."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.full(x.shape, np.nan)
    for n in range(1, x.size):
        if min(x[n], x[n - 1], y[n], y[n - 1]) > 0:
            out[n] = np.log(y[n] / y[n - 1]) / np.log(x[n] / x[n - 1])
    return out
