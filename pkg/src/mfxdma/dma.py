"""Moving-average detrending and bivariate fluctuation functions.

The analysis walks a scale grid; at each scale s the series are detrended
by a sliding mean whose split between past and future samples is set by
the position parameter theta (theta=0 is the causal, backward window),
residuals are cut into non-overlapping segments of length s, and the
segment covariations are collapsed into q-th order fluctuation functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .stats import ols_polyfit


class DmaError(ValueError):
    pass


class DegenerateSegmentError(DmaError):
    """A segment produced zero fluctuation, poisoning q <= 0 moments."""


def default_q_grid() -> np.ndarray:
    return np.round(np.arange(-20, 21) * 0.25, 10)


@dataclass(frozen=True)
class DmaConfig:
    """Grid and window settings for one analysis run."""

    theta: float = 0.0
    scale_min: int = 10
    scale_max: int = 316
    n_scales: int = 30
    q_grid: np.ndarray = field(default_factory=default_q_grid)
    use_profile: bool = True

    def __post_init__(self):
        if not (0.0 <= self.theta <= 1.0):
            raise DmaError(f"theta must lie in [0,1], got {self.theta}")
        if self.scale_min < 2:
            raise DmaError(f"scale_min must be >= 2, got {self.scale_min}")
        if self.scale_min >= self.scale_max:
            raise DmaError("scale_min must be < scale_max")
        if self.n_scales < 4:
            raise DmaError(f"need n_scales >= 4, got {self.n_scales}")
        q = np.asarray(self.q_grid, dtype=np.float64)
        if q.ndim != 1 or q.size < 3:
            raise DmaError("q_grid must be a 1-d grid of >= 3 points")
        if np.any(np.diff(q) <= 0):
            raise DmaError("q_grid must be strictly increasing")
        if not (np.any(q == 0.0) and np.any(q == 2.0)):
            raise DmaError("q_grid must contain 0 and 2")
        object.__setattr__(self, "q_grid", q)

    def scales(self) -> np.ndarray:
        """Log-spaced integer scales, deduplicated, within the configured span."""
        raw = np.geomspace(self.scale_min, self.scale_max, self.n_scales)
        return np.unique(np.rint(raw).astype(np.int64))

    def validate_for_length(self, n: int) -> None:
        if self.scale_max > n // 4:
            raise DmaError(
                f"scale_max={self.scale_max} exceeds N/4={n // 4} for series of length {n}"
            )


@dataclass(frozen=True)
class FluctuationSurface:
    """F_xy(q,s) over the q and scale grids; rows index q, columns s."""

    scales: np.ndarray
    q_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.q_grid.size, self.scales.size):
            raise DmaError("surface shape does not match grids")
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0.0):
            raise DmaError("surface entries must be finite and positive")
        # generalized means are nondecreasing in their order; tolerate only
        # rounding-level violations
        diffs = np.diff(self.values, axis=0)
        if np.any(diffs < -1e-9 * self.values[:-1]):
            raise DmaError("power-mean ordering violated along q")


@dataclass(frozen=True)
class HurstCurve:
    """Per-q scaling exponents from the log-log regression."""

    q_grid: np.ndarray
    h: np.ndarray
    stderr: np.ndarray
    r2: np.ndarray


def profile(values: np.ndarray) -> np.ndarray:
    """Cumulative sum of a return series."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DmaError("empty input")
    return np.cumsum(values)


def _window_split(s: int, theta: float) -> tuple[int, int]:
    # (samples behind, samples ahead); sizes always add to s-1
    fwd = math.floor((s - 1) * theta)
    back = math.ceil((s - 1) * (1.0 - theta))
    return back, fwd


def moving_average(z: np.ndarray, s: int, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Sliding mean of width s positioned by theta.

    Returns (values, valid): values has the input length with NaN where
    the window would cross the series bounds, valid is the boolean mask
    of usable positions.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    if not (1 <= s <= n):
        raise DmaError(f"window size must be in [1, {n}], got {s}")
    if not (0.0 <= theta <= 1.0):
        raise DmaError(f"theta must lie in [0,1], got {theta}")
    back, fwd = _window_split(s, theta)
    means = _accel.window_means(z, s)
    out = np.full(n, np.nan)
    out[back : n - fwd] = means
    valid = np.zeros(n, dtype=bool)
    valid[back : n - fwd] = True
    return out, valid


def residuals(z: np.ndarray, s: int, theta: float) -> np.ndarray:
    """Detrending residuals on the valid window range (length N-s+1)."""
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    if not (2 <= s <= n):
        raise DmaError(f"scale must be in [2, {n}], got {s}")
    back, _ = _window_split(s, theta)
    means = _accel.window_means(z, s)
    return z[back : back + means.size] - means


def segment_fluctuations(x_det: np.ndarray, y_det: np.ndarray, s: int,
                         theta: float = 0.0) -> np.ndarray:
    """Segment-wise mean absolute residual covariation F_v(s).

    Residual range is cut into floor((N-s+1)/s) segments of exactly s
    points starting at the first valid position; the trailing remainder
    is discarded.
    """
    x_det = np.asarray(x_det, dtype=np.float64)
    y_det = np.asarray(y_det, dtype=np.float64)
    if x_det.size != y_det.size:
        raise DmaError("series lengths differ")
    ex = residuals(x_det, s, theta)
    ey = residuals(y_det, s, theta)
    n_seg = ex.size // s
    if n_seg < 1:
        raise DmaError(f"no complete segment of size {s} in {ex.size} residuals")
    return _accel.segment_products(ex, ey, s, n_seg)


def fluctuation_function(fvs: np.ndarray, q: float) -> float:
    """Collapse segment fluctuations into the order-q overall value."""
    fvs = np.asarray(fvs, dtype=np.float64)
    if fvs.size == 0:
        raise DmaError("no segments")
    zeros = np.nonzero(fvs == 0.0)[0]
    if zeros.size and q <= 0:
        raise DegenerateSegmentError(
            f"segment {zeros[0]} has zero fluctuation; q={q} moment undefined"
        )
    if q == 0:
        return float(np.exp(np.log(fvs).sum() / (2.0 * fvs.size)))
    return float(np.mean(fvs ** (q / 2.0)) ** (1.0 / q))


def fluctuation_surface(x_det: np.ndarray, y_det: np.ndarray,
                        config: DmaConfig) -> FluctuationSurface:
    """F_xy(q,s) for detrendable inputs (profiles already applied)."""
    scales = config.scales()
    q_grid = config.q_grid
    values = np.empty((q_grid.size, scales.size))
    for j, s in enumerate(scales):
        fvs = segment_fluctuations(x_det, y_det, int(s), config.theta)
        zeros = np.nonzero(fvs == 0.0)[0]
        if zeros.size:
            raise DegenerateSegmentError(
                f"segment {zeros[0]} at scale {s} has zero fluctuation"
            )
        values[:, j] = _accel.q_moments(fvs, q_grid)
    return FluctuationSurface(scales=scales, q_grid=q_grid, values=values)


def hurst_curve(surface: FluctuationSurface) -> HurstCurve:
    """Slope of log F against log s, one regression per q."""
    if surface.scales.size < 4:
        raise DmaError("need at least 4 scales for the scaling regression")
    log_s = np.log(surface.scales.astype(np.float64))
    nq = surface.q_grid.size
    h = np.empty(nq)
    stderr = np.empty(nq)
    r2 = np.empty(nq)
    for i in range(nq):
        log_f = np.log(surface.values[i])
        if not np.all(np.isfinite(log_f)):
            raise DmaError(f"non-finite log-fluctuation at q={surface.q_grid[i]}")
        fit = ols_polyfit(log_s, log_f, degree=1)
        h[i] = fit.coefficients[1]
        stderr[i] = fit.std_errors[1]
        r2[i] = fit.r_squared
    return HurstCurve(q_grid=surface.q_grid, h=h, stderr=stderr, r2=r2)


def analyze_pair(x_values: np.ndarray, y_values: np.ndarray,
                 config: DmaConfig) -> tuple[FluctuationSurface, HurstCurve]:
    """End-to-end scaling analysis of one return pair."""
    x_values = np.asarray(x_values, dtype=np.float64)
    y_values = np.asarray(y_values, dtype=np.float64)
    if x_values.size != y_values.size:
        raise DmaError("series lengths differ")
    config.validate_for_length(x_values.size)
    if config.use_profile:
        zx, zy = profile(x_values), profile(y_values)
    else:
        zx, zy = x_values, y_values
    surface = fluctuation_surface(zx, zy, config)
    return surface, hurst_curve(surface)
