"""Reference penalty-selection methods used for comparison.

Two families: information criteria evaluated over the distinct
segmentations appearing along a penalty path, and a closed-form heuristic
penalty fed by a median-based noise estimate.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .core import as_signal
from .dp import PottsSolution, solve_path


class SelectionError(Exception):
    """Raised when no admissible candidate segmentation exists."""


class CriterionKind(enum.Enum):
    AIC = "aic"
    SIC = "sic"
    AICC = "aicc"
    SICC = "sicc"


def as_criterion(kind) -> CriterionKind:
    """Accept a CriterionKind or its name in either case."""
    if isinstance(kind, CriterionKind):
        return kind
    try:
        return CriterionKind(str(kind).lower())
    except ValueError:
        raise ValueError(f"unknown criterion {kind!r}") from None


def mad_sigma(y) -> float:
    """Median-based noise standard deviation estimate.

    Works on first differences so that the piecewise-constant trend only
    contributes at the (few) jump positions, which the median ignores:
    sigma_hat = median(|d - median(d)|) / (0.6745 * sqrt(2)) with
    d the first differences. The sqrt(2) rescales difference noise back
    to sample noise.
    """
    y = as_signal(y)
    if y.size < 3:
        raise ValueError("need at least 3 samples")
    d = np.diff(y)
    mad = float(np.median(np.abs(d - np.median(d))))
    return mad / (0.6745 * math.sqrt(2.0))


def heuristic_lambda(n: int, sigma_sq_hat: float) -> float:
    """Closed-form penalty 0.25 * sqrt(N) * sigma_sq_hat."""
    if n < 1:
        raise ValueError("n must be positive")
    if not sigma_sq_hat >= 0:
        raise ValueError("sigma_sq_hat must be non-negative")
    return 0.25 * math.sqrt(n) * sigma_sq_hat


def _criterion_value(kind: CriterionKind, n: int, rss: float, k: int) -> float:
    fit = n * math.log(rss / n)
    if kind is CriterionKind.AIC:
        return fit + 2 * k
    if kind is CriterionKind.SIC:
        return fit + k * math.log(n)
    if kind is CriterionKind.AICC:
        return fit + 2 * k * n / (n - k - 1)
    return fit + k * math.log(n) * n / (n - k - 1)


def ic_select_from_path(y, path: list[PottsSolution],
                        kind) -> PottsSolution:
    """Pick the criterion minimizer among a path's distinct segmentations.

    Candidates with zero residual or with K >= N-1 segments are excluded
    (the criteria are undefined or meaningless there). Ties break toward
    fewer segments; among equal-K duplicates the first path occurrence is
    kept.
    """
    kind = as_criterion(kind)
    y = as_signal(y)
    n = y.size
    seen = set()
    candidates = []
    for sol in path:
        key = sol.seg.indicator.tobytes()
        if key in seen:
            continue
        seen.add(key)
        k = sol.seg.k
        if k >= n - 1:
            continue
        resid = y - sol.x_hat
        rss = float(resid @ resid)
        if rss == 0.0:
            continue
        candidates.append((k, _criterion_value(kind, n, rss, k), sol))
    if not candidates:
        raise SelectionError(f"no admissible candidate for {kind.name}")
    candidates.sort(key=lambda c: c[0])
    best = None
    for k, value, sol in candidates:
        if best is None or value < best[0]:
            best = (value, sol)
    return best[1]


def ic_select(y, grid, kind, method: str = "auto") -> PottsSolution:
    """Solve along a penalty grid and select by an information criterion.

    Parameters
    ----------
    y : array_like
        Observed signal.
    grid : array_like
        Strictly increasing positive penalty grid.
    kind : CriterionKind or str
        One of AIC, SIC, AICC, SICC.
    method : str
        Solver kernel choice, see :func:`potts1d.dp.solve`.

    Returns
    -------
    PottsSolution
        The selected solution, carrying the penalty at which its
        segmentation first appeared on the path.
    """
    path = solve_path(y, grid, method=method)
    return ic_select_from_path(y, path, kind)
