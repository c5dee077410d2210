"""Automated penalty selection for the segmentation objective.

The jump penalty ``lam`` maps one-to-one to a change probability ``p``
through the hierarchical prior, and the remaining nuisance terms of the
joint posterior collect into a function ``phi(lam, sigma_sq)`` of the
penalty and the noise variance alone. Minimizing

    F(x, lam, sigma_sq) = ||y - x||^2 / (2 sigma_sq)
                          + (lam / sigma_sq) * jumps(x)
                          + phi(lam, sigma_sq)

over a penalty grid, with ``x`` the exact solver output and ``sigma_sq``
the residual-variance plug-in, selects the penalty without any oracle
knowledge of the noise level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import Hyperparameters, as_signal, count_jumps
from .dp import PottsSolution, solve_path


class DegenerateCriterionError(Exception):
    """Raised when every grid entry has zero residual variance."""


@dataclass
class PenaltyContext:
    """Sample count and hyperparameters entering the penalty."""

    n: int
    hyper: Hyperparameters

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least 2 samples")


@dataclass
class PathEntry:
    """Per-grid-value record: solution, variance plug-in, criterion value.

    ``f_value`` is +inf when the residual variance vanishes; such entries
    are never selected.
    """

    lam: float
    solution: PottsSolution
    sigma_hat_sq: float
    f_value: float


def phi(lam: float, sigma_sq: float, ctx: PenaltyContext) -> float:
    """Nuisance penalty on (lam, sigma_sq) induced by the hierarchical prior.

    Parameters
    ----------
    lam : float
        Positive jump penalty.
    sigma_sq : float
        Positive noise variance.
    ctx : PenaltyContext
        Sample count and hyperparameters.

    Returns
    -------
    float
        phi(lam, sigma_sq); finite for ratios lam/sigma_sq up to 1e6
        (the softplus term is evaluated overflow-safely).
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    if not sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    n = ctx.n
    a0 = ctx.hyper.alpha0
    a1 = ctx.hyper.alpha1
    log_2pi_s0 = math.log(2 * math.pi * ctx.hyper.sigma0_sq)
    ratio = lam / sigma_sq
    z = ratio - 0.5 * log_2pi_s0
    softplus = float(np.logaddexp(0.0, z))
    return (
        (n / 2) * math.log(2 * math.pi * sigma_sq)
        + math.log(sigma_sq)
        - ratio * (n + a0 - 2)
        + ((n + a0 - 1) / 2) * log_2pi_s0
        + (n + a0 + a1 - 3) * softplus
    )


def full_criterion(y, x, lam: float, sigma_sq: float,
                   ctx: PenaltyContext) -> float:
    """Joint selection criterion F(x, lam, sigma_sq).

    Parameters
    ----------
    y, x : array_like
        Observed signal and piecewise-constant candidate, equal lengths.
    lam, sigma_sq : float
        Penalty and noise variance; ``sigma_sq == 0`` is degenerate.
    ctx : PenaltyContext

    Returns
    -------
    float
    """
    y = as_signal(y)
    x = as_signal(x)
    if y.size != x.size:
        raise ValueError(f"length mismatch: {y.size} vs {x.size}")
    if sigma_sq == 0:
        raise DegenerateCriterionError("zero residual variance")
    resid = y - x
    ss = float(resid @ resid)
    return (0.5 * ss / sigma_sq
            + (lam / sigma_sq) * count_jumps(x)
            + phi(lam, sigma_sq, ctx))


def residual_variance(y, x_hat) -> float:
    """Residual variance plug-in ||y - x_hat||^2 / (N - 1)."""
    y = as_signal(y)
    x_hat = as_signal(x_hat)
    if y.size != x_hat.size:
        raise ValueError(f"length mismatch: {y.size} vs {x_hat.size}")
    resid = y - x_hat
    return float(resid @ resid) / (y.size - 1)


def lambda_grid(lo: float = 1e-5, hi: float = 1e5,
                count: int = 500) -> np.ndarray:
    """Log10-equispaced penalty grid with exact endpoints.

    Parameters
    ----------
    lo, hi : float
        Positive bounds, ``lo < hi``.
    count : int
        Number of grid values, at least 2.

    Returns
    -------
    numpy.ndarray
        Strictly increasing grid whose first and last entries equal the
        bounds exactly.
    """
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    if count < 2:
        raise ValueError("count must be at least 2")
    grid = np.logspace(math.log10(lo), math.log10(hi), count)
    grid[0] = lo
    grid[-1] = hi
    return grid


def prob_from_lambda(lam: float, sigma_sq: float, sigma0_sq: float) -> float:
    """Change probability corresponding to a penalty value.

    Inverts ``lam = sigma_sq * (log((1-p)/p) + 0.5*log(2*pi*sigma0_sq))``.
    """
    if not (lam > 0 and sigma_sq > 0 and sigma0_sq > 0):
        raise ValueError("lam, sigma_sq and sigma0_sq must be positive")
    z = lam / sigma_sq - 0.5 * math.log(2 * math.pi * sigma0_sq)
    return float(expit(-z))


def lambda_from_prob(p: float, sigma_sq: float, sigma0_sq: float) -> float:
    """Penalty corresponding to a change probability (inverse of
    :func:`prob_from_lambda`)."""
    if not (0 < p < 1):
        raise ValueError("p must lie in (0, 1)")
    if not (sigma_sq > 0 and sigma0_sq > 0):
        raise ValueError("sigma_sq and sigma0_sq must be positive")
    return sigma_sq * (math.log((1 - p) / p)
                       + 0.5 * math.log(2 * math.pi * sigma0_sq))


def select_from_path(y, path: list[PottsSolution],
                     ctx: PenaltyContext) -> tuple[PathEntry, list[PathEntry]]:
    """Evaluate the criterion along an already-solved path and select.

    Entries with zero residual variance get ``f_value = inf``. The chosen
    entry minimizes the finite criterion values; ties break toward the
    smaller penalty. Raises :class:`DegenerateCriterionError` when no entry
    is finite.
    """
    y = as_signal(y)
    entries = []
    for sol in path:
        s2 = residual_variance(y, sol.x_hat)
        if s2 > 0:
            f = full_criterion(y, sol.x_hat, sol.lam, s2, ctx)
        else:
            f = math.inf
        entries.append(PathEntry(lam=sol.lam, solution=sol,
                                 sigma_hat_sq=s2, f_value=f))
    chosen = None
    for e in entries:
        if math.isfinite(e.f_value) and (chosen is None
                                         or e.f_value < chosen.f_value):
            chosen = e
    if chosen is None:
        raise DegenerateCriterionError(
            "degenerate MAP: zero residual variance on all grid points")
    return chosen, entries


def auto_select(y, grid, ctx: PenaltyContext,
                method: str = "auto") -> tuple[PathEntry, list[PathEntry]]:
    """Solve along a penalty grid and pick the criterion minimizer.

    Parameters
    ----------
    y : array_like
        Observed signal; ``ctx.n`` must match its length.
    grid : array_like
        Strictly increasing positive penalty grid.
    ctx : PenaltyContext
        Sample count and hyperparameters.
    method : str
        Solver kernel choice, see :func:`potts1d.dp.solve`.

    Returns
    -------
    (PathEntry, list of PathEntry)
        The chosen entry and the full path in grid order.
    """
    y = as_signal(y)
    if ctx.n != y.size:
        raise ValueError(f"ctx.n={ctx.n} does not match signal length {y.size}")
    path = solve_path(y, grid, method=method)
    return select_from_path(y, path, ctx)
