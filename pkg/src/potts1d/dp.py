"""Exact minimization of the penalized least-squares segmentation objective.

For a fixed penalty ``lam`` the global minimizer of
``0.5*||y - x||^2 + lam * jumps(x)`` over piecewise-constant ``x`` is found
by dynamic programming over the start of the last segment:

    B[0] = -lam
    B[t] = min_l B[l] + lam + 0.5 * err(l, t)    for 0 <= l < t

where ``err(l, t)`` is the squared error of samples ``l..t-1`` about their
mean. Two implementations are provided: a dense O(N^2) reference and a
pruned path that discards candidate starts once they can no longer win.
Both produce identical arrays bit for bit; the pruned one is compiled with
numba when available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Segmentation, as_signal, indicator_from_signal

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


@dataclass
class PrefixMoments:
    """Cumulative first and second moments enabling O(1) interval errors.

    ``m1[t]`` is the sum of the first t samples, ``m2[t]`` the sum of their
    squares, with ``m1[0] == m2[0] == 0``.
    """

    m1: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_signal(cls, y) -> "PrefixMoments":
        y = np.ascontiguousarray(y, dtype=np.float64)
        if y.ndim != 1 or y.size == 0:
            raise ValueError("need a non-empty 1-D sample array")
        m1 = np.zeros(y.size + 1)
        m2 = np.zeros(y.size + 1)
        np.cumsum(y, out=m1[1:])
        np.cumsum(y * y, out=m2[1:])
        return cls(m1=m1, m2=m2)

    @property
    def n(self) -> int:
        return self.m1.size - 1


def interval_error(moments: PrefixMoments, first: int, last: int) -> float:
    """Squared error of ``y[first-1 .. last-1]`` about its mean.

    Parameters
    ----------
    moments : PrefixMoments
        Prefix moments of the underlying samples.
    first, last : int
        1-based inclusive endpoints, ``1 <= first <= last <= N``.

    Returns
    -------
    float
        Sum of squared deviations from the interval mean; tiny negative
        values arising from cancellation are clamped to 0.
    """
    n = moments.n
    if not (1 <= first <= last <= n):
        raise IndexError(f"interval ({first}, {last}) out of range for N={n}")
    d1 = moments.m1[last] - moments.m1[first - 1]
    d2 = moments.m2[last] - moments.m2[first - 1]
    err = d2 - d1 * d1 / (last - first + 1)
    return err if err > 0.0 else 0.0


@dataclass
class PottsSolution:
    """Exact minimizer of the segmentation objective at one penalty value."""

    x_hat: np.ndarray
    seg: Segmentation
    lam: float
    objective: float


def _bellman_reference(m1: np.ndarray, m2: np.ndarray, lam: float):
    """Dense O(N^2) Bellman recursion; returns (B, prev)."""
    n = m1.size - 1
    B = np.empty(n + 1)
    B[0] = -lam
    prev = np.zeros(n + 1, dtype=np.int64)
    lengths = np.arange(n, 0, -1, dtype=np.float64)
    for t in range(1, n + 1):
        d1 = m1[t] - m1[:t]
        d2 = m2[t] - m2[:t]
        err = d2 - d1 * d1 / lengths[n - t:]
        cand = B[:t] + lam + 0.5 * np.maximum(err, 0.0)
        # ties broken toward the largest segment start
        l = t - 1 - int(np.argmin(cand[::-1]))
        B[t] = cand[l]
        prev[t] = l
    return B, prev


@njit(cache=True)
def _bellman_pruned(m1: np.ndarray, m2: np.ndarray, lam: float):
    """Bellman recursion with candidate pruning; bit-identical to the
    reference because every surviving candidate is evaluated with the same
    expressions in the same order."""
    n = m1.size - 1
    B = np.empty(n + 1)
    B[0] = -lam
    prev = np.zeros(n + 1, dtype=np.int64)
    cand = np.empty(n + 1, dtype=np.int64)
    cand[0] = 0
    ncand = 1
    for t in range(1, n + 1):
        best = np.inf
        best_l = 0
        for j in range(ncand):
            l = cand[j]
            d1 = m1[t] - m1[l]
            d2 = m2[t] - m2[l]
            err = d2 - d1 * d1 / (t - l)
            if err < 0.0:
                err = 0.0
            v = B[l] + lam + 0.5 * err
            if v <= best:
                best = v
                best_l = l
        B[t] = best
        prev[t] = best_l
        # A start l whose unpenalized cost already exceeds B[t] stays beaten
        # at every later t' (interval errors are superadditive), so it can be
        # dropped. The slack protects candidates that are equal up to
        # rounding, keeping the recursion exact.
        slack = 1e-10 * (1.0 + abs(best))
        keep = 0
        for j in range(ncand):
            l = cand[j]
            d1 = m1[t] - m1[l]
            d2 = m2[t] - m2[l]
            err = d2 - d1 * d1 / (t - l)
            if err < 0.0:
                err = 0.0
            if B[l] + 0.5 * err <= best + slack:
                cand[keep] = l
                keep += 1
        cand[keep] = t
        ncand = keep + 1
    return B, prev


def _backtrack(prev: np.ndarray) -> list[tuple[int, int]]:
    """Recover half-open segment bounds from the argmin table."""
    bounds = []
    t = prev.size - 1
    while t > 0:
        l = int(prev[t])
        bounds.append((l, t))
        t = l
    bounds.reverse()
    return bounds


def _solution_from_tables(y, moments, B, prev, lam) -> PottsSolution:
    bounds = _backtrack(prev)
    m1 = moments.m1
    amps = np.array([(m1[b] - m1[a]) / (b - a) for a, b in bounds])
    lengths = np.array([b - a for a, b in bounds])
    x_hat = np.repeat(amps, lengths)
    r = np.zeros(y.size, dtype=np.int8)
    for _, b in bounds:
        r[b - 1] = 1
    seg = Segmentation(indicator=r, amplitudes=amps)
    return PottsSolution(x_hat=x_hat, seg=seg, lam=float(lam),
                         objective=float(B[-1]))


def solve(y, lam: float, method: str = "auto") -> PottsSolution:
    """Globally minimize the segmentation objective at one penalty value.

    Parameters
    ----------
    y : array_like
        Observed signal (finite, length >= 2).
    lam : float
        Non-negative jump penalty. At 0 the identity is optimal and no
        recursion runs.
    method : {"auto", "reference", "pruned"}
        "reference" runs the dense O(N^2) recursion, "pruned" the
        accelerated one; "auto" picks "pruned" when numba is importable.

    Returns
    -------
    PottsSolution
        Exact minimizer with amplitudes equal to segment means of ``y``.
    """
    y = as_signal(y)
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValueError("lam must be finite and non-negative")
    if lam == 0.0:
        r = indicator_from_signal(y)
        seg = Segmentation(indicator=r, amplitudes=y[np.flatnonzero(r)])
        return PottsSolution(x_hat=y.copy(), seg=seg, lam=0.0, objective=0.0)
    moments = PrefixMoments.from_signal(y)
    B, prev = _run_bellman(moments, lam, method)
    return _solution_from_tables(y, moments, B, prev, lam)


def _run_bellman(moments: PrefixMoments, lam: float, method: str):
    if method == "auto":
        method = "pruned" if _HAVE_NUMBA else "reference"
    if method == "reference":
        return _bellman_reference(moments.m1, moments.m2, lam)
    if method == "pruned":
        return _bellman_pruned(moments.m1, moments.m2, lam)
    raise ValueError(f"unknown method {method!r}")


def solve_path(y, grid, method: str = "auto") -> list[PottsSolution]:
    """Solve along an increasing penalty grid.

    Parameters
    ----------
    y : array_like
        Observed signal.
    grid : array_like
        Strictly increasing sequence of positive penalties.
    method : str
        Passed through to :func:`solve`'s kernel choice.

    Returns
    -------
    list of PottsSolution
        One solution per grid value, in grid order. Jump counts are
        non-increasing along the path.
    """
    y = as_signal(y)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if not np.all(grid > 0):
        raise ValueError("grid values must be positive")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly increasing")
    moments = PrefixMoments.from_signal(y)
    out = []
    for lam in grid:
        B, prev = _run_bellman(moments, float(lam), method)
        out.append(_solution_from_tables(y, moments, B, prev, float(lam)))
    return out
