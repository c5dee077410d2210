"""Domain types and segmentation algebra for piecewise-constant signals.

A signal of length N is stored as a 1-D float array. A piecewise-constant
signal is equivalently described by a binary change indicator ``r`` of length
N together with one amplitude per segment: ``r[i] = 1`` marks position ``i``
as the last sample of its segment, and the final position always carries a 1
so that the number of segments equals ``r.sum()``.

Positions are 0-based throughout the code; segment ranges are half-open
``(start, stop)`` pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Default amplitude-prior scale, chosen so that 2*pi*sigma0^2 = 1e4.
DEFAULT_SIGMA0_SQ = 1e4 / math.tau


def as_signal(y) -> np.ndarray:
    """Validate a signal and return it as a float64 array.

    Parameters
    ----------
    y : array_like
        One-dimensional sequence of at least two finite samples.

    Returns
    -------
    numpy.ndarray
        The validated samples as a contiguous float64 array.
    """
    arr = np.ascontiguousarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"signal must be 1-D, got shape {arr.shape}")
    if arr.size < 2:
        raise ValueError(f"signal needs at least 2 samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("signal contains NaN or infinite samples")
    return arr


def _as_indicator(r) -> np.ndarray:
    """Validate a change indicator: binary entries, terminal entry 1."""
    arr = np.asarray(r)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("indicator must be a non-empty 1-D sequence")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("indicator entries must be 0 or 1")
    arr = arr.astype(np.int8)
    if arr[-1] != 1:
        raise ValueError("terminal indicator entry must be 1")
    return arr


@dataclass
class Hyperparameters:
    """Prior hyperparameters for the hierarchical model.

    ``alpha0`` and ``alpha1`` shape the Beta prior on the change probability,
    ``sigma0_sq`` and ``mu0`` are the variance and mean of the Gaussian
    amplitude prior. ``mu0`` is only used by the sampler; the automated
    penalty selection ignores it.
    """

    alpha0: float = 1.0
    alpha1: float = 1.0
    sigma0_sq: float = DEFAULT_SIGMA0_SQ
    mu0: float = 0.0

    def __post_init__(self):
        if not (self.alpha0 > 0 and self.alpha1 > 0):
            raise ValueError("alpha0 and alpha1 must be positive")
        if not self.sigma0_sq > 0:
            raise ValueError("sigma0_sq must be positive")


@dataclass
class Segmentation:
    """Change indicator plus per-segment amplitudes.

    Parameters
    ----------
    indicator : numpy.ndarray
        Binary array of length N with ``indicator[-1] == 1``.
    amplitudes : numpy.ndarray
        One value per segment, in left-to-right order; its length must
        equal ``indicator.sum()``.
    """

    indicator: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        self.indicator = _as_indicator(self.indicator)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        if self.amplitudes.ndim != 1:
            raise ValueError("amplitudes must be 1-D")
        if self.amplitudes.size != int(self.indicator.sum()):
            raise ValueError(
                f"{self.amplitudes.size} amplitudes for "
                f"{int(self.indicator.sum())} segments"
            )

    @property
    def n(self) -> int:
        return self.indicator.size

    @property
    def k(self) -> int:
        """Number of segments."""
        return self.amplitudes.size


def segments_from_indicator(r) -> list[tuple[int, int]]:
    """Decode an indicator into half-open segment ranges.

    Parameters
    ----------
    r : array_like
        Binary change indicator with terminal entry 1.

    Returns
    -------
    list of (int, int)
        Ordered ``(start, stop)`` pairs covering ``range(len(r))``; segment
        k ends at the position of the k-th 1 in ``r``.
    """
    arr = _as_indicator(r)
    stops = np.flatnonzero(arr) + 1
    starts = np.concatenate(([0], stops[:-1]))
    return list(zip(starts.tolist(), stops.tolist()))


def reconstruct_signal(seg: Segmentation) -> np.ndarray:
    """Expand a segmentation into the piecewise-constant signal it encodes."""
    stops = np.flatnonzero(seg.indicator) + 1
    lengths = np.diff(np.concatenate(([0], stops)))
    return np.repeat(seg.amplitudes, lengths)


def indicator_from_signal(x) -> np.ndarray:
    """Read the change indicator off a signal.

    Adjacent samples are compared by exact value inequality, with no
    tolerance: reconstructions of interest share one stored amplitude per
    segment, so equality is exact where it matters.
    """
    x = as_signal(x)
    r = np.empty(x.size, dtype=np.int8)
    np.not_equal(x[1:], x[:-1], out=r[:-1].view(bool))
    r[-1] = 1
    return r


def count_jumps(x: np.ndarray) -> int:
    """Number of positions where adjacent samples differ (exact inequality)."""
    return int(np.count_nonzero(x[1:] != x[:-1]))


def potts_objective(y, x, lam: float) -> float:
    """Penalized least-squares objective: 0.5*||y - x||^2 + lam * jumps(x).

    Parameters
    ----------
    y : array_like
        Observed signal.
    x : array_like
        Candidate piecewise-constant signal of the same length.
    lam : float
        Non-negative jump penalty.

    Returns
    -------
    float
    """
    y = as_signal(y)
    x = as_signal(x)
    if y.size != x.size:
        raise ValueError(f"length mismatch: {y.size} vs {x.size}")
    if not lam >= 0:
        raise ValueError("lam must be non-negative")
    resid = y - x
    return 0.5 * float(resid @ resid) + lam * count_jumps(x)
