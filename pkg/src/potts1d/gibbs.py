"""Gibbs sampler for the hierarchical change-point model.

The model places independent Bernoulli(p) draws on the N-1 free indicator
sites, a conjugate Gaussian prior on segment amplitudes, a scale-invariant
1/sigma^2 prior on the noise variance and a Beta(alpha0, alpha1) prior on
p. The sampler is partially collapsed: when a site is visited, the
amplitudes of the segments meeting there are integrated out of the draw,
and refreshed from their Gaussian conditional immediately afterwards so
the state stays coherent.

One sweep visits all free sites in order, then redraws every amplitude,
then the noise variance, then the change probability. Each sweep records
the state together with its negative log posterior score.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .core import (Hyperparameters, Segmentation, _as_indicator, as_signal,
                   reconstruct_signal)
from .dp import PrefixMoments, solve
from .penalty import residual_variance


class SamplerError(Exception):
    """Raised when a chain cannot be run on the given input."""


@dataclass
class GibbsState:
    """One posterior sample: indicator, amplitudes, variance, change prob."""

    r: np.ndarray
    mu: np.ndarray
    sigma_sq: float
    p: float

    def __post_init__(self):
        self.r = _as_indicator(self.r)
        self.mu = np.asarray(self.mu, dtype=np.float64)
        if self.mu.size != int(self.r.sum()):
            raise ValueError(f"{self.mu.size} amplitudes for "
                             f"{int(self.r.sum())} segments")
        if not self.sigma_sq > 0:
            raise ValueError("sigma_sq must be positive")
        if not (0 < self.p < 1):
            raise ValueError("p must lie in (0, 1)")

    @property
    def k(self) -> int:
        return self.mu.size


@dataclass
class GibbsChain:
    """Seeded sweep-by-sweep record of a sampler run.

    ``zero_scale_draws`` counts variance draws whose scale had to be
    floored because the residual vanished; it should stay 0 in practice.
    """

    samples: list[GibbsState]
    scores: np.ndarray
    seed: int
    burn_in: int
    zero_scale_draws: int = 0

    def post_burn(self) -> list[GibbsState]:
        return self.samples[self.burn_in:]


def _sigmoid(x: float) -> float:
    """Overflow-safe logistic function for scalars."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _posterior_mean_var(sum_y: float, n: int, sigma_sq: float,
                        mu0: float, sigma0_sq: float) -> tuple[float, float]:
    """Gaussian conditional (mean, variance) for one segment amplitude."""
    v_inv = n / sigma_sq + 1.0 / sigma0_sq
    v = 1.0 / v_inv
    m = v * (sum_y / sigma_sq + mu0 / sigma0_sq)
    return m, v


def marginal_segment_loglik(sum_y: float, sum_y_sq: float, n: int,
                            sigma_sq: float, mu0: float,
                            sigma0_sq: float) -> float:
    """Log marginal likelihood of one segment with its amplitude
    integrated out.

    Parameters
    ----------
    sum_y, sum_y_sq : float
        Sum and sum of squares of the segment samples.
    n : int
        Segment length, at least 1.
    sigma_sq, mu0, sigma0_sq : float
        Noise variance and amplitude-prior mean/variance.

    Returns
    -------
    float
        log of integral prod_i N(y_i; mu, sigma_sq) N(mu; mu0, sigma0_sq) dmu.
    """
    if n < 1:
        raise ValueError("segment length must be at least 1")
    if not (sigma_sq > 0 and sigma0_sq > 0):
        raise ValueError("variances must be positive")
    v_inv = n / sigma_sq + 1.0 / sigma0_sq
    m = (sum_y / sigma_sq + mu0 / sigma0_sq) / v_inv
    return (-(n / 2) * math.log(2 * math.pi * sigma_sq)
            - 0.5 * math.log(sigma0_sq * v_inv)
            - 0.5 * (sum_y_sq / sigma_sq + mu0 * mu0 / sigma0_sq
                     - m * m * v_inv))


def _site_window(ends: list[int], i: int) -> tuple[int, int, int, bool]:
    """Locate the merge/split window around site ``i``.

    Returns ``(j, lo, hi, is_cut)`` where ``j`` indexes the segment holding
    ``i``, the window covers samples ``lo..hi`` inclusive (the union of the
    two segments when ``i`` is currently a cut), and ``is_cut`` says whether
    ``i`` is a segment end in the current state.
    """
    j = bisect_left(ends, i)
    lo = ends[j - 1] + 1 if j > 0 else 0
    is_cut = ends[j] == i
    hi = ends[j + 1] if is_cut else ends[j]
    return j, lo, hi, is_cut


def _site_step(ends: list[int], mu: list[float], m1, m2, i: int,
               sigma_sq: float, logit_p: float, mu0: float,
               sigma0_sq: float, rng) -> None:
    """Collapsed draw of site ``i`` plus amplitude refresh, in place."""
    j, lo, hi, is_cut = _site_window(ends, i)
    s_all = m1[hi + 1] - m1[lo]
    q_all = m2[hi + 1] - m2[lo]
    s_left = m1[i + 1] - m1[lo]
    q_left = m2[i + 1] - m2[lo]
    s_right = s_all - s_left
    q_right = q_all - q_left
    log_odds = (logit_p
                + marginal_segment_loglik(s_left, q_left, i + 1 - lo,
                                          sigma_sq, mu0, sigma0_sq)
                + marginal_segment_loglik(s_right, q_right, hi - i,
                                          sigma_sq, mu0, sigma0_sq)
                - marginal_segment_loglik(s_all, q_all, hi + 1 - lo,
                                          sigma_sq, mu0, sigma0_sq))
    split = rng.random() < _sigmoid(log_odds)
    if split:
        m_l, v_l = _posterior_mean_var(s_left, i + 1 - lo, sigma_sq,
                                       mu0, sigma0_sq)
        m_r, v_r = _posterior_mean_var(s_right, hi - i, sigma_sq,
                                       mu0, sigma0_sq)
        draw_l = m_l + math.sqrt(v_l) * rng.standard_normal()
        draw_r = m_r + math.sqrt(v_r) * rng.standard_normal()
        if not is_cut:
            ends.insert(j, i)
            mu.insert(j, draw_l)
        else:
            mu[j] = draw_l
        mu[j + 1] = draw_r
    else:
        m_a, v_a = _posterior_mean_var(s_all, hi + 1 - lo, sigma_sq,
                                       mu0, sigma0_sq)
        draw_a = m_a + math.sqrt(v_a) * rng.standard_normal()
        if is_cut:
            ends.pop(j)
            mu.pop(j)
        mu[j] = draw_a


def _segment_stats(ends_arr: np.ndarray, m1: np.ndarray, m2: np.ndarray):
    """Per-segment (length, sum, sum of squares) from prefix moments."""
    uppers = ends_arr + 1
    lowers = np.concatenate(([0], uppers[:-1]))
    n_k = uppers - lowers
    sum_k = m1[uppers] - m1[lowers]
    sumsq_k = m2[uppers] - m2[lowers]
    return n_k, sum_k, sumsq_k


def _sse_from_stats(n_k, sum_k, sumsq_k, mu_arr) -> float:
    return float(np.sum(sumsq_k - 2.0 * mu_arr * sum_k
                        + n_k * mu_arr * mu_arr))


def _amplitude_stage(ends_arr, m1, sigma_sq, mu0, sigma0_sq, rng):
    """Fresh conditional draw of every amplitude; returns the new array."""
    uppers = ends_arr + 1
    lowers = np.concatenate(([0], uppers[:-1]))
    n_k = uppers - lowers
    sum_k = m1[uppers] - m1[lowers]
    v = 1.0 / (n_k / sigma_sq + 1.0 / sigma0_sq)
    m = v * (sum_k / sigma_sq + mu0 / sigma0_sq)
    return m + np.sqrt(v) * rng.standard_normal(n_k.size)


def _variance_draw(sse: float, n: int, rng, prior_shape: float,
                   prior_scale: float) -> tuple[float, bool]:
    """Inverse-gamma draw of the noise variance; flags a floored scale."""
    shape = prior_shape + n / 2
    scale = prior_scale + 0.5 * sse
    floored = False
    if scale < 1e-300:
        scale = 1e-300
        floored = True
    return scale / rng.standard_gamma(shape), floored


def _state_arrays(state: GibbsState):
    ends = np.flatnonzero(state.r)
    return ends, state.mu


def sample_indicator_site(state: GibbsState, y, i: int,
                          hyper: Hyperparameters, rng) -> GibbsState:
    """Draw one indicator site from its collapsed conditional.

    Parameters
    ----------
    state : GibbsState
        Current sample.
    y : array_like
        Observed signal.
    i : int
        Free site position, ``0 <= i <= N-2``; the terminal position is
        fixed at 1 and cannot be drawn.
    hyper : Hyperparameters
    rng : numpy.random.Generator

    Returns
    -------
    GibbsState
        New state with site ``i`` redrawn and the amplitudes of the
        affected segments refreshed from their conditional.
    """
    y = as_signal(y)
    if y.size != state.r.size:
        raise ValueError(f"length mismatch: {y.size} vs {state.r.size}")
    if not 0 <= i <= y.size - 2:
        raise ValueError(f"site {i} out of range; free sites are 0..{y.size - 2}")
    moments = PrefixMoments.from_signal(y)
    ends = np.flatnonzero(state.r).tolist()
    mu = state.mu.tolist()
    logit_p = math.log(state.p) - math.log1p(-state.p)
    _site_step(ends, mu, moments.m1, moments.m2, i, state.sigma_sq,
               logit_p, hyper.mu0, hyper.sigma0_sq, rng)
    r = np.zeros(y.size, dtype=np.int8)
    r[ends] = 1
    return GibbsState(r=r, mu=np.array(mu), sigma_sq=state.sigma_sq,
                      p=state.p)


def sample_amplitudes(state: GibbsState, y, hyper: Hyperparameters,
                      rng) -> GibbsState:
    """Redraw every amplitude from its Gaussian conditional."""
    y = as_signal(y)
    moments = PrefixMoments.from_signal(y)
    ends_arr, _ = _state_arrays(state)
    mu_new = _amplitude_stage(ends_arr, moments.m1, state.sigma_sq,
                              hyper.mu0, hyper.sigma0_sq, rng)
    return GibbsState(r=state.r.copy(), mu=mu_new,
                      sigma_sq=state.sigma_sq, p=state.p)


def sample_noise_variance(state: GibbsState, y, rng,
                          prior_shape: float = 0.0,
                          prior_scale: float = 0.0) -> GibbsState:
    """Redraw the noise variance from its inverse-gamma conditional.

    The defaults correspond to the scale-invariant 1/sigma^2 prior, giving
    an InverseGamma(N/2, SSE/2) conditional. A proper inverse-gamma prior
    can be supplied through ``prior_shape``/``prior_scale``; that variant
    exists for calibration testing.
    """
    y = as_signal(y)
    moments = PrefixMoments.from_signal(y)
    ends_arr, mu_arr = _state_arrays(state)
    n_k, sum_k, sumsq_k = _segment_stats(ends_arr, moments.m1, moments.m2)
    sse = _sse_from_stats(n_k, sum_k, sumsq_k, mu_arr)
    s2, _ = _variance_draw(sse, y.size, rng, prior_shape, prior_scale)
    return GibbsState(r=state.r.copy(), mu=state.mu.copy(),
                      sigma_sq=s2, p=state.p)


def sample_change_prob(state: GibbsState, hyper: Hyperparameters,
                       rng) -> GibbsState:
    """Redraw the change probability from its Beta conditional."""
    n = state.r.size
    k = state.k
    p = float(rng.beta(hyper.alpha1 + k - 1, hyper.alpha0 + n - k))
    return GibbsState(r=state.r.copy(), mu=state.mu.copy(),
                      sigma_sq=state.sigma_sq, p=p)


def neg_log_posterior(state: GibbsState, y, hyper: Hyperparameters) -> float:
    """Negative log of the joint posterior density at ``state``.

    Additive constants that depend on no sampled quantity (such as the
    Beta-prior normalization) are dropped.
    """
    if not (0 < state.p < 1):
        raise ValueError("p must lie in (0, 1)")
    if not state.sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    y = as_signal(y)
    if y.size != state.r.size:
        raise ValueError(f"length mismatch: {y.size} vs {state.r.size}")
    moments = PrefixMoments.from_signal(y)
    ends_arr, mu_arr = _state_arrays(state)
    n_k, sum_k, sumsq_k = _segment_stats(ends_arr, moments.m1, moments.m2)
    sse = _sse_from_stats(n_k, sum_k, sumsq_k, mu_arr)
    return _score(sse, mu_arr, y.size, state.sigma_sq, state.p, hyper)


def _score(sse: float, mu_arr: np.ndarray, n: int, sigma_sq: float,
           p: float, hyper: Hyperparameters) -> float:
    """Negative log posterior from sufficient statistics."""
    k = mu_arr.size
    log_2pi_s0 = math.log(2 * math.pi * hyper.sigma0_sq)
    quad = float(np.sum((mu_arr - hyper.mu0) ** 2)) / (2 * hyper.sigma0_sq)
    return (sse / (2 * sigma_sq)
            + (k - 1) * (math.log((1 - p) / p) + 0.5 * log_2pi_s0)
            + (n / 2) * math.log(2 * math.pi * sigma_sq)
            - (n - 1) * math.log(1 - p)
            + math.log(sigma_sq)
            - (hyper.alpha1 - 1) * math.log(p)
            - (hyper.alpha0 - 1) * math.log(1 - p)
            + quad
            + 0.5 * log_2pi_s0)


def _initial_state(y: np.ndarray) -> GibbsState:
    """Cheap data-driven start: a coarse solve at the heuristic penalty."""
    from .baselines import heuristic_lambda, mad_sigma

    n = y.size
    sig = mad_sigma(y) if n >= 3 else 0.0
    sol = solve(y, heuristic_lambda(n, sig * sig))
    s2 = residual_variance(y, sol.x_hat)
    if s2 <= 0:
        s2 = float(np.var(y)) or 1e-12
    k = sol.seg.k
    p = min(max(k / n, 1.0 / n), 1.0 - 1.0 / n)
    return GibbsState(r=sol.seg.indicator.copy(),
                      mu=sol.seg.amplitudes.copy(), sigma_sq=s2, p=p)


def run_chain(y, hyper: Hyperparameters, t_mc: int = 1000, seed: int = 0,
              burn_in: int | None = None,
              initial: GibbsState | None = None) -> GibbsChain:
    """Run the sampler for ``t_mc`` sweeps.

    Parameters
    ----------
    y : array_like
        Observed signal.
    hyper : Hyperparameters
    t_mc : int
        Number of sweeps, at least 2. One state and one score are recorded
        per sweep.
    seed : int
        Generator seed; identical seeds give identical chains.
    burn_in : int, optional
        Samples discarded by :func:`estimators`; defaults to ``t_mc // 2``.
    initial : GibbsState, optional
        Starting state; defaults to a coarse data-driven one.

    Returns
    -------
    GibbsChain
    """
    y = as_signal(y)
    if t_mc < 2:
        raise SamplerError("t_mc must be at least 2")
    if burn_in is None:
        burn_in = t_mc // 2
    if not 0 <= burn_in < t_mc:
        raise SamplerError("burn_in must lie in [0, t_mc)")
    n = y.size
    state0 = _initial_state(y) if initial is None else initial
    if state0.r.size != n:
        raise SamplerError("initial state length does not match the signal")
    rng = np.random.default_rng(seed)
    moments = PrefixMoments.from_signal(y)
    m1, m2 = moments.m1, moments.m2
    ends = np.flatnonzero(state0.r).tolist()
    mu = state0.mu.tolist()
    sigma_sq = float(state0.sigma_sq)
    p = float(state0.p)
    a0, a1 = hyper.alpha0, hyper.alpha1
    mu0, s0 = hyper.mu0, hyper.sigma0_sq
    samples: list[GibbsState] = []
    scores = np.empty(t_mc)
    zero_scale = 0
    for t in range(t_mc):
        logit_p = math.log(p) - math.log1p(-p)
        for i in range(n - 1):
            _site_step(ends, mu, m1, m2, i, sigma_sq, logit_p, mu0, s0, rng)
        ends_arr = np.array(ends)
        mu_arr = _amplitude_stage(ends_arr, m1, sigma_sq, mu0, s0, rng)
        mu = mu_arr.tolist()
        n_k, sum_k, sumsq_k = _segment_stats(ends_arr, m1, m2)
        sse = _sse_from_stats(n_k, sum_k, sumsq_k, mu_arr)
        sigma_sq, floored = _variance_draw(sse, n, rng, 0.0, 0.0)
        if floored:
            zero_scale += 1
        k = len(ends)
        p = float(rng.beta(a1 + k - 1, a0 + n - k))
        r = np.zeros(n, dtype=np.int8)
        r[ends_arr] = 1
        samples.append(GibbsState(r=r, mu=mu_arr, sigma_sq=sigma_sq, p=p))
        scores[t] = _score(sse, mu_arr, n, sigma_sq, p, hyper)
    return GibbsChain(samples=samples, scores=scores, seed=seed,
                      burn_in=burn_in, zero_scale_draws=zero_scale)


def estimators(chain: GibbsChain) -> tuple[np.ndarray, np.ndarray]:
    """Posterior-mode and posterior-mean reconstructions from a chain.

    Returns
    -------
    (numpy.ndarray, numpy.ndarray)
        ``x_map``: reconstruction of the best-scoring post-burn-in sample;
        ``x_mmse``: average of all post-burn-in reconstructions.
    """
    post = chain.post_burn()
    if not post:
        raise ValueError("chain has no post-burn-in samples")
    scores = chain.scores[chain.burn_in:]
    best = post[int(np.argmin(scores))]
    x_map = reconstruct_signal(Segmentation(indicator=best.r,
                                            amplitudes=best.mu))
    acc = np.zeros(post[0].r.size)
    for s in post:
        acc += reconstruct_signal(Segmentation(indicator=s.r,
                                               amplitudes=s.mu))
    return x_map, acc / len(post)
