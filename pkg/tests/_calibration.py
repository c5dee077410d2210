"""Shared helpers for sampler calibration tests.

Holds the independent quadrature oracle for the collapsed segment
likelihood and a successive-conditional simulator harness: alternating a
full sweep of the public transition operators with regeneration of the
data must leave the parameter prior invariant, so chain moments can be
compared against analytic prior moments.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from potts1d import (
    GibbsState,
    Hyperparameters,
    reconstruct_signal,
    sample_amplitudes,
    sample_change_prob,
    sample_indicator_site,
    sample_noise_variance,
)
from potts1d.core import Segmentation


def marg_quad(ys, sigma_sq, mu0, sigma0_sq):
    """Numerical integral of the collapsed segment likelihood.

    Integrates over a window of 14 posterior standard deviations around
    the peak so the quadrature resolves the integrand to full precision.
    """
    ys = np.asarray(ys, dtype=float)
    sd = math.sqrt(sigma_sq)

    def integrand(m):
        return (math.exp(float(np.sum(norm.logpdf(ys, m, sd))))
                * norm.pdf(m, mu0, math.sqrt(sigma0_sq)))

    n = ys.size
    v = 1.0 / (n / sigma_sq + 1.0 / sigma0_sq)
    center = v * (float(ys.sum()) / sigma_sq + mu0 / sigma0_sq)
    w = 14 * math.sqrt(v)
    val, _ = quad(integrand, center - w, center + w,
                  epsabs=1e-14, epsrel=1e-12, limit=300)
    return math.log(val)


def batch_se(x, n_batches=40):
    """Batch-means standard error of the mean of a correlated series."""
    m = len(x) // n_batches
    means = np.array([np.mean(x[i * m:(i + 1) * m])
                      for i in range(n_batches)])
    return float(means.std(ddof=1) / math.sqrt(n_batches))


@dataclass
class GewekeSpec:
    """Model sizes and (fully proper) prior for the simulator check."""

    n: int = 20
    alpha0: float = 8.0
    alpha1: float = 2.0
    mu0: float = 0.5
    sigma0_sq: float = 3.0
    var_shape: float = 6.0
    var_scale: float = 5.0

    def hyper(self) -> Hyperparameters:
        return Hyperparameters(alpha0=self.alpha0, alpha1=self.alpha1,
                               sigma0_sq=self.sigma0_sq, mu0=self.mu0)

    def prior_draw(self, rng) -> GibbsState:
        p = float(rng.beta(self.alpha1, self.alpha0))
        p = min(max(p, 1e-12), 1 - 1e-12)
        r = np.zeros(self.n, dtype=np.int8)
        r[-1] = 1
        r[:-1][rng.random(self.n - 1) < p] = 1
        k = int(r.sum())
        mu = self.mu0 + math.sqrt(self.sigma0_sq) * rng.standard_normal(k)
        sigma_sq = self.var_scale / rng.standard_gamma(self.var_shape)
        return GibbsState(r=r, mu=mu, sigma_sq=sigma_sq, p=p)

    def regen_data(self, state: GibbsState, rng) -> np.ndarray:
        x = reconstruct_signal(Segmentation(indicator=state.r,
                                            amplitudes=state.mu))
        return x + math.sqrt(state.sigma_sq) * rng.standard_normal(self.n)

    def transition(self, state: GibbsState, y, rng) -> GibbsState:
        hyper = self.hyper()
        for i in range(self.n - 1):
            state = sample_indicator_site(state, y, i, hyper, rng)
        state = sample_amplitudes(state, y, hyper, rng)
        state = sample_noise_variance(state, y, rng,
                                      prior_shape=self.var_shape,
                                      prior_scale=self.var_scale)
        state = sample_change_prob(state, hyper, rng)
        return state

    def prior_moments(self) -> dict:
        """Analytic prior moments matched against chain averages."""
        ab = self.alpha1 + self.alpha0
        ep = self.alpha1 / ab
        ep2 = self.alpha1 * (self.alpha1 + 1) / (ab * (ab + 1))
        m = self.n - 1
        # K = 1 + B with B | p ~ Binomial(m, p), so
        # E[K^2] = 1 + 2 m E[p] + m E[p] - m E[p^2] + m^2 E[p^2]
        ek = 1 + m * ep
        ek2 = 1 + 2 * m * ep + m * ep - m * ep2 + m * m * ep2
        es2 = self.var_scale / (self.var_shape - 1)
        es4 = self.var_scale ** 2 / ((self.var_shape - 1)
                                     * (self.var_shape - 2))
        return {"E[p]": ep, "E[p^2]": ep2, "E[K]": ek, "E[K^2]": ek2,
                "E[s2]": es2, "E[s2^2]": es4}

    def run(self, t_total: int, t_burn: int, seed: int) -> list:
        """Run the simulator; returns (name, chain_mean, target, se) rows."""
        rng = np.random.default_rng(seed)
        state = self.prior_draw(rng)
        y = self.regen_data(state, rng)
        ps = np.empty(t_total)
        s2s = np.empty(t_total)
        ks = np.empty(t_total)
        for t in range(t_total):
            state = self.transition(state, y, rng)
            y = self.regen_data(state, rng)
            ps[t] = state.p
            s2s[t] = state.sigma_sq
            ks[t] = state.k
        ps, s2s, ks = ps[t_burn:], s2s[t_burn:], ks[t_burn:]
        want = self.prior_moments()
        series = {"E[p]": ps, "E[p^2]": ps ** 2, "E[K]": ks,
                  "E[K^2]": ks ** 2, "E[s2]": s2s, "E[s2^2]": s2s ** 2}
        return [(name, float(series[name].mean()), want[name],
                 batch_se(series[name])) for name in want]
