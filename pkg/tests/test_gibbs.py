import math

import numpy as np
import pytest
from scipy.stats import invgamma, kstest, norm

from _calibration import GewekeSpec, marg_quad
from potts1d import (
    GibbsState,
    Hyperparameters,
    PenaltyContext,
    SamplerError,
    estimators,
    full_criterion,
    lambda_from_prob,
    marginal_segment_loglik,
    neg_log_posterior,
    reconstruct_signal,
    run_chain,
    sample_amplitudes,
    sample_change_prob,
    sample_indicator_site,
    sample_noise_variance,
)
from potts1d.core import Segmentation


def random_state(rng, n):
    r = np.zeros(n, dtype=np.int8)
    r[-1] = 1
    free = rng.random(n - 1) < 0.3
    r[:-1][free] = 1
    k = int(r.sum())
    return GibbsState(r=r, mu=rng.normal(size=k),
                      sigma_sq=float(10 ** rng.uniform(-1, 1)),
                      p=float(rng.uniform(0.05, 0.9)))


class TestMarginalSegmentLoglik:
    def test_frozen_value(self):
        # frozen from a 50-digit evaluation, cross-checked by quadrature
        got = marginal_segment_loglik(sum_y=1.3, sum_y_sq=1.41, n=3,
                                      sigma_sq=0.5, mu0=0.3, sigma0_sq=2.0)
        assert got == pytest.approx(-3.850338738274099398, rel=1e-12)

    def test_two_zeros_unit_variances(self):
        got = marginal_segment_loglik(0.0, 0.0, 2, 1.0, 0.0, 1.0)
        assert got == pytest.approx(-math.log(2 * math.pi)
                                    - 0.5 * math.log(3.0), rel=1e-14)

    def test_single_sample_is_convolved_normal(self):
        # with one sample the marginal is N(mu0, sigma_sq + sigma0_sq)
        for y0, s2, mu0, s0 in [(0.7, 0.5, 0.0, 2.0), (-1.2, 1.5, 0.4, 0.3)]:
            got = marginal_segment_loglik(y0, y0 * y0, 1, s2, mu0, s0)
            want = float(norm.logpdf(y0, mu0, math.sqrt(s2 + s0)))
            assert got == pytest.approx(want, rel=1e-12)

    def test_matches_quadrature(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            n = int(rng.integers(1, 6))
            ys = rng.normal(scale=1.5, size=n)
            s2 = float(10 ** rng.uniform(-1, 0.5))
            mu0 = float(rng.normal())
            s0 = float(10 ** rng.uniform(-0.5, 1))
            got = marginal_segment_loglik(float(ys.sum()),
                                          float((ys * ys).sum()),
                                          n, s2, mu0, s0)
            assert got == pytest.approx(marg_quad(ys, s2, mu0, s0), rel=1e-12)

    def test_tight_prior_pins_amplitude(self):
        # as sigma0_sq -> 0 the amplitude collapses onto mu0; 1e-8 keeps
        # the sufficient-statistic form clear of cancellation noise
        ys = np.array([0.2, 0.9, 0.5])
        mu0, s2 = 0.6, 0.8
        got = marginal_segment_loglik(float(ys.sum()), float((ys**2).sum()),
                                      3, s2, mu0, 1e-8)
        want = float(np.sum(norm.logpdf(ys, mu0, math.sqrt(s2))))
        assert got == pytest.approx(want, abs=1e-6)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            marginal_segment_loglik(0.0, 0.0, 0, 1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            marginal_segment_loglik(0.0, 0.0, 1, 0.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            marginal_segment_loglik(0.0, 0.0, 1, 1.0, 0.0, -1.0)


class TestSampleAmplitudes:
    def test_conditional_moments(self):
        # two singleton segments at y = (2, -2) with unit variances give
        # amplitude conditionals N(1, 1/2) and N(-1, 1/2)
        y = np.array([2.0, -2.0])
        hyper = Hyperparameters(sigma0_sq=1.0)
        state = GibbsState(r=np.array([1, 1], dtype=np.int8),
                           mu=np.zeros(2), sigma_sq=1.0, p=0.5)
        rng = np.random.default_rng(11)
        m = 30_000
        draws = np.empty((m, 2))
        for t in range(m):
            draws[t] = sample_amplitudes(state, y, hyper, rng).mu
        se_mean = math.sqrt(0.5 / m)
        assert abs(draws[:, 0].mean() - 1.0) < 3 * se_mean
        assert abs(draws[:, 1].mean() + 1.0) < 3 * se_mean
        se_var = math.sqrt(2.0 / (m - 1)) * 0.5
        assert abs(draws[:, 0].var(ddof=1) - 0.5) < 3 * se_var
        assert abs(draws[:, 1].var(ddof=1) - 0.5) < 3 * se_var

    def test_preserves_other_fields(self):
        y = np.array([1.0, 2.0, 3.0])
        hyper = Hyperparameters()
        state = GibbsState(r=np.array([0, 1, 1], dtype=np.int8),
                           mu=np.array([1.5, 3.0]), sigma_sq=0.7, p=0.2)
        out = sample_amplitudes(state, y, hyper, np.random.default_rng(0))
        assert np.array_equal(out.r, state.r)
        assert out.sigma_sq == state.sigma_sq
        assert out.p == state.p
        assert out.mu.size == 2


class TestSampleNoiseVariance:
    def setup_method(self):
        self.y = np.array([1.0, 3.0, 2.0, 0.0])
        self.state = GibbsState(r=np.array([0, 0, 0, 1], dtype=np.int8),
                                mu=np.array([1.0]), sigma_sq=1.0, p=0.5)
        # SSE = 0 + 4 + 1 + 1 = 6, so the conditional under the
        # scale-invariant prior is InverseGamma(2, 3)

    def test_distribution(self):
        rng = np.random.default_rng(12)
        draws = np.array([sample_noise_variance(self.state, self.y,
                                                rng).sigma_sq
                          for _ in range(20_000)])
        res = kstest(draws, invgamma(a=2.0, scale=3.0).cdf)
        assert res.pvalue > 1e-3

    def test_proper_prior_mean(self):
        # shape 3, scale 2 prior combines to InverseGamma(5, 5): mean 5/4
        rng = np.random.default_rng(13)
        m = 20_000
        draws = np.array([sample_noise_variance(self.state, self.y, rng,
                                                prior_shape=3.0,
                                                prior_scale=2.0).sigma_sq
                          for _ in range(m)])
        var = 25.0 / (16.0 * 3.0)
        assert abs(draws.mean() - 1.25) < 3 * math.sqrt(var / m)

    def test_preserves_other_fields(self):
        out = sample_noise_variance(self.state, self.y,
                                    np.random.default_rng(0))
        assert np.array_equal(out.r, self.state.r)
        assert np.array_equal(out.mu, self.state.mu)
        assert out.p == self.state.p
        assert out.sigma_sq > 0


class TestSampleChangeProb:
    def test_conditional_moments(self):
        # K=3 of N=6 with a Beta(5, 2) prior gives Beta(4, 8)
        state = GibbsState(r=np.array([1, 0, 0, 1, 0, 1], dtype=np.int8),
                           mu=np.zeros(3), sigma_sq=1.0, p=0.5)
        hyper = Hyperparameters(alpha0=5.0, alpha1=2.0)
        rng = np.random.default_rng(14)
        m = 20_000
        draws = np.array([sample_change_prob(state, hyper, rng).p
                          for _ in range(m)])
        mean = 4.0 / 12.0
        var = 4.0 * 8.0 / (144.0 * 13.0)
        assert abs(draws.mean() - mean) < 3 * math.sqrt(var / m)
        se_var = math.sqrt(2.0 / (m - 1)) * var  # crude but adequate scale
        assert abs(draws.var(ddof=1) - var) < 5 * se_var


class TestSampleIndicatorSite:
    def test_split_frequency_matches_collapsed_odds(self):
        y = np.array([0.5, 2.0, 2.2])
        s2, p, mu0, s0 = 0.4, 0.3, 0.0, 2.0
        hyper = Hyperparameters(sigma0_sq=s0, mu0=mu0)
        state = GibbsState(r=np.array([0, 0, 1], dtype=np.int8),
                           mu=np.array([float(y.mean())]), sigma_sq=s2, p=p)
        log_odds = (math.log(p / (1 - p))
                    + marg_quad(y[:1], s2, mu0, s0)
                    + marg_quad(y[1:], s2, mu0, s0)
                    - marg_quad(y, s2, mu0, s0))
        q = 1.0 / (1.0 + math.exp(-log_odds))
        rng = np.random.default_rng(15)
        m = 20_000
        hits = 0
        for _ in range(m):
            out = sample_indicator_site(state, y, 0, hyper, rng)
            assert out.mu.size == out.r.sum()
            hits += int(out.r[0])
        freq = hits / m
        assert abs(freq - q) < 3 * math.sqrt(q * (1 - q) / m)

    def test_site_bounds(self):
        y = np.array([1.0, 2.0, 3.0])
        state = GibbsState(r=np.array([0, 0, 1], dtype=np.int8),
                           mu=np.array([2.0]), sigma_sq=1.0, p=0.5)
        hyper = Hyperparameters()
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_indicator_site(state, y, 2, hyper, rng)  # terminal site
        with pytest.raises(ValueError):
            sample_indicator_site(state, y, -1, hyper, rng)
        with pytest.raises(ValueError):
            sample_indicator_site(state, np.ones(4), 0, hyper, rng)


class TestNegLogPosterior:
    def reference(self, state, y, hyper):
        """Independent density bookkeeping from scipy building blocks."""
        x = reconstruct_signal(Segmentation(indicator=state.r,
                                            amplitudes=state.mu))
        n = y.size
        k = state.k
        s = math.sqrt(state.sigma_sq)
        loglik = float(np.sum(norm.logpdf(y, x, s)))
        log_r = (k - 1) * math.log(state.p) + (n - k) * math.log(1 - state.p)
        log_mu = float(np.sum(norm.logpdf(state.mu, hyper.mu0,
                                          math.sqrt(hyper.sigma0_sq))))
        log_s2 = -math.log(state.sigma_sq)
        log_p = ((hyper.alpha1 - 1) * math.log(state.p)
                 + (hyper.alpha0 - 1) * math.log(1 - state.p))
        return -(loglik + log_r + log_mu + log_s2 + log_p)

    def test_matches_reference(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            n = int(rng.integers(3, 40))
            y = rng.normal(size=n)
            hyper = Hyperparameters(alpha0=float(rng.uniform(0.5, 3)),
                                    alpha1=float(rng.uniform(0.5, 3)),
                                    sigma0_sq=float(10 ** rng.uniform(-1, 2)),
                                    mu0=float(rng.normal()))
            state = random_state(rng, n)
            got = neg_log_posterior(state, y, hyper)
            assert got == pytest.approx(self.reference(state, y, hyper),
                                        rel=1e-12)

    def test_domain_errors(self):
        y = np.ones(3)
        state = GibbsState(r=np.array([0, 0, 1], dtype=np.int8),
                           mu=np.array([1.0]), sigma_sq=1.0, p=0.5)
        with pytest.raises(ValueError):
            neg_log_posterior(state, np.ones(5), Hyperparameters())


class TestPosteriorIdentity:
    def test_score_decomposes_through_penalty(self):
        # at the penalty implied by the change probability, the negative
        # log posterior equals data term + penalty term + nuisance penalty
        # + the amplitude-prior quadratic
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(4, 60))
            y = rng.normal(size=n)
            hyper = Hyperparameters(alpha0=float(rng.uniform(0.5, 3)),
                                    alpha1=float(rng.uniform(0.5, 3)),
                                    sigma0_sq=float(10 ** rng.uniform(0, 2)),
                                    mu0=float(rng.normal()))
            state = random_state(rng, n)
            lam = lambda_from_prob(state.p, state.sigma_sq, hyper.sigma0_sq)
            if lam <= 0:
                continue
            x = reconstruct_signal(Segmentation(indicator=state.r,
                                                amplitudes=state.mu))
            ctx = PenaltyContext(n=n, hyper=hyper)
            quad_mu = (float(np.sum((state.mu - hyper.mu0) ** 2))
                       / (2 * hyper.sigma0_sq))
            want = full_criterion(y, x, lam, state.sigma_sq, ctx) + quad_mu
            got = neg_log_posterior(state, y, hyper)
            assert got == pytest.approx(want, rel=1e-9)


class TestRunChain:
    def test_deterministic(self):
        rng = np.random.default_rng(18)
        y = np.repeat([0.0, 4.0], 15) + 0.5 * rng.standard_normal(30)
        hyper = Hyperparameters()
        a = run_chain(y, hyper, t_mc=50, seed=7)
        b = run_chain(y, hyper, t_mc=50, seed=7)
        assert np.array_equal(a.scores, b.scores)
        assert np.array_equal(a.samples[-1].r, b.samples[-1].r)
        assert np.array_equal(a.samples[-1].mu, b.samples[-1].mu)
        assert a.samples[-1].sigma_sq == b.samples[-1].sigma_sq
        assert a.samples[-1].p == b.samples[-1].p
        c = run_chain(y, hyper, t_mc=50, seed=8)
        assert not np.array_equal(a.scores, c.scores)

    def test_bookkeeping_and_invariants(self):
        rng = np.random.default_rng(19)
        y = rng.normal(size=12)
        chain = run_chain(y, Hyperparameters(), t_mc=40, seed=0)
        assert len(chain.samples) == 40
        assert chain.scores.shape == (40,)
        assert chain.burn_in == 20
        assert len(chain.post_burn()) == 20
        assert chain.zero_scale_draws == 0
        for s in chain.samples:
            assert s.r[-1] == 1
            assert s.mu.size == int(s.r.sum())
            assert s.sigma_sq > 0
            assert 0 < s.p < 1
        for s, score in zip(chain.samples, chain.scores):
            assert math.isfinite(score)
        # stored scores match the recomputed posterior
        idx = 35
        assert chain.scores[idx] == pytest.approx(
            neg_log_posterior(chain.samples[idx], y, Hyperparameters()),
            rel=1e-12)

    def test_two_segment_posterior(self):
        rng = np.random.default_rng(20)
        x_true = np.repeat([0.0, 5.0], 20)
        y = x_true + 0.3 * rng.standard_normal(40)
        chain = run_chain(y, Hyperparameters(), t_mc=300, seed=1)
        ks = [s.k for s in chain.post_burn()]
        assert np.bincount(ks).argmax() == 2
        _, x_mmse = estimators(chain)
        assert np.mean((x_mmse - x_true) ** 2) < 0.05

    def test_argument_validation(self):
        y = np.ones(5)
        hyper = Hyperparameters()
        with pytest.raises(SamplerError):
            run_chain(y, hyper, t_mc=1)
        with pytest.raises(SamplerError):
            run_chain(y, hyper, t_mc=10, burn_in=10)
        with pytest.raises(SamplerError):
            run_chain(y, hyper, t_mc=10, burn_in=-1)
        bad = GibbsState(r=np.array([0, 1], dtype=np.int8),
                         mu=np.array([1.0]), sigma_sq=1.0, p=0.5)
        with pytest.raises(SamplerError):
            run_chain(y, hyper, t_mc=10, initial=bad)

    def test_engine_matches_public_ops(self):
        # one engine sweep must replay exactly through the public one-shot
        # operations when both consume the same generator stream
        rng_data = np.random.default_rng(21)
        y = np.repeat([1.0, -2.0, 0.5], 8) + 0.4 * rng_data.standard_normal(24)
        hyper = Hyperparameters(alpha0=2.0, alpha1=1.5, sigma0_sq=5.0,
                                mu0=0.3)
        r0 = np.zeros(24, dtype=np.int8)
        r0[[7, 15, 23]] = 1
        init = GibbsState(r=r0, mu=np.array([1.1, -1.9, 0.6]),
                          sigma_sq=0.8, p=0.25)
        seed = 99
        chain = run_chain(y, hyper, t_mc=2, seed=seed, burn_in=0,
                          initial=init)
        engine_state = chain.samples[0]

        rng = np.random.default_rng(seed)
        state = init
        for i in range(24 - 1):
            state = sample_indicator_site(state, y, i, hyper, rng)
        state = sample_amplitudes(state, y, hyper, rng)
        state = sample_noise_variance(state, y, rng)
        state = sample_change_prob(state, hyper, rng)

        assert np.array_equal(state.r, engine_state.r)
        assert np.array_equal(state.mu, engine_state.mu)
        assert state.sigma_sq == engine_state.sigma_sq
        assert state.p == engine_state.p
        assert chain.scores[0] == neg_log_posterior(engine_state, y, hyper)

    def test_estimators_definition(self):
        rng = np.random.default_rng(22)
        y = rng.normal(size=15)
        chain = run_chain(y, Hyperparameters(), t_mc=30, seed=3, burn_in=10)
        x_map, x_mmse = estimators(chain)
        post = chain.post_burn()
        best = post[int(np.argmin(chain.scores[10:]))]
        want_map = reconstruct_signal(Segmentation(indicator=best.r,
                                                   amplitudes=best.mu))
        assert np.array_equal(x_map, want_map)
        stack = np.stack([reconstruct_signal(Segmentation(indicator=s.r,
                                                          amplitudes=s.mu))
                          for s in post])
        np.testing.assert_allclose(x_mmse, stack.mean(axis=0), rtol=1e-12)


class TestGewekeCalibration:
    """Successive-conditional simulator check.

    Alternating (a) a full sweep of the public transition operators and
    (b) regeneration of the data from the current state must leave the
    prior over parameters invariant. Chain moments are compared against
    analytic prior moments with batch-means standard errors.
    """

    def test_chain_preserves_prior(self):
        rows = GewekeSpec().run(t_total=4000, t_burn=400, seed=23)
        assert len(rows) == 6
        for name, got, want, se in rows:
            assert abs(got - want) < 4 * se + 1e-12, (
                f"{name}: chain {got:.5f} vs prior {want:.5f} (se {se:.5f})")
