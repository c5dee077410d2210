"""Piecewise-constant denoising of 1-D signals with automated selection
of the jump penalty, a Gibbs-sampler baseline, and evaluation tooling."""

from .baselines import (CriterionKind, SelectionError, as_criterion,
                        heuristic_lambda, ic_select, ic_select_from_path,
                        mad_sigma)
from .core import (DEFAULT_SIGMA0_SQ, Hyperparameters, Segmentation,
                   as_signal, count_jumps, indicator_from_signal,
                   potts_objective, reconstruct_signal,
                   segments_from_indicator)
from .dp import PottsSolution, PrefixMoments, interval_error, solve, solve_path
from .evalkit import (SmoothingKernel, SynthConfig, anr,
                      change_point_jaccard, gaussian_kernel_default,
                      generate, jaccard_error, relative_mse, sigma_for_anr)
from .gibbs import (GibbsChain, GibbsState, SamplerError, estimators,
                    marginal_segment_loglik, neg_log_posterior, run_chain,
                    sample_amplitudes, sample_change_prob,
                    sample_indicator_site, sample_noise_variance)
from .penalty import (DegenerateCriterionError, PathEntry, PenaltyContext,
                      auto_select, full_criterion, lambda_from_prob,
                      lambda_grid, phi, prob_from_lambda, residual_variance,
                      select_from_path)

__version__ = "0.1.0"

__all__ = [
    "CriterionKind", "DegenerateCriterionError", "DEFAULT_SIGMA0_SQ",
    "GibbsChain", "GibbsState", "Hyperparameters", "PathEntry",
    "PenaltyContext", "PottsSolution", "PrefixMoments", "SamplerError",
    "Segmentation", "SelectionError", "SmoothingKernel", "SynthConfig",
    "anr", "as_criterion", "as_signal", "auto_select",
    "change_point_jaccard", "count_jumps", "estimators",
    "full_criterion", "gaussian_kernel_default", "generate",
    "heuristic_lambda", "ic_select", "ic_select_from_path",
    "indicator_from_signal",
    "interval_error", "jaccard_error", "lambda_from_prob", "lambda_grid",
    "mad_sigma", "marginal_segment_loglik", "neg_log_posterior", "phi",
    "potts_objective", "prob_from_lambda", "reconstruct_signal",
    "relative_mse", "residual_variance", "run_chain", "sample_amplitudes",
    "sample_change_prob", "sample_indicator_site", "sample_noise_variance",
    "segments_from_indicator", "select_from_path", "sigma_for_anr", "solve",
    "solve_path",
]
