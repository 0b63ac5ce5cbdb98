"""Sampling library for censored mixed-noise inverse problems.

Blended surrogate likelihood with exact derivatives, smooth box priors, a
drift-corrected RMSProp-preconditioned MALA kernel, a chromatic Gibbs
multiple-try Metropolis kernel, KS-distance blend calibration, chain
diagnostics, and an experiment CLI.
"""
from .errors import ConfigurationError, NumericalError
from .likelihood import (
    LikelihoodBlend,
    NoiseModel,
    RegimeMoments,
    additive_moments,
    blend_weight,
    blended_channel_terms,
    log_likelihood_channel,
    log_likelihood_total,
    multiplicative_moments,
    regime_moments,
    smoothstep_Q,
)
from .priors import (
    PriorConfig,
    ValidityBox,
    laplacian_penalty,
    log_prior,
    quartic_penalty,
    sample_generalized_normal_quartic,
    sample_smooth_indicator_1d,
    uniform_section_weight,
)
from .kernels import (
    HybridConfig,
    MtmConfig,
    PmalaConfig,
    SamplerState,
    chromatic_schedule,
    drift_candidate,
    drift_iterate,
    hybrid_sampler,
    mtm_step,
    mtm_weights,
    neighbor_subset_proposal,
    pmala_step,
    preconditioner,
    resume_hybrid_sampler,
    rmsprop_update,
)
from .records import ChainRecord
from .diagnostics import ChainStats, ess, mode_occupancy, summarize

__version__ = "0.1.0"

__all__ = [
    "ChainRecord",
    "ChainStats",
    "ConfigurationError",
    "HybridConfig",
    "LikelihoodBlend",
    "MtmConfig",
    "NoiseModel",
    "NumericalError",
    "PmalaConfig",
    "PriorConfig",
    "RegimeMoments",
    "SamplerState",
    "ValidityBox",
    "additive_moments",
    "blend_weight",
    "blended_channel_terms",
    "chromatic_schedule",
    "drift_candidate",
    "drift_iterate",
    "ess",
    "hybrid_sampler",
    "laplacian_penalty",
    "log_likelihood_channel",
    "log_likelihood_total",
    "log_prior",
    "mode_occupancy",
    "mtm_step",
    "mtm_weights",
    "multiplicative_moments",
    "neighbor_subset_proposal",
    "pmala_step",
    "preconditioner",
    "quartic_penalty",
    "regime_moments",
    "resume_hybrid_sampler",
    "rmsprop_update",
    "sample_generalized_normal_quartic",
    "sample_smooth_indicator_1d",
    "smoothstep_Q",
    "summarize",
    "uniform_section_weight",
]
