"""k-list estimation laboratory.

Centralized k-list estimation (posterior vector quantization) against the
decentralized min-of-k MMSE benchmark, with closed-form predictions, converse
bounds and seeded Monte Carlo estimators.
"""
__version__ = "0.1.0"

from .model import GaussianModel, PowerLawErrorModel, mmse_estimate, sample_observation, sample_powerlaw_error, sample_prior
from .montecarlo import (
    DistortionEstimate,
    SlopeFit,
    SmallBallEstimate,
    estimate_d1,
    estimate_d2,
    estimate_d2_generic,
    estimate_smallball,
    fit_loglog_slope,
)
from .quantizer import Codebook, FitConfig, kmeans_fit, min_of_k_sqerr, translate_codebook
from .rng import Seed
