"""Signature-feature Lasso regression for fractional Brownian motion.

Submodules:
  fbm         fBm covariance, Volterra kernel, exact path samplers
  tensor_sig  truncated signatures, Chen products, shuffle algebra
  moment_lab  Monte Carlo signature moments vs closed-form bounds
  siglasso    design matrices, coordinate-descent Lasso, blocked CV
  experiments option-payoff Hurst sweeps
  airquality  UCI Air Quality forecasting pipeline
  cli         command-line entry point
"""

from .errors import (
    CirculantEmbeddingError,
    DomainError,
    ExactZeroMoment,
    UnsupportedRegimeError,
)
from .fbm import (
    FbmConfig,
    HurstParameter,
    MultiPath,
    c_h,
    fbm_cov,
    increment_variance,
    sample_fbm,
    sample_fbm_paths,
    volterra_kernel,
)
from .tensor_sig import (
    TruncatedSignature,
    Word,
    WordMultiset,
    chen_concat,
    path_signature,
    predictor_count,
    segment_signature,
    shuffle,
    shuffle_check,
    time_augment,
    word_index,
)

__all__ = [
    "CirculantEmbeddingError",
    "DomainError",
    "ExactZeroMoment",
    "UnsupportedRegimeError",
    "FbmConfig",
    "HurstParameter",
    "MultiPath",
    "c_h",
    "fbm_cov",
    "increment_variance",
    "sample_fbm",
    "sample_fbm_paths",
    "volterra_kernel",
    "TruncatedSignature",
    "Word",
    "WordMultiset",
    "chen_concat",
    "path_signature",
    "predictor_count",
    "segment_signature",
    "shuffle",
    "shuffle_check",
    "time_augment",
    "word_index",
]

__version__ = "0.1.0"
