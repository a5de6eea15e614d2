"""Exact-enumeration laboratory for the sparse spiked tensor model."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ConfigError,
    HypothesisSpace,
    HypothesisSpaceTooLarge,
    LambdaScale,
    Mode,
    Observation,
    ProblemConfig,
    SparseSignal,
    enumerate_supports,
    generate_instance,
    signal_tensor_inner,
    tensorize,
)
from .posterior import (  # noqa: E402
    PosteriorSummary,
    cmmse_estimate,
    compute_posterior,
    mle_estimate,
    top_s,
)
