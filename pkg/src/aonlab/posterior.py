"""Exact posterior over the enumerated supports and the four estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import (
    ConfigError,
    HypothesisSpace,
    Mode,
    Observation,
    SparseSignal,
    tensorize,
)


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    log_weights: np.ndarray
    mean: np.ndarray
    map_index: int

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


@dataclass(frozen=True, eq=False)
class EstimateBundle:
    mmse_estimate: np.ndarray
    mle_signal: SparseSignal
    cmmse_estimate: np.ndarray
    # 0-1 Bayes rule over C_{n,s} picks the posterior mode, which is the MLE.
    cmap_signal: SparseSignal


def _check(y: Observation, space: HypothesisSpace) -> None:
    if y.config.p != space.config.p or y.config.k != space.config.k or y.config.d != space.config.d:
        raise ConfigError("observation config does not match hypothesis space")
    if y.config.mode is not space.config.mode:
        raise ConfigError("observation mode does not match hypothesis space")
    if not np.all(np.isfinite(y.data)):
        raise ValueError("observation contains non-finite entries")


def compute_posterior(y: Observation, space: HypothesisSpace) -> PosteriorSummary:
    """Posterior under the uniform prior.

    The Gaussian constants and the ``-lam/2 * ||X||^2`` term are identical
    across hypotheses and drop out of the normalization.
    """
    _check(y, space)
    scores = math.sqrt(y.lam) * space.inner_products(y.data)
    log_w = scores - logsumexp(scores)
    mean = space.weighted_tensor(np.exp(log_w))
    # np.argmax returns the first maximizer, i.e. the lexicographically smallest support.
    return PosteriorSummary(log_w, mean, int(np.argmax(log_w)))


def mle_index(y: Observation, space: HypothesisSpace) -> int:
    _check(y, space)
    return int(np.argmax(space.inner_products(y.data)))


def mle_estimate(y: Observation, space: HypothesisSpace) -> SparseSignal:
    """Support maximizing the inner-product statistic (first one on ties)."""
    return space.signal(mle_index(y, space))


def top_s(v: np.ndarray, s: int, value: float | None = None) -> np.ndarray:
    """Round the ``s`` largest entries to ``s**-0.5`` and zero the rest.

    Ties go to the smaller flat index.  A 2-d input is processed row-wise.
    ``value`` replaces ``s**-0.5`` as the rounding level (hypergraph layout).
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    if not 1 <= s <= n:
        raise ValueError(f"top_s requires 1 <= s <= n, got s={s}, n={n}")
    level = s**-0.5 if value is None else value
    order = np.argsort(-v, axis=-1, kind="stable")[..., :s]
    out = np.zeros_like(v)
    np.put_along_axis(out, order, level, axis=-1)
    return out


def _constraint_level(space: HypothesisSpace) -> float | None:
    # hypergraph tensors are not unit norm; round to the planted entry value
    if space.config.mode is Mode.UPPER_TRIANGULAR:
        return space.config.entry_value
    return None


def cmmse_from_mean(mean: np.ndarray, space: HypothesisSpace) -> np.ndarray:
    return top_s(mean, space.config.s, _constraint_level(space))


def cmmse_estimate(y: Observation, space: HypothesisSpace) -> np.ndarray:
    return cmmse_from_mean(compute_posterior(y, space).mean, space)


def estimate_all(y: Observation, space: HypothesisSpace) -> EstimateBundle:
    post = compute_posterior(y, space)
    mle = mle_estimate(y, space)
    return EstimateBundle(
        mmse_estimate=post.mean,
        mle_signal=mle,
        cmmse_estimate=cmmse_from_mean(post.mean, space),
        cmap_signal=mle,
    )


def posterior_risk(v: np.ndarray, post: PosteriorSummary, space: HypothesisSpace) -> float:
    """E[||V - X||^2 | Y] = ||V||^2 - 2 <V, E[X|Y]> + ||X||^2."""
    v = np.asarray(v, dtype=float)
    return float(v @ v - 2.0 * v @ post.mean + space.config.signal_norm_sq)


def gaussian_log_likelihoods(y: Observation, space: HypothesisSpace) -> np.ndarray:
    """Full Gaussian log-likelihood ln N(Y | sqrt(lam) X_i, I) per hypothesis."""
    _check(y, space)
    c = y.config
    sq = np.empty(space.count)
    root = math.sqrt(y.lam)
    for i, support in enumerate(space.supports):
        resid = y.data - root * tensorize(SparseSignal(tuple(support), c.p, c.k), c.d, c.mode)
        sq[i] = resid @ resid
    return -0.5 * c.n * math.log(2 * math.pi) - 0.5 * sq
