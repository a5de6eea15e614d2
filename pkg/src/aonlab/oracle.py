"""Brute-force reference computations.

Nothing here reuses the optimized paths: tensors are built as explicit
outer products, weights use plain exponentials, and constrained
minimizers are found by listing every candidate.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .model import Mode, Observation, ProblemConfig

NAIVE_EXP_LIMIT = 50.0


class OracleCapExceeded(ValueError):
    pass


@dataclass
class OracleReport:
    name: str
    cases_run: int = 0
    max_abs_discrepancy: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, digest: str, expected, got, discrepancy: float, tol: float) -> None:
        self.cases_run += 1
        self.max_abs_discrepancy = max(self.max_abs_discrepancy, float(discrepancy))
        if not discrepancy <= tol:
            self.failures.append((digest, _plain(expected), _plain(got)))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cases_run": self.cases_run,
            "max_abs_discrepancy": self.max_abs_discrepancy,
            "failures": self.failures,
            "passed": self.passed,
        }


def _plain(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def digest(y: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(y, dtype=float).tobytes()).hexdigest()[:16]


def hypothesis_tensors(config: ProblemConfig) -> np.ndarray:
    """Every planted tensor as a row, via explicit outer products."""
    rows = []
    for support in itertools.combinations(range(config.p), config.k):
        x = np.zeros(config.p)
        for i in support:
            x[i] = 1.0 / math.sqrt(config.k)
        full = reduce(np.multiply.outer, [x] * config.d)
        if config.mode is Mode.FULL_TENSOR:
            rows.append(full.ravel())
        else:
            rows.append(np.array([full[t] for t in itertools.combinations(range(config.p), config.d)]))
    return np.array(rows)


def brute_posterior_mean(y: Observation, max_hypotheses: int = 10**4) -> np.ndarray:
    c = y.config
    if math.comb(c.p, c.k) > max_hypotheses:
        raise OracleCapExceeded(f"C({c.p},{c.k}) exceeds oracle cap {max_hypotheses}")
    w, tensors = brute_posterior_weights(y)
    mean = np.zeros(c.n)
    for wi, t in zip(w, tensors):
        mean += wi * t
    return mean


def brute_posterior_weights(y: Observation) -> tuple:
    tensors = hypothesis_tensors(y.config)
    expo = math.sqrt(y.lam) * (tensors @ y.data)
    expo = expo - expo.mean()
    if np.max(np.abs(expo)) > NAIVE_EXP_LIMIT:
        raise OracleCapExceeded("snr too large for naive exponentials")
    w = np.exp(expo)
    return w / w.sum(), tensors


def posterior_expected_sq_error(v: np.ndarray, weights: np.ndarray, tensors: np.ndarray) -> float:
    """sum_i w_i ||V - X_i||^2 by direct summation."""
    return float(sum(wi * np.sum((v - t) ** 2) for wi, t in zip(weights, tensors)))


def brute_constrained_argmin(y: Observation, s: int, max_candidates: int = 10**4, value: float | None = None) -> tuple:
    """Minimize E[||V - X||^2 | Y] over every V with s entries equal to the
    rounding level; returns (minimizer, risk).  First candidate wins ties."""
    n = y.config.n
    if math.comb(n, s) > max_candidates:
        raise OracleCapExceeded(f"C({n},{s}) exceeds oracle cap {max_candidates}")
    level = s**-0.5 if value is None else value
    weights, tensors = brute_posterior_weights(y)
    best, best_risk = None, math.inf
    for cand in itertools.combinations(range(n), s):
        v = np.zeros(n)
        v[list(cand)] = level
        risk = posterior_expected_sq_error(v, weights, tensors)
        if risk < best_risk:
            best, best_risk = v, risk
    return best, best_risk


@dataclass
class TailEstimate:
    thresholds: np.ndarray
    tails: np.ndarray
    stderrs: np.ndarray
    pairs: int

    def tail_at(self, t: float) -> float:
        """Empirical P[rho >= t] for any t (step function in t)."""
        if t <= 0:
            return 1.0
        above = self.thresholds >= t - 1e-15
        return float(self.tails[np.argmax(above)]) if above.any() else 0.0


def brute_rate_tail(config: ProblemConfig, pair_samples: int, seed: int = 0, chunk: int = 100_000) -> TailEstimate:
    """Empirical tails of the tensor overlap from independently sampled support pairs."""
    if pair_samples < 10**4:
        raise ValueError("pair_samples must be >= 10^4")
    p, k, d = config.p, config.k, config.d
    rng = np.random.default_rng(seed)
    counts = np.zeros(k + 1, dtype=np.int64)
    done = 0
    while done < pair_samples:
        m = min(chunk, pair_samples - done)
        a = np.argpartition(rng.random((m, p)), k - 1, axis=1)[:, :k] if k < p else np.tile(np.arange(p), (m, 1))
        b = np.argpartition(rng.random((m, p)), k - 1, axis=1)[:, :k] if k < p else np.tile(np.arange(p), (m, 1))
        in_a = np.zeros((m, p), dtype=bool)
        np.put_along_axis(in_a, a, True, axis=1)
        overlap = np.take_along_axis(in_a, b, axis=1).sum(axis=1)
        counts += np.bincount(overlap, minlength=k + 1)
        done += m
    thresholds = (np.arange(k + 1) / k) ** d
    tails = counts[::-1].cumsum()[::-1] / pair_samples
    stderrs = np.sqrt(tails * (1 - tails) / pair_samples)
    return TailEstimate(thresholds, tails, stderrs, pair_samples)
