"""Sparse Bernoulli tensor-PCA problem: configuration, hypothesis space, instances.

A planted signal is a k-subset of ``range(p)``; the vector takes the value
``k**-0.5`` on the subset.  Observations are ``Y = sqrt(lam) * x^{(x)d} + Z``
flattened to 1-d arrays, either the full ``p**d`` tensor or only the entries
on strictly increasing index tuples (hypergraph layout).
"""

from __future__ import annotations

import enum
import itertools
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property, lru_cache
from typing import Iterator, Optional

import numpy as np

DEFAULT_MAX_HYPOTHESES = 10**6
RNG_NAME = "numpy.random.Philox(SeedSequence(seed, spawn_key=(trial_index,)))"


class ConfigError(ValueError):
    """Invalid problem configuration."""


class HypothesisSpaceTooLarge(ConfigError):
    """Raised when C(p, k) exceeds the enumeration cap."""


class Mode(str, enum.Enum):
    FULL_TENSOR = "FullTensor"
    UPPER_TRIANGULAR = "UpperTriangular"


class LambdaScale(str, enum.Enum):
    TWO_LOG_M = "TwoLogM"
    LOG_M = "LogM"


@dataclass(frozen=True)
class ProblemConfig:
    p: int
    k: int
    d: int = 2
    mode: Mode = Mode.FULL_TENSOR
    lambda_scale: LambdaScale = LambdaScale.TWO_LOG_M
    beta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "lambda_scale", LambdaScale(self.lambda_scale))
        for name in ("p", "k", "d", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if not 1 <= self.k <= self.p:
            raise ConfigError(f"k must satisfy 1 <= k <= p (p={self.p}), got k={self.k}")
        if self.d < 2:
            raise ConfigError(f"d must be >= 2, got {self.d}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        beta = float(self.beta)
        if not math.isfinite(beta) or beta < 0:
            raise ConfigError(f"beta must be a finite nonnegative number, got {self.beta!r}")
        object.__setattr__(self, "beta", beta)

    @property
    def num_hypotheses(self) -> int:
        return math.comb(self.p, self.k)

    @property
    def n(self) -> int:
        """Length of the flattened observation."""
        if self.mode is Mode.FULL_TENSOR:
            return self.p**self.d
        return math.comb(self.p, self.d)

    @property
    def s(self) -> int:
        """Number of nonzero entries of a planted tensor."""
        if self.mode is Mode.FULL_TENSOR:
            return self.k**self.d
        return math.comb(self.k, self.d)

    @property
    def entry_value(self) -> float:
        return self.k ** (-self.d / 2)

    @property
    def signal_norm_sq(self) -> float:
        """Squared norm of every planted tensor (1 in FullTensor mode)."""
        if self.mode is Mode.FULL_TENSOR:
            return 1.0
        return self.s * self.entry_value**2

    @property
    def lambda_n(self) -> float:
        log_m = math.log(self.num_hypotheses)
        return 2.0 * log_m if self.lambda_scale is LambdaScale.TWO_LOG_M else log_m

    @property
    def snr(self) -> float:
        """Effective snr ``beta * lambda_n``."""
        return self.beta * self.lambda_n

    def with_beta(self, beta: float) -> "ProblemConfig":
        return replace(self, beta=beta)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mode"] = self.mode.value
        out["lambda_scale"] = self.lambda_scale.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProblemConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class SparseSignal:
    support: tuple
    p: int
    k: int

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        object.__setattr__(self, "support", support)
        if len(support) != self.k:
            raise ConfigError(f"support has {len(support)} entries, expected k={self.k}")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ConfigError(f"support must be strictly increasing, got {support}")
        if support and not (0 <= support[0] and support[-1] < self.p):
            raise ConfigError(f"support indices must lie in [0, {self.p}), got {support}")

    def vector(self) -> np.ndarray:
        x = np.zeros(self.p)
        x[list(self.support)] = self.k**-0.5
        return x


@dataclass(frozen=True, eq=False)
class Observation:
    data: np.ndarray
    lam: float
    config: ProblemConfig
    truth: Optional[SparseSignal] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != (self.config.n,):
            raise ConfigError(
                f"observation length {data.shape} does not match mode "
                f"{self.config.mode.value} (expected ({self.config.n},))"
            )
        object.__setattr__(self, "data", data)

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return (
            self.config == other.config
            and self.lam == other.lam
            and self.truth == other.truth
            and np.array_equal(self.data, other.data)
        )


@lru_cache(maxsize=8)
def _upper_rank_table(p: int, d: int) -> np.ndarray:
    """Dense ``p**d`` table mapping a full flat index to its rank among
    strictly increasing tuples (lexicographic), or -1."""
    table = np.full(p**d, -1, dtype=np.int64)
    strides = p ** np.arange(d - 1, -1, -1)
    combos = np.array(list(itertools.combinations(range(p), d)), dtype=np.int64).reshape(-1, d)
    table[combos @ strides] = np.arange(len(combos))
    table.setflags(write=False)
    return table


def _support_cells(supports: np.ndarray, config: ProblemConfig) -> np.ndarray:
    """Flat indices of the nonzero entries for each support row."""
    p, k, d = config.p, config.k, config.d
    strides = p ** np.arange(d - 1, -1, -1, dtype=np.int64)
    if config.mode is Mode.FULL_TENSOR:
        pos = np.array(list(itertools.product(range(k), repeat=d)), dtype=np.int64)
        return supports[:, pos] @ strides
    pos = np.array(list(itertools.combinations(range(k), d)), dtype=np.int64).reshape(-1, d)
    if len(pos) == 0:
        return np.zeros((len(supports), 0), dtype=np.int64)
    table = _upper_rank_table(p, d)
    return table[supports[:, pos] @ strides]


@dataclass(frozen=True, eq=False)
class HypothesisSpace:
    """All C(p, k) supports in lexicographic order.

    ``cells[i]`` holds the flat observation indices where hypothesis ``i``
    is nonzero, so inner products with an observation cost O(M * s).
    """

    config: ProblemConfig
    supports: np.ndarray = field(repr=False)
    cells: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return len(self.supports)

    def __len__(self) -> int:
        return self.count

    def __iter__(self) -> Iterator[SparseSignal]:
        for row in self.supports:
            yield SparseSignal(tuple(row), self.config.p, self.config.k)

    def signal(self, index: int) -> SparseSignal:
        return SparseSignal(tuple(self.supports[index]), self.config.p, self.config.k)

    def index_of(self, support) -> int:
        return rank_support(support, self.config.p)

    def inner_products(self, y: np.ndarray) -> np.ndarray:
        """<X_i, Y> for every hypothesis."""
        return self.config.entry_value * y[self.cells].sum(axis=1)

    def weighted_tensor(self, weights: np.ndarray) -> np.ndarray:
        """sum_i weights[i] * tensorize(x_i) as a flat array."""
        c = self.config
        per_cell = np.repeat(weights * c.entry_value, self.cells.shape[1])
        return np.bincount(self.cells.ravel(), weights=per_cell, minlength=c.n)

    @cached_property
    def prior_mean(self) -> np.ndarray:
        return self.weighted_tensor(np.full(self.count, 1.0 / self.count))


def enumerate_supports(
    config: ProblemConfig, max_hypotheses: int = DEFAULT_MAX_HYPOTHESES
) -> HypothesisSpace:
    m = config.num_hypotheses
    if m > max_hypotheses:
        raise HypothesisSpaceTooLarge(
            f"hypothesis space too large: C({config.p},{config.k}) = {m} > cap {max_hypotheses}"
        )
    if config.mode is Mode.UPPER_TRIANGULAR and config.d > config.k:
        warnings.warn(
            f"UpperTriangular mode with d={config.d} > k={config.k}: planted tensors are all zero",
            stacklevel=2,
        )
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(config.p), config.k)),
        dtype=np.int64,
        count=m * config.k,
    )
    supports = flat.reshape(m, config.k)
    return HypothesisSpace(config, supports, _support_cells(supports, config))


def rank_support(support, p: int) -> int:
    """Lexicographic rank of a sorted support among all k-subsets of range(p)."""
    support = list(support)
    k = len(support)
    rank = 0
    prev = -1
    for j, v in enumerate(support):
        for u in range(prev + 1, v):
            rank += math.comb(p - u - 1, k - j - 1)
        prev = v
    return rank


def tensorize(x: SparseSignal, d: int, mode: Mode | str = Mode.FULL_TENSOR) -> np.ndarray:
    mode = Mode(mode)
    if mode is Mode.UPPER_TRIANGULAR and d > x.k:
        warnings.warn(f"UpperTriangular tensor with d={d} > k={x.k} is identically zero", stacklevel=2)
    config = ProblemConfig(p=x.p, k=x.k, d=d, mode=mode)
    out = np.zeros(config.n)
    cells = _support_cells(np.array([x.support], dtype=np.int64), config)[0]
    out[cells] = config.entry_value
    return out


def signal_tensor_inner(support, y: Observation) -> float:
    """k^{-d/2} times the sum of Y over the support's tuples, O(k^d)."""
    c = y.config
    support = np.asarray(support, dtype=np.int64)
    if support.shape != (c.k,):
        raise ConfigError(f"support size {support.size} does not match k={c.k}")
    cells = _support_cells(support[None, :], c)[0]
    return float(c.entry_value * y.data[cells].sum())


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Independent counter-based stream for one trial."""
    if trial_index < 0:
        raise ConfigError(f"trial_index must be nonnegative, got {trial_index}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial_index),))
    return np.random.Generator(np.random.Philox(ss))


def generate_instance(
    config: ProblemConfig,
    trial_index: int,
    *,
    snr: float | None = None,
    noiseless: bool = False,
) -> Observation:
    """Draw a uniform planted support and Gaussian noise for one trial.

    The stream depends only on ``(config.seed, trial_index)``, so the same
    trial at different ``beta`` shares its truth and noise.  ``snr``
    overrides ``config.snr``; ``noiseless`` zeroes the noise (test hook).
    """
    rng = trial_rng(config.seed, trial_index)
    support = np.sort(rng.choice(config.p, size=config.k, replace=False))
    truth = SparseSignal(tuple(support), config.p, config.k)
    noise = rng.standard_normal(config.n)
    lam = config.snr if snr is None else float(snr)
    if lam < 0:
        raise ConfigError(f"snr must be nonnegative, got {lam}")
    if noiseless:
        noise = np.zeros(config.n)
    y = math.sqrt(lam) * tensorize(truth, config.d, config.mode) + noise
    return Observation(y, lam, config, truth)
