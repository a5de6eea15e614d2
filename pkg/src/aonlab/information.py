"""Overlap rate function, likelihood ratio, KL curve, I-MMSE and Omega checks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .model import (
    DEFAULT_MAX_HYPOTHESES,
    ConfigError,
    HypothesisSpace,
    Mode,
    Observation,
    ProblemConfig,
    enumerate_supports,
    generate_instance,
)
from .posterior import compute_posterior

RATE_FIXTURE = "rate_constant.json"


@dataclass(frozen=True, eq=False)
class RateFunction:
    config: ProblemConfig
    thresholds: np.ndarray
    tail_log_probs: np.ndarray
    rate_values: np.ndarray
    overlap_log_pmf: np.ndarray

    def rate(self, t: float) -> float:
        """r_n at an arbitrary t; a step function between attainable overlaps."""
        if t <= 0:
            return 0.0
        if t > 1:
            return math.inf
        idx = int(np.searchsorted(self.thresholds, t - 1e-15, side="left"))
        return float(self.rate_values[idx])


@dataclass(frozen=True, eq=False)
class KlCurve:
    config: ProblemConfig
    betas: np.ndarray
    kl_over_lambda: np.ndarray
    stderrs: np.ndarray
    samples_per_point: int
    per_sample: np.ndarray = field(repr=False)

    def diff_stderr(self, i: int, j: int) -> float:
        """Stderr of the difference between two grid points (paired samples)."""
        return float(np.std(self.per_sample[j] - self.per_sample[i], ddof=1) / math.sqrt(self.samples_per_point))


def _log_comb(n: int, r: int) -> float:
    if r < 0 or r > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


def overlap_log_pmf(p: int, k: int) -> np.ndarray:
    """ln P[|S & S'| = j], j = 0..k, for independent uniform k-subsets."""
    log_m = _log_comb(p, k)
    return np.array([_log_comb(k, j) + _log_comb(p - k, k - j) - log_m for j in range(k + 1)])


def rate_function(config: ProblemConfig) -> RateFunction:
    if config.mode is not Mode.FULL_TENSOR:
        raise ConfigError("rate_function uses FullTensor overlap semantics")
    m_count = config.num_hypotheses
    if m_count == 1:
        raise ConfigError("rate function is undefined for a single hypothesis (log M = 0)")
    k, d = config.k, config.d
    log_pmf = overlap_log_pmf(config.p, k)
    thresholds = (np.arange(k + 1) / k) ** d
    # P[rho >= t_m] = P[j >= m]; reverse cumulative log-sum-exp
    tails = np.array([logsumexp(log_pmf[m:]) for m in range(k + 1)])
    tails[0] = 0.0
    tails[k] = -math.log(m_count)
    rates = -tails / math.log(m_count)
    return RateFunction(config, thresholds, tails, rates, log_pmf)


def prior_overlap_moment(config: ProblemConfig) -> float:
    """E<X, X'> = ||E X||^2 for independent prior draws (FullTensor)."""
    log_pmf = overlap_log_pmf(config.p, config.k)
    j = np.arange(config.k + 1)
    return float(np.sum(np.exp(log_pmf) * (j / config.k) ** config.d))


@dataclass
class RateCheck:
    min_margin_aon: float
    argmin_aon: float
    min_margin_sqrt: float
    argmin_sqrt: float
    constant: float
    margins_aon: list
    margins_sqrt: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_rate_hypotheses(rf: RateFunction, lambda_n: float, constant: Optional[float] = None) -> RateCheck:
    """Margins r(t) - 2t/(1+t) and r(t) - (sqrt(t) - C/lambda_n) at attainable t > 0.

    r is constant on (t_{m-1}, t_m] while both comparison curves increase,
    so the attainable thresholds are the worst points.
    """
    if constant is None:
        constant = load_rate_constant()
    t = rf.thresholds[1:]
    r = rf.rate_values[1:]
    aon = r - 2 * t / (1 + t)
    sq = r - (np.sqrt(t) - constant / lambda_n)
    ia, isq = int(np.argmin(aon)), int(np.argmin(sq))
    return RateCheck(
        min_margin_aon=float(aon[ia]),
        argmin_aon=float(t[ia]),
        min_margin_sqrt=float(sq[isq]),
        argmin_sqrt=float(t[isq]),
        constant=float(constant),
        margins_aon=aon.tolist(),
        margins_sqrt=sq.tolist(),
    )


def rate_grid(ps: Iterable[int] = range(10, 21), ks=(2, 3), ds=(2, 3), **kw) -> list:
    return [ProblemConfig(p=p, k=k, d=d, **kw) for p in ps for k in ks for d in ds]


def required_rate_constant(configs: Sequence[ProblemConfig]) -> float:
    """Smallest C with r(t) >= sqrt(t) - C/lambda_n over all configs."""
    need = -math.inf
    for c in configs:
        rf = rate_function(c)
        t = rf.thresholds[1:]
        need = max(need, float(np.max(c.lambda_n * (np.sqrt(t) - rf.rate_values[1:]))))
    return need


def calibrate_rate_constant(configs: Sequence[ProblemConfig] | None = None, step: float = 0.05) -> dict:
    """Pilot over the reference grid; result is rounded up to ``step``."""
    configs = rate_grid() if configs is None else configs
    need = required_rate_constant(configs)
    value = math.ceil(need / step + 1e-9) * step
    return {
        "constant": round(value, 10),
        "required": need,
        "lambda_scale": configs[0].lambda_scale.value,
        "grid": sorted({(c.p, c.k, c.d) for c in configs}),
    }


def load_rate_constant() -> float:
    text = resources.files("aonlab").joinpath("data", RATE_FIXTURE).read_text()
    return float(json.loads(text)["constant"])


def log_likelihood_ratio(y: Observation, space: HypothesisSpace, lam: Optional[float] = None) -> float:
    """ln Z(Y) = ln mean_i exp(sqrt(lam) <X_i, Y> - lam ||X_i||^2 / 2)."""
    lam = y.lam if lam is None else float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"lambda must be finite and nonnegative, got {lam}")
    if not np.all(np.isfinite(y.data)):
        raise ValueError("observation contains non-finite entries")
    scores = math.sqrt(lam) * space.inner_products(y.data) - 0.5 * lam * space.config.signal_norm_sq
    return float(logsumexp(scores) - math.log(space.count))


def _space(config: ProblemConfig, max_hypotheses: int) -> HypothesisSpace:
    return enumerate_supports(config, max_hypotheses)


def kl_curve(
    config: ProblemConfig,
    betas: Sequence[float],
    samples: int,
    max_hypotheses: int = DEFAULT_MAX_HYPOTHESES,
) -> KlCurve:
    """D(Q_{beta lambda_n} || Q_0) / lambda_n estimated as the mean of ln Z
    over planted instances.  Sample ``t`` uses trial stream ``t`` at every
    beta, so grid differences are paired."""
    betas = np.asarray(betas, dtype=float)
    if np.any(betas < 0):
        raise ConfigError("betas must be nonnegative")
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    space = _space(config, max_hypotheses)
    scale = config.lambda_n
    per = np.zeros((len(betas), samples))
    for b, beta in enumerate(betas):
        cb = config.with_beta(float(beta))
        if cb.snr == 0:
            continue
        for t in range(samples):
            per[b, t] = log_likelihood_ratio(generate_instance(cb, t), space) / scale
    est = per.mean(axis=1)
    se = per.std(axis=1, ddof=1) / math.sqrt(samples) if samples > 1 else np.full(len(betas), np.nan)
    return KlCurve(config, betas, est, se, samples, per)


def kl_properties(curve: KlCurve, sigmas: float = 3.0) -> dict:
    """Nonnegativity, monotonicity, 1/2-Lipschitz and the lower bound at beta=1."""
    c = curve.config
    est, se = curve.kl_over_lambda, curve.stderrs
    out = {
        "nonnegative": bool(np.all(est >= -sigmas * se)),
        "nondecreasing": True,
        "lipschitz": True,
        "adjacent": [],
    }
    for i in range(len(est) - 1):
        dse = float(curve.diff_stderr(i, i + 1))
        diff = float(est[i + 1] - est[i])
        half = 0.5 * abs(curve.betas[i + 1] - curve.betas[i])
        row = {"beta_lo": float(curve.betas[i]), "beta_hi": float(curve.betas[i + 1]), "diff": diff, "stderr": dse}
        row["monotone_margin"] = diff + sigmas * dse
        row["lipschitz_margin"] = half + sigmas * dse - abs(diff)
        out["nondecreasing"] &= bool(row["monotone_margin"] >= 0)
        out["lipschitz"] &= bool(row["lipschitz_margin"] >= 0)
        out["adjacent"].append(row)
    at_one = np.flatnonzero(np.isclose(curve.betas, 1.0))
    if at_one.size:
        i = int(at_one[0])
        bound = 0.5 - math.log(c.num_hypotheses) / c.lambda_n
        out["lower_bound_margin"] = float(est[i] - bound + sigmas * se[i])
        out["lower_bound"] = bool(out["lower_bound_margin"] >= 0)
    return out


@dataclass
class Report:
    """JSON record shared by the information-theoretic checks."""

    operation: str
    config: dict
    inputs: dict
    estimate: float
    stderr: float
    exact_value: Optional[float] = None
    margin: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "operation": self.operation,
            "config": self.config,
            "inputs": self.inputs,
            "estimate": self.estimate,
            "stderr": self.stderr,
        }
        if self.exact_value is not None:
            out["exact_value"] = self.exact_value
        if self.margin is not None:
            out["margin"] = self.margin
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def i_mmse_check(
    config: ProblemConfig,
    beta: float,
    h: float = 0.1,
    samples: int = 20_000,
    scheme: str = "central",
    tolerance: float = 0.05,
    sigmas: float = 3.0,
    max_hypotheses: int = DEFAULT_MAX_HYPOTHESES,
) -> Report:
    """Compare the Monte-Carlo MMSE at ``beta`` with 1 - 2 d/dbeta (D / lambda_n).

    All three evaluations reuse trial streams ``0..samples-1`` so the
    discrepancy is averaged per sample and its stderr is the paired one.
    With a single hypothesis lambda_n = 0; beta is then read as raw snr.
    """
    if scheme not in ("central", "forward"):
        raise ValueError(f"unknown difference scheme {scheme!r}")
    if h <= 0:
        raise ValueError("h must be positive")
    if scheme == "central" and beta - h < 0:
        raise ValueError(f"central difference needs beta - h >= 0, got beta={beta}, h={h}")
    if samples < 2:
        raise ValueError("samples must be >= 2")
    space = _space(config, max_hypotheses)
    scale = config.lambda_n if config.num_hypotheses > 1 else 1.0
    lo, hi = (beta - h, beta + h) if scheme == "central" else (beta, beta + h)
    sq_err = np.empty(samples)
    slope = np.empty(samples)
    for t in range(samples):
        y = generate_instance(config, t, snr=beta * scale)
        post = compute_posterior(y, space)
        x = y.truth
        diff = post.mean - _planted(space, x)
        sq_err[t] = diff @ diff
        y_hi = generate_instance(config, t, snr=hi * scale)
        y_lo = generate_instance(config, t, snr=lo * scale)
        slope[t] = (log_likelihood_ratio(y_hi, space) - log_likelihood_ratio(y_lo, space)) / (scale * (hi - lo))
    rhs = 1.0 - 2.0 * slope
    disc = sq_err - rhs
    d_mean = float(disc.mean())
    d_se = float(disc.std(ddof=1) / math.sqrt(samples))
    return Report(
        operation="i_mmse_check",
        config=config.with_beta(beta).to_dict(),
        inputs={"beta": beta, "h": h, "samples": samples, "scheme": scheme, "lambda_unit": scale},
        estimate=d_mean,
        stderr=d_se,
        margin=tolerance + sigmas * d_se - abs(d_mean),
        extra={
            "mmse": float(sq_err.mean()),
            "mmse_stderr": float(sq_err.std(ddof=1) / math.sqrt(samples)),
            "i_mmse_rhs": float(rhs.mean()),
            "i_mmse_rhs_stderr": float(rhs.std(ddof=1) / math.sqrt(samples)),
            "tolerance": tolerance,
        },
    )


def _planted(space: HypothesisSpace, x) -> np.ndarray:
    out = np.zeros(space.config.n)
    out[space.cells[space.index_of(x.support)]] = space.config.entry_value
    return out


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def omega_event_probability(config: ProblemConfig, c: float, samples: int, sigmas: float = 3.0) -> Report:
    """Frequency of |<X, Y> - sqrt(lam)| <= C for the planted X versus 2 Phi(C) - 1."""
    if c <= 0:
        raise ValueError("C must be positive")
    if config.mode is not Mode.FULL_TENSOR:
        raise ConfigError("the Omega event assumes unit-norm planted tensors (FullTensor)")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    space = _space(config, DEFAULT_MAX_HYPOTHESES)
    root = math.sqrt(config.snr)
    hits = 0
    for t in range(samples):
        y = generate_instance(config, t)
        cells = space.cells[space.index_of(y.truth.support)]
        pivot = config.entry_value * y.data[cells].sum() - root
        hits += abs(pivot) <= c
    freq = hits / samples
    exact = 2.0 * normal_cdf(c) - 1.0
    se = math.sqrt(exact * (1.0 - exact) / samples)
    return Report(
        operation="omega_event_probability",
        config=config.to_dict(),
        inputs={"C": c, "samples": samples},
        estimate=freq,
        stderr=se,
        exact_value=exact,
        margin=sigmas * se - abs(freq - exact),
    )
