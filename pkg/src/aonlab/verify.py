"""Property and oracle suites run by ``aonlab verify``.

Each suite returns an :class:`OracleReport`; sizes are kept small so the
whole set finishes in well under a minute.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from .information import rate_function
from .model import Observation, ProblemConfig, enumerate_supports, generate_instance, signal_tensor_inner, tensorize
from .oracle import (
    OracleReport,
    brute_constrained_argmin,
    brute_posterior_mean,
    brute_posterior_weights,
    brute_rate_tail,
    digest,
    posterior_expected_sq_error,
)
from .posterior import cmmse_estimate, compute_posterior, gaussian_log_likelihoods, mle_index, top_s


def sample_near_vertex(rng: np.random.Generator, n: int, s: int, count: int) -> tuple:
    """Pairs (U, V): U uniform in C_{n,s}, V in [0, s^-1/2]^n with
    ||U - V||^2 < 1/(2s).

    V is U plus a random direction of squared length below 1/(2s), clipped
    to the box; clipping cannot move V further from U since U is in the box.
    Radii are skewed toward the boundary of the ball.
    """
    level = s**-0.5
    u = np.zeros((count, n))
    idx = np.argsort(rng.random((count, n)), axis=1)[:, :s]
    np.put_along_axis(u, idx, level, axis=1)
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radius_sq = (1.0 / (2 * s)) * rng.random(count) ** 0.25
    v = np.clip(u + np.sqrt(radius_sq)[:, None] * g, 0.0, level)
    keep = np.sum((u - v) ** 2, axis=1) < 1.0 / (2 * s)
    return u[keep], v[keep]


def check_top_s_geometry(samples: int = 100_000, cases=((9, 4), (16, 4), (16, 8)), seed: int = 0) -> OracleReport:
    rep = OracleReport("top_s_geometric")
    rng = np.random.default_rng(seed)
    for n, s in cases:
        accepted = 0
        while accepted < samples:
            u, v = sample_near_vertex(rng, n, s, samples - accepted)
            out = top_s(v, s)
            bad = np.flatnonzero(np.any(out != u, axis=1))
            accepted += len(u)
            for i in bad:
                rep.failures.append((digest(v[i]), u[i].tolist(), out[i].tolist()))
        rep.cases_run += accepted
    return rep


def check_tensor_overlaps(max_p: int = 6) -> OracleReport:
    rep = OracleReport("tensor_norm_and_overlap")
    for p, k, d in itertools.product(range(2, max_p + 1), (1, 2, 3), (2, 3)):
        if k > p:
            continue
        cfg = ProblemConfig(p=p, k=k, d=d)
        space = enumerate_supports(cfg)
        tensors = [tensorize(x, d) for x in space]
        for i, (xi, ti) in enumerate(zip(space, tensors)):
            rep.record(f"norm{p},{k},{d},{i}", 1.0, float(ti @ ti), abs(ti @ ti - 1.0), 1e-12)
            for j, xj in enumerate(space):
                expected = (len(set(xi.support) & set(xj.support)) / k) ** d
                obs = Observation(tensors[j], 0.0, cfg)
                got = signal_tensor_inner(xi.support, obs)
                rep.record(f"pair{p},{k},{d},{i},{j}", expected, got, abs(got - expected), 1e-12)
    return rep


def check_min_distance(max_n: int = 10, max_s: int = 4) -> OracleReport:
    rep = OracleReport("constraint_set_min_distance")
    for n in range(2, max_n + 1):
        for s in range(1, min(max_s, n - 1) + 1):
            pts = []
            for cand in itertools.combinations(range(n), s):
                v = np.zeros(n)
                v[list(cand)] = s**-0.5
                pts.append(v)
            pts = np.array(pts)
            gram = pts @ pts.T
            sq = np.diag(gram)[:, None] + np.diag(gram)[None, :] - 2 * gram
            off = sq[~np.eye(len(pts), dtype=bool)]
            got = float(off.min())
            rep.record(f"n{n}s{s}", 2.0 / s, got, abs(got - 2.0 / s), 1e-12)
    return rep


def _random_betas(rng, count, hi=2.0):
    return rng.uniform(0.0, hi, count)


def check_posterior_mean(cases: int = 50, seed: int = 1) -> OracleReport:
    rep = OracleReport("brute_posterior_mean")
    rng = np.random.default_rng(seed)
    for p, k, d in ((4, 2, 2), (5, 2, 3), (4, 4, 2)):
        base = ProblemConfig(p=p, k=k, d=d, seed=seed)
        space = enumerate_supports(base)
        for t, beta in enumerate(_random_betas(rng, cases)):
            y = generate_instance(base.with_beta(beta), t)
            fast = compute_posterior(y, space).mean
            slow = brute_posterior_mean(y)
            rep.record(digest(y.data), slow, fast, float(np.max(np.abs(fast - slow))), 1e-8)
    return rep


def check_constrained_argmin(cases: int = 200, seed: int = 2) -> OracleReport:
    rep = OracleReport("brute_constrained_argmin")
    rng = np.random.default_rng(seed)
    for p, k, d, count in ((2, 1, 2, 20), (3, 2, 2, cases)):
        base = ProblemConfig(p=p, k=k, d=d, seed=seed)
        space = enumerate_supports(base)
        for t, beta in enumerate(_random_betas(rng, count)):
            y = generate_instance(base.with_beta(beta), t)
            _, best_risk = brute_constrained_argmin(y, base.s)
            weights, tensors = brute_posterior_weights(y)
            fast_risk = posterior_expected_sq_error(cmmse_estimate(y, space), weights, tensors)
            rep.record(digest(y.data), best_risk, fast_risk, abs(fast_risk - best_risk), 1e-12)
    return rep


def check_mle_forms(cases: int = 100, seed: int = 3) -> OracleReport:
    """argmax of the Gaussian log-likelihood equals argmax of <X, Y>."""
    rep = OracleReport("mle_likelihood_equivalence")
    rng = np.random.default_rng(seed)
    configs = (ProblemConfig(p=6, k=2, d=2, seed=seed), ProblemConfig(p=7, k=3, d=2, seed=seed),
               ProblemConfig(p=5, k=2, d=3, seed=seed))
    per = math.ceil(cases / len(configs))
    for base in configs:
        space = enumerate_supports(base)
        for t, beta in enumerate(rng.uniform(0.05, 2.0, per)):
            y = generate_instance(base.with_beta(beta), t)
            by_lik = int(np.argmax(gaussian_log_likelihoods(y, space)))
            by_inner = mle_index(y, space)
            post = compute_posterior(y, space)
            rep.record(digest(y.data), by_lik, by_inner, float(by_lik != by_inner), 0.0)
            rep.record(digest(y.data) + "-map", by_inner, post.map_index, float(post.map_index != by_inner), 0.0)
    return rep


def check_posterior_invariants(cases: int = 100, seed: int = 4) -> OracleReport:
    rep = OracleReport("posterior_invariants")
    rng = np.random.default_rng(seed)
    for p, k, d in ((6, 2, 2), (8, 3, 2), (6, 2, 3)):
        base = ProblemConfig(p=p, k=k, d=d, seed=seed)
        space = enumerate_supports(base)
        hi = base.s**-0.5
        for t, beta in enumerate(rng.uniform(0.0, 4.0, cases)):
            y = generate_instance(base.with_beta(beta), t)
            post = compute_posterior(y, space)
            total = float(np.exp(post.log_weights).sum())
            rep.record(digest(y.data) + "-sum", 1.0, total, abs(total - 1.0), 1e-10)
            below = max(0.0, -float(post.mean.min()))
            above = max(0.0, float(post.mean.max()) - hi)
            rep.record(digest(y.data) + "-range", [0.0, hi], [post.mean.min(), post.mean.max()], max(below, above), 1e-12)
    return rep


def check_mmse_optimality(cases: int = 100, perturbations: int = 50, seed: int = 5) -> OracleReport:
    """No perturbation of the posterior mean has smaller posterior risk."""
    rep = OracleReport("posterior_mean_optimality")
    rng = np.random.default_rng(seed)
    base = ProblemConfig(p=5, k=2, d=2, seed=seed)
    for t, beta in enumerate(rng.uniform(0.0, 2.0, cases)):
        y = generate_instance(base.with_beta(beta), t)
        weights, tensors = brute_posterior_weights(y)
        mean = weights @ tensors
        best = posterior_expected_sq_error(mean, weights, tensors)
        for _ in range(perturbations):
            v = mean + rng.uniform(0.001, 0.3) * rng.standard_normal(base.n)
            norm = np.linalg.norm(v)
            if norm > 1:
                v /= norm
            risk = posterior_expected_sq_error(v, weights, tensors)
            rep.record(digest(v), best, risk, max(0.0, best - risk), 1e-12)
    return rep


def check_rate_tails(pairs: int = 200_000, seed: int = 6) -> OracleReport:
    """Exact hypergeometric tails agree with sampled pairs within 3 binomial stderrs."""
    rep = OracleReport("brute_rate_tail")
    for p, k, d in ((4, 2, 2), (10, 2, 2), (12, 3, 3), (20, 3, 2)):
        cfg = ProblemConfig(p=p, k=k, d=d)
        rf = rate_function(cfg)
        est = brute_rate_tail(cfg, pairs, seed=seed)
        exact = np.exp(rf.tail_log_probs)
        for m in range(k + 1):
            se = math.sqrt(exact[m] * (1 - exact[m]) / pairs)
            gap = abs(est.tails[m] - exact[m])
            rep.record(f"p{p}k{k}d{d}m{m}", float(exact[m]), float(est.tails[m]), gap, 3 * se + 1e-15)
    return rep


SUITES: dict[str, Callable[[], OracleReport]] = {
    "top_s_geometric": check_top_s_geometry,
    "tensor_norm_and_overlap": check_tensor_overlaps,
    "constraint_set_min_distance": check_min_distance,
    "brute_posterior_mean": check_posterior_mean,
    "brute_constrained_argmin": check_constrained_argmin,
    "mle_likelihood_equivalence": check_mle_forms,
    "posterior_invariants": check_posterior_invariants,
    "posterior_mean_optimality": check_mmse_optimality,
    "brute_rate_tail": check_rate_tails,
}


def run_all() -> list:
    return [suite() for suite in SUITES.values()]
