"""Monte-Carlo risk sweeps over beta and their CSV / JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .model import (
    DEFAULT_MAX_HYPOTHESES,
    RNG_NAME,
    ConfigError,
    HypothesisSpace,
    ProblemConfig,
    enumerate_supports,
    generate_instance,
)
from .posterior import cmmse_from_mean, compute_posterior, mle_index

log = logging.getLogger(__name__)

CSV_HEADER = ["beta", "mep", "mep_se", "cmep", "cmep_se", "mmse", "mmse_se", "cmmse", "cmmse_se", "trials"]


@dataclass(frozen=True)
class TrialRecord:
    mle_correct: bool
    sq_err_mmse: float
    sq_err_cmmse: float


@dataclass(frozen=True)
class RiskEstimate:
    beta: float
    mep: float
    mep_se: float
    cmep: float
    cmep_se: float
    mmse: float
    mmse_se: float
    cmmse: float
    cmmse_se: float
    trials: int

    def row(self) -> list:
        return [getattr(self, name) for name in CSV_HEADER]


@dataclass(eq=False)
class SweepResult:
    config: ProblemConfig
    beta_grid: np.ndarray
    estimates: list
    inequality_report: list
    monotonicity_report: list
    metadata: dict
    per_trial: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def all_margins_ok(self) -> bool:
        return all(r["ok"] for r in self.inequality_report)


def run_trial(
    config: ProblemConfig,
    trial_index: int,
    space: HypothesisSpace | None = None,
    *,
    noiseless: bool = False,
) -> TrialRecord:
    """One instance scored by MLE exact match and both squared errors."""
    space = enumerate_supports(config) if space is None else space
    y = generate_instance(config, trial_index, noiseless=noiseless)
    truth_index = space.index_of(y.truth.support)
    truth = np.zeros(config.n)
    truth[space.cells[truth_index]] = config.entry_value

    post = compute_posterior(y, space)
    err = post.mean - truth
    cerr = cmmse_from_mean(post.mean, space) - truth
    return TrialRecord(
        mle_correct=mle_index(y, space) == truth_index,
        sq_err_mmse=float(err @ err),
        sq_err_cmmse=float(cerr @ cerr),
    )


def _trial_block(config: ProblemConfig, start: int, stop: int, max_hypotheses: int) -> np.ndarray:
    space = enumerate_supports(config, max_hypotheses)
    out = np.empty((stop - start, 3))
    for row, t in enumerate(range(start, stop)):
        rec = run_trial(config, t, space)
        out[row] = (1.0 - rec.mle_correct, rec.sq_err_mmse, rec.sq_err_cmmse)
    return out


def _blocks(trials: int, workers: int) -> list:
    edges = np.linspace(0, trials, workers + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _mean_se(x: np.ndarray) -> tuple:
    # per-trial values are stored in trial order, so the reduction is independent of workers
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(len(x)))


def _estimate(beta: float, per: np.ndarray) -> RiskEstimate:
    mep, mep_se = _mean_se(per[:, 0])
    mmse, mmse_se = _mean_se(per[:, 1])
    cmmse, cmmse_se = _mean_se(per[:, 2])
    return RiskEstimate(beta, mep, mep_se, mep, mep_se, mmse, mmse_se, cmmse, cmmse_se, len(per))


def inequality_margins(beta: float, per: np.ndarray, s: int, sigmas: float = 3.0) -> dict:
    """Estimator-inequality margins at one grid point.

    Each stderr comes from a per-trial linearization of the combined
    statistic, so correlations between the risks are accounted for.
    """
    err, mse, cmse = per[:, 0], per[:, 1], per[:, 2]
    n = len(per)
    mmse, cmmse = float(mse.mean()), float(cmse.mean())

    def se(z):
        return float(np.std(z, ddof=1) / math.sqrt(n))

    rows = {
        "markov_cmmse_cmep": ((s / 2) * cmmse - err.mean(), se((s / 2) * cmse - err)),
        "pz_cmep_cmmse": (err.mean() - 0.25 * cmmse**2, se(err - 0.5 * cmmse * cmse)),
        "pz_mep_mmse": (err.mean() - 0.25 * mmse**2, se(err - 0.5 * mmse * mse)),
    }
    rows["cmmse_vs_mmse"] = (cmmse - mmse, se(cmse - mse))
    eps = mmse + sigmas * se(mse)
    rows["mmse_to_cmmse"] = (4 * eps * s - cmmse, se(cmse))
    out = {"beta": float(beta)}
    ok = True
    for name, (value, sigma) in rows.items():
        out[name] = float(value)
        out[name + "_se"] = sigma
        ok &= value >= -sigmas * sigma
    out["ok"] = bool(ok)
    return out


def monotonicity(betas: np.ndarray, per_beta: np.ndarray, sigmas: float = 3.0) -> list:
    """Paired adjacent differences of MEP and MMSE; increases beyond 3 sigma fail."""
    rows = []
    n = per_beta.shape[1]
    for i in range(len(betas) - 1):
        row = {"beta_lo": float(betas[i]), "beta_hi": float(betas[i + 1])}
        ok = True
        for col, name in ((0, "mep"), (1, "mmse"), (2, "cmmse")):
            diff = per_beta[i + 1, :, col] - per_beta[i, :, col]
            se = float(np.std(diff, ddof=1) / math.sqrt(n))
            row[name + "_increase"] = float(diff.mean())
            row[name + "_increase_se"] = se
            if name != "cmmse":
                ok &= diff.mean() <= sigmas * se
        row["ok"] = bool(ok)
        rows.append(row)
    return rows


def default_beta_grid(steps: int = 8, lo: float = 0.25, hi: float = 2.0) -> np.ndarray:
    return np.geomspace(lo, hi, steps) if steps > 1 else np.array([lo])


def sweep(
    config: ProblemConfig,
    beta_grid: Sequence[float],
    trials: int,
    workers: int = 1,
    max_hypotheses: int = DEFAULT_MAX_HYPOTHESES,
    keep_trials: bool = False,
) -> SweepResult:
    betas = np.asarray(beta_grid, dtype=float)
    if betas.ndim != 1 or betas.size == 0:
        raise ConfigError("beta grid must be a nonempty 1-d sequence")
    if np.any(np.diff(betas) <= 0):
        raise ConfigError("beta grid must be strictly increasing")
    if np.any(betas < 0):
        raise ConfigError("beta grid must be nonnegative")
    if trials < 2:
        raise ConfigError(f"trials must be >= 2, got {trials}")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    enumerate_supports(config, max_hypotheses)  # fail fast on the cap

    t0 = time.perf_counter()
    per_beta = np.empty((len(betas), trials, 3))
    blocks = _blocks(trials, workers)
    if workers == 1:
        for b, beta in enumerate(betas):
            per_beta[b] = _trial_block(config.with_beta(float(beta)), 0, trials, max_hypotheses)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                (b, start): pool.submit(_trial_block, config.with_beta(float(beta)), start, stop, max_hypotheses)
                for b, beta in enumerate(betas)
                for start, stop in blocks
            }
            for (b, start), fut in futures.items():
                block = fut.result()
                per_beta[b, start : start + len(block)] = block
    wall = time.perf_counter() - t0

    estimates = [_estimate(float(beta), per_beta[b]) for b, beta in enumerate(betas)]
    ineq = [inequality_margins(float(beta), per_beta[b], config.s) for b, beta in enumerate(betas)]
    mono = monotonicity(betas, per_beta)
    meta = {
        "rng": RNG_NAME,
        "numpy_version": np.__version__,
        "software_version": __version__,
        "lambda_scale": config.lambda_scale.value,
        "lambda_n": config.lambda_n,
        "num_hypotheses": config.num_hypotheses,
        "s": config.s,
        "wall_time_s": wall,
        "workers": workers,
    }
    log.info("sweep finished: %d betas x %d trials in %.2fs", len(betas), trials, wall)
    return SweepResult(
        config=config,
        beta_grid=betas,
        estimates=estimates,
        inequality_report=ineq,
        monotonicity_report=mono,
        metadata=meta,
        per_trial=per_beta if keep_trials else None,
    )


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def csv_text(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for est in result.estimates:
        writer.writerow([_fmt(v) for v in est.row()])
    return buf.getvalue()


def emit_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    try:
        path.write_text(csv_text(result))
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV to {path}: {exc}") from exc
    return path


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header in {path}: {header}")
        out = []
        for row in reader:
            values = [float(v) for v in row[:-1]] + [int(row[-1])]
            out.append(RiskEstimate(*values))
    return out


def meta_dict(result: SweepResult) -> dict:
    """Sidecar contents.  Wall time and worker count are left out so the
    file is reproducible byte for byte."""
    cfg = result.config.to_dict()
    cfg.pop("beta")
    meta = {k: v for k, v in result.metadata.items() if k not in ("wall_time_s", "workers")}
    return {
        "config": cfg,
        "beta_grid": [float(b) for b in result.beta_grid],
        "metadata": meta,
        "inequality_report": result.inequality_report,
        "monotonicity_report": result.monotonicity_report,
    }


def emit_meta(result: SweepResult, csv_path) -> Path:
    path = Path(str(csv_path) + ".meta.json")
    try:
        path.write_text(json.dumps(meta_dict(result), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write sweep metadata to {path}: {exc}") from exc
    return path
