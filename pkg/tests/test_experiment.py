import json
import math

import numpy as np
import pytest

from aonlab.experiment import (
    CSV_HEADER,
    csv_text,
    default_beta_grid,
    emit_csv,
    emit_meta,
    read_csv,
    run_trial,
    sweep,
)
from aonlab.information import prior_overlap_moment
from aonlab.model import ConfigError, ProblemConfig, enumerate_supports


@pytest.fixture(scope="module")
def small_sweep():
    cfg = ProblemConfig(p=8, k=2, d=2, seed=13)
    return sweep(cfg, [0.0, 0.5, 1.0, 2.0], 300, keep_trials=True)


class TestRunTrial:
    def test_noiseless(self):
        cfg = ProblemConfig(p=8, k=2, d=2, beta=5.0, seed=1)
        rec = run_trial(cfg, 0, noiseless=True)
        assert rec.mle_correct
        assert rec.sq_err_mmse < 1e-10
        assert rec.sq_err_cmmse == 0.0

    def test_zero_snr_success_rate(self):
        cfg = ProblemConfig(p=6, k=2, d=2, beta=0.0, seed=2)
        space = enumerate_supports(cfg)
        trials = 4000
        rate = np.mean([run_trial(cfg, t, space).mle_correct for t in range(trials)])
        assert abs(rate - 1 / 15) <= 3 * math.sqrt((1 / 15) * (14 / 15) / trials)

    def test_constrained_error_geometry(self):
        cfg = ProblemConfig(p=7, k=2, d=2, seed=3)
        space = enumerate_supports(cfg)
        for beta in (0.0, 0.6, 1.2, 3.0):
            for t in range(100):
                e = run_trial(cfg.with_beta(beta), t, space).sq_err_cmmse
                assert e == 0.0 or 2 / cfg.s - 1e-12 <= e <= 2 + 1e-12


class TestSweep:
    def test_zero_snr_mmse_is_exact(self, small_sweep):
        # <E X, X> is the same for every support, so each trial's error is 1 - ||E X||^2
        est = small_sweep.estimates[0]
        assert est.mmse == pytest.approx(1 - prior_overlap_moment(small_sweep.config), abs=1e-12)
        assert est.mmse_se < 1e-12

    def test_mep_equals_cmep(self, small_sweep):
        for est in small_sweep.estimates:
            assert est.mep == est.cmep and est.mep_se == est.cmep_se

    def test_ranges_and_margins(self, small_sweep):
        for est in small_sweep.estimates:
            assert 0 <= est.mep <= 1
            assert 0 <= est.mmse <= 2 and 0 <= est.cmmse <= 2
        assert small_sweep.all_margins_ok
        assert all(r["ok"] for r in small_sweep.monotonicity_report)

    def test_workers_do_not_change_results(self):
        cfg = ProblemConfig(p=7, k=2, d=2, seed=5)
        one = sweep(cfg, [0.5, 1.5], 40, workers=1)
        two = sweep(cfg, [0.5, 1.5], 40, workers=3)
        assert csv_text(one) == csv_text(two)
        assert one.inequality_report == two.inequality_report

    @pytest.mark.parametrize(
        "grid, trials",
        [([], 10), ([1.0, 0.5], 10), ([0.5, 0.5], 10), ([-1.0, 1.0], 10), ([1.0], 1)],
    )
    def test_preconditions(self, grid, trials):
        with pytest.raises(ConfigError):
            sweep(ProblemConfig(p=5, k=2), grid, trials)

    def test_default_grid(self):
        g = default_beta_grid()
        assert len(g) == 8 and g[0] == 0.25 and g[-1] == pytest.approx(2.0)
        assert np.allclose(np.diff(np.log(g)), np.log(8) / 7)


class TestSerialization:
    def test_header_and_rows(self, small_sweep, tmp_path):
        path = emit_csv(small_sweep, tmp_path / "run.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 1 + len(small_sweep.beta_grid)

    def test_roundtrip(self, small_sweep, tmp_path):
        path = emit_csv(small_sweep, tmp_path / "run.csv")
        assert read_csv(path) == small_sweep.estimates

    def test_deterministic_bytes(self, tmp_path):
        cfg = ProblemConfig(p=6, k=2, d=2, seed=21)
        paths = []
        for run in range(2):
            res = sweep(cfg, [0.5, 1.0], 50)
            out = tmp_path / f"r{run}.csv"
            emit_csv(res, out)
            paths.append((out, emit_meta(res, out)))
        (a, ma), (b, mb) = paths
        assert a.read_bytes() == b.read_bytes()
        assert ma.read_bytes() == mb.read_bytes()

    def test_meta_contents(self, small_sweep, tmp_path):
        meta = json.loads(emit_meta(small_sweep, tmp_path / "run.csv").read_text())
        assert meta["config"] == {k: v for k, v in small_sweep.config.to_dict().items() if k != "beta"}
        assert meta["metadata"]["lambda_scale"] == "TwoLogM"
        assert "Philox" in meta["metadata"]["rng"]
        assert len(meta["inequality_report"]) == 4
        assert "wall_time_s" not in meta["metadata"]
        assert (tmp_path / "run.csv.meta.json").exists()

    def test_io_error_names_path(self, small_sweep, tmp_path):
        bad = tmp_path / "missing" / "run.csv"
        with pytest.raises(OSError, match="missing"):
            emit_csv(small_sweep, bad)
