import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aonlab.model import (
    ConfigError,
    HypothesisSpaceTooLarge,
    LambdaScale,
    Mode,
    Observation,
    ProblemConfig,
    SparseSignal,
    enumerate_supports,
    generate_instance,
    rank_support,
    signal_tensor_inner,
    tensorize,
)


class TestProblemConfig:
    def test_lambda_scales(self):
        two = ProblemConfig(p=6, k=2, beta=1.5)
        one = ProblemConfig(p=6, k=2, beta=1.5, lambda_scale="LogM")
        assert two.lambda_n == pytest.approx(2 * math.log(15))
        assert one.lambda_n == pytest.approx(math.log(15))
        assert two.snr == pytest.approx(1.5 * 2 * math.log(15))

    @pytest.mark.parametrize(
        "kwargs, fragment",
        [
            (dict(p=5, k=0), "k must satisfy"),
            (dict(p=5, k=6), "k must satisfy"),
            (dict(p=5, k=2, d=1), "d must be"),
            (dict(p=5, k=2, beta=-0.1), "beta"),
            (dict(p=5, k=2, seed=2**64), "seed"),
            (dict(p=5, k=2, mode="Dense"), "Dense"),
        ],
    )
    def test_rejects_invalid(self, kwargs, fragment):
        with pytest.raises(ValueError, match=fragment):
            ProblemConfig(**kwargs)

    def test_json_roundtrip(self):
        cfg = ProblemConfig(p=9, k=3, d=3, mode=Mode.UPPER_TRIANGULAR, lambda_scale=LambdaScale.LOG_M, beta=0.7, seed=2**63)
        data = json.loads(cfg.to_json())
        assert set(data) == {"p", "k", "d", "mode", "lambda_scale", "beta", "seed"}
        assert data["mode"] == "UpperTriangular"
        assert ProblemConfig.from_json(cfg.to_json()) == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys: extra"):
            ProblemConfig.from_dict({"p": 4, "k": 2, "extra": 1})


class TestEnumerateSupports:
    def test_p4_k2(self):
        space = enumerate_supports(ProblemConfig(p=4, k=2))
        assert [x.support for x in space] == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]

    def test_p2_k1(self):
        assert [x.support for x in enumerate_supports(ProblemConfig(p=2, k=1))] == [(0,), (1,)]

    def test_count_p20_k4(self):
        assert enumerate_supports(ProblemConfig(p=20, k=4)).count == 4845

    def test_cap(self):
        with pytest.raises(HypothesisSpaceTooLarge, match="hypothesis space too large"):
            enumerate_supports(ProblemConfig(p=20, k=4), max_hypotheses=1000)

    @given(st.integers(1, 9).flatmap(lambda p: st.tuples(st.just(p), st.integers(1, p))))
    def test_lexicographic_and_ranked(self, pk):
        p, k = pk
        space = enumerate_supports(ProblemConfig(p=p, k=k))
        rows = [tuple(r) for r in space.supports]
        assert rows == sorted(set(rows))
        assert len(rows) == math.comb(p, k)
        for i, r in enumerate(rows):
            assert rank_support(r, p) == i


class TestTensorize:
    def test_rank_one_matrix(self):
        t = tensorize(SparseSignal((0,), 2, 1), 2)
        np.testing.assert_array_equal(t.reshape(2, 2), [[1, 0], [0, 0]])

    def test_quarter_cells(self):
        t = tensorize(SparseSignal((0, 1), 3, 2), 2).reshape(3, 3)
        expected = np.zeros((3, 3))
        expected[:2, :2] = 0.5
        np.testing.assert_array_equal(t, expected)
        assert np.linalg.norm(t) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("p,k,d", [(5, 2, 2), (6, 3, 3), (4, 4, 2), (5, 1, 4)])
    def test_full_tensor_unit_norm(self, p, k, d):
        for x in enumerate_supports(ProblemConfig(p=p, k=k, d=d)):
            assert abs(np.linalg.norm(tensorize(x, d)) - 1) < 1e-12

    def test_matches_outer_product(self):
        x = SparseSignal((1, 3, 4), 6, 3)
        v = x.vector()
        np.testing.assert_allclose(tensorize(x, 3), np.einsum("i,j,k->ijk", v, v, v).ravel(), atol=1e-15)

    def test_upper_triangular_layout(self):
        x = SparseSignal((0, 2, 3), 4, 3)
        t = tensorize(x, 2, Mode.UPPER_TRIANGULAR)
        pairs = list(itertools.combinations(range(4), 2))
        assert t.shape == (6,)
        for value, (i, j) in zip(t, pairs):
            expected = 1 / 3 if {i, j} <= {0, 2, 3} else 0.0
            assert value == pytest.approx(expected)
        # mask applied after normalization: not unit norm
        assert t @ t == pytest.approx(3 / 9)

    def test_upper_triangular_warns_when_empty(self):
        with pytest.warns(UserWarning, match="zero"):
            t = tensorize(SparseSignal((1,), 4, 1), 2, Mode.UPPER_TRIANGULAR)
        assert not t.any()


class TestSignalTensorInner:
    def test_self_inner_is_one(self):
        cfg = ProblemConfig(p=5, k=2, d=3)
        x = SparseSignal((1, 4), 5, 2)
        y = Observation(tensorize(x, 3), 0.0, cfg)
        assert signal_tensor_inner(x.support, y) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_is_zero(self):
        cfg = ProblemConfig(p=5, k=2)
        y = Observation(tensorize(SparseSignal((0, 1), 5, 2), 2), 0.0, cfg)
        assert signal_tensor_inner((3, 4), y) == 0.0

    def test_all_ones(self):
        cfg = ProblemConfig(p=4, k=2, d=2)
        y = Observation(np.ones(16), 0.0, cfg)
        # four cells at value 1/2 each
        assert signal_tensor_inner((0, 3), y) == pytest.approx(2.0)

    def test_pairwise_overlaps(self):
        for p, k, d in [(6, 2, 2), (6, 3, 2), (5, 2, 3)]:
            cfg = ProblemConfig(p=p, k=k, d=d)
            space = enumerate_supports(cfg)
            for a, b in itertools.product(space, repeat=2):
                y = Observation(tensorize(b, d), 0.0, cfg)
                expected = (len(set(a.support) & set(b.support)) / k) ** d
                assert signal_tensor_inner(a.support, y) == pytest.approx(expected, abs=1e-12)

    def test_upper_triangular_sum(self):
        cfg = ProblemConfig(p=5, k=3, d=2, mode=Mode.UPPER_TRIANGULAR)
        y = Observation(np.arange(10.0), 0.0, cfg)
        pairs = list(itertools.combinations(range(5), 2))
        expected = sum(y.data[pairs.index(pr)] for pr in itertools.combinations((0, 2, 4), 2)) / 3
        assert signal_tensor_inner((0, 2, 4), y) == pytest.approx(expected)

    def test_wrong_size(self):
        y = Observation(np.zeros(16), 0.0, ProblemConfig(p=4, k=2))
        with pytest.raises(ConfigError):
            signal_tensor_inner((0, 1, 2), y)


class TestGenerateInstance:
    def test_deterministic(self):
        cfg = ProblemConfig(p=8, k=3, beta=1.2, seed=99)
        a, b = generate_instance(cfg, 5), generate_instance(cfg, 5)
        assert a == b
        assert a.data.tobytes() == b.data.tobytes()
        assert generate_instance(cfg, 6) != a

    def test_pure_noise_at_zero_snr(self):
        cfg = ProblemConfig(p=6, k=2, beta=0.0, seed=3)
        trials = 200
        data = np.concatenate([generate_instance(cfg, t).data for t in range(trials)])
        assert abs(data.mean()) <= 4 / math.sqrt(trials * cfg.n)

    def test_noiseless_hook(self):
        cfg = ProblemConfig(p=7, k=3, d=3, beta=0.8, seed=1)
        y = generate_instance(cfg, 2, noiseless=True)
        np.testing.assert_array_equal(y.data, math.sqrt(cfg.snr) * tensorize(y.truth, 3))

    def test_common_random_numbers_across_beta(self):
        cfg = ProblemConfig(p=6, k=2, seed=4)
        lo, hi = generate_instance(cfg.with_beta(0.5), 3), generate_instance(cfg.with_beta(1.5), 3)
        assert lo.truth == hi.truth
        diff = hi.data - lo.data
        np.testing.assert_allclose(diff, (math.sqrt(hi.lam) - math.sqrt(lo.lam)) * tensorize(lo.truth, 2), atol=1e-12)

    def test_truth_uniform(self):
        cfg = ProblemConfig(p=4, k=2, seed=8)
        counts = {}
        for t in range(3000):
            s = generate_instance(cfg, t).truth.support
            counts[s] = counts.get(s, 0) + 1
        assert len(counts) == 6
        # binomial(3000, 1/6): sd ~ 20.4
        assert all(abs(c - 500) < 5 * 20.4 for c in counts.values())

    def test_upper_triangular_length(self):
        cfg = ProblemConfig(p=6, k=3, d=3, mode="UpperTriangular", beta=1.0)
        assert generate_instance(cfg, 0).data.shape == (20,)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(1, 4))
def test_constraint_set_min_distance(n, s):
    """Distinct points of C_{n,s} are at squared distance >= 2/s."""
    if s >= n:
        return
    pts = []
    for cand in itertools.combinations(range(n), s):
        v = np.zeros(n)
        v[list(cand)] = s**-0.5
        pts.append(v)
    pts = np.array(pts)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    off = d2[~np.eye(len(pts), dtype=bool)]
    assert off.min() == pytest.approx(2 / s, abs=1e-12)
