import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from wsbm import generate, graphio, rng
from wsbm.dist import LabelDistribution, ScaledFamily
from wsbm.errors import ValidationError
from wsbm.generate import (
    Assignment,
    ModelSpec,
    WeightedGraph,
    censored_intensities,
    censored_model,
    generate_wsbm,
    pair_index,
    scaled_model,
    submatrix_model,
)


class TestRng:
    def test_splitmix64_reference_stream(self):
        # published SplitMix64 outputs for seed 0; key 0 + counter k is the k-th output
        expected = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
        got = rng.random_bits(0, np.arange(3, dtype=np.uint64))
        assert [int(x) for x in got] == expected

    def test_array_and_scalar_mix_agree(self):
        key = rng.derive_key(123)
        counters = np.arange(50, dtype=np.uint64)
        bits = rng.random_bits(key, counters)
        for c in range(50):
            ref = rng.mix64((key + (c + 1) * rng.GOLDEN) & rng.MASK64)
            assert int(bits[c]) == ref

    def test_uniform_ranges(self):
        c = np.arange(100_000, dtype=np.uint64)
        u = rng.uniforms(7, c)
        v = rng.uniforms_open_low(7, c)
        assert u.min() >= 0.0 and u.max() < 1.0
        assert v.min() > 0.0 and v.max() <= 1.0
        assert stats.kstest(u, "uniform").pvalue > 1e-4

    def test_normals_look_normal(self):
        z = rng.standard_normals(rng.derive_key(9), np.arange(100_000, dtype=np.uint64))
        assert abs(z.mean()) < 0.02 and abs(z.std() - 1) < 0.02
        assert stats.kstest(z, "norm").pvalue > 1e-4

    def test_trial_seeds_distinct(self):
        seeds = {rng.derive_trial_seed(b, i) for b in range(5) for i in range(2000)}
        assert len(seeds) == 10_000

    @given(st.integers(0, 2 ** 64 - 1), st.integers(1, 60))
    def test_permutation(self, key, size):
        perm = rng.random_permutation(key, size)
        assert sorted(perm.tolist()) == list(range(size))


class TestModelSpec:
    def test_rejects_small_K(self):
        d = LabelDistribution.discrete([1.0])
        with pytest.raises(ValidationError):
            ModelSpec(1, 3, d, d)

    def test_rejects_mixed_kinds(self):
        with pytest.raises(ValidationError):
            ModelSpec(2, 3, LabelDistribution.discrete([1.0]), LabelDistribution.gaussian(0, 1))

    def test_node_cap(self):
        d = LabelDistribution.discrete([1.0])
        with pytest.raises(ValidationError):
            ModelSpec(2, 10_001, d, d)
        ModelSpec(2, 10_001, d, d, max_nodes=20_002)

    def test_json_round_trip(self):
        spec = scaled_model(ScaledFamily([3, 2], [1, 3], 40), K=3)
        assert ModelSpec.from_json(json.loads(json.dumps(spec.to_json()))) == spec
        assert spec.L == 2 and spec.N == 120

    def test_censored_intensities(self):
        a, b = censored_intensities(100, 0.1, 0.25, 0.75)
        factor = 0.1 * 100 / math.log(100)
        assert a == pytest.approx([0.75 * factor, 0.25 * factor])
        assert b == pytest.approx([0.25 * factor, 0.75 * factor])
        spec = censored_model(100, 0.1, 0.25, 0.75)
        assert spec.within.probs == pytest.approx((0.9, 0.075, 0.025))

    def test_submatrix_rejects_sigma(self):
        with pytest.raises(ValidationError):
            submatrix_model(10, 2, 0.5, 0.0)


class TestAssignment:
    def test_truth(self):
        assert Assignment.truth(3, 2).tolist() == [1, 1, 2, 2, 3, 3]

    @pytest.mark.parametrize("classes", [[1, 1, 1, 2], [0, 1, 1, 2], [1, 2, 3]])
    def test_rejects_invalid(self, classes):
        with pytest.raises(ValidationError):
            Assignment(classes, 2)

    def test_canonical_and_relabel(self):
        s = Assignment([3, 1, 2, 3, 1, 2], 3)
        assert s.canonical().tolist() == [1, 2, 3, 1, 2, 3]
        assert s.relabel([2, 3, 1]).tolist() == [1, 2, 3, 1, 2, 3]
        assert s.relabel([2, 3, 1]).canonical() == s.canonical()

    def test_read_only(self):
        s = Assignment.truth(2, 2)
        with pytest.raises(ValueError):
            s.classes[0] = 2


class TestGraph:
    def test_pair_index_enumerates_upper_triangle(self):
        N = 7
        idx = [pair_index(N, i, j) for i in range(N) for j in range(i + 1, N)]
        assert idx == list(range(N * (N - 1) // 2))

    def test_matrix_symmetric(self):
        spec = scaled_model(ScaledFamily([9], [1], 50))
        g, truth = generate_wsbm(spec, 1)
        m = g.matrix()
        assert np.array_equal(m, m.T)
        assert g.value(3, 1) == m[1, 3]
        assert truth == Assignment.truth(2, 50)

    def test_wrong_length_rejected(self):
        with pytest.raises(ValidationError):
            WeightedGraph(4, "discrete", np.zeros(5), 2)

    def test_same_seed_same_graph(self):
        spec = scaled_model(ScaledFamily([5, 1], [1, 2], 30), K=3)
        assert generate_wsbm(spec, 5)[0] == generate_wsbm(spec, 5)[0]
        assert generate_wsbm(spec, 5)[0] != generate_wsbm(spec, 6)[0]

    @pytest.mark.parametrize("kind", ["discrete", "gaussian"])
    def test_worker_count_does_not_change_output(self, monkeypatch, kind):
        monkeypatch.setattr(generate, "_PAIRS_PER_CHUNK", 300)
        if kind == "discrete":
            spec = scaled_model(ScaledFamily([9], [1], 60), K=3)
        else:
            spec = submatrix_model(60, 3, 0.7, 1.3)
        assert len(generate._row_blocks(spec.N)) > 10
        serial = generate_wsbm(spec, 42, workers=1)[0]
        for workers in (2, 8):
            assert generate_wsbm(spec, 42, workers=workers)[0] == serial

    def test_pair_k_uses_counter_k(self):
        # the block sampler must agree with a pair-by-pair reference
        spec = censored_model(15, 0.5, 0.2, 0.7)
        g, _ = generate_wsbm(spec, 77)
        key = rng.derive_key(77)
        u = rng.uniforms(key, np.arange(g.upper.size, dtype=np.uint64))
        cdf_w = np.cumsum(spec.within.probs)
        cdf_b = np.cumsum(spec.between.probs)
        k = 0
        for i in range(spec.N):
            for j in range(i + 1, spec.N):
                cdf = cdf_w if i // 15 == j // 15 else cdf_b
                assert g.upper[k] == int(np.searchsorted(cdf, u[k], side="right"))
                k += 1

    def test_label_frequencies(self):
        spec = censored_model(400, 0.3, 0.1, 0.8)
        g, _ = generate_wsbm(spec, 3)
        m = g.matrix()
        n = spec.n
        within = np.concatenate([m[:n, :n][np.triu_indices(n, 1)], m[n:, n:][np.triu_indices(n, 1)]])
        between = m[:n, n:].ravel()
        for sample, dist in ((within, spec.within), (between, spec.between)):
            counts = np.bincount(sample, minlength=3)
            expected = np.asarray(dist.probs) * sample.size
            assert stats.chisquare(counts, expected).pvalue > 1e-4

    def test_gaussian_moments(self):
        spec = submatrix_model(300, 2, 0.8, 2.0)
        m = generate_wsbm(spec, 11)[0].matrix()
        n = spec.n
        within = m[:n, :n][np.triu_indices(n, 1)]
        between = m[:n, n:].ravel()
        assert within.mean() == pytest.approx(0.8, abs=0.03)
        assert between.mean() == pytest.approx(0.0, abs=0.03)
        assert between.std() == pytest.approx(2.0, rel=0.02)

    def test_zero_probability_labels_never_drawn(self):
        spec = ModelSpec(
            2, 30, LabelDistribution.discrete([0.5, 0.5, 0.0]), LabelDistribution.discrete([0.0, 0.0, 1.0])
        )
        m = generate_wsbm(spec, 0)[0].matrix()
        assert np.all(m[:30, 30:] == 2)
        assert not np.any(m[:30, :30][np.triu_indices(30, 1)] == 2)


class TestGraphIO:
    @pytest.mark.parametrize("gaussian", [False, True])
    def test_round_trip(self, tmp_path, gaussian):
        spec = submatrix_model(12, 3, 0.4, 1.5) if gaussian else scaled_model(ScaledFamily([2, 1], [1, 1], 12), 3)
        g, _ = generate_wsbm(spec, 99)
        path = tmp_path / "g.wsbm"
        graphio.write_graph(path, g, spec, 99)
        g2, spec2, seed = graphio.read_graph(path)
        assert g2 == g and spec2 == spec and seed == 99
        meta = json.loads((tmp_path / "g.wsbm.json").read_text())
        assert meta["seed"] == 99 and meta["spec"]["K"] == 3

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.wsbm"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(ValidationError):
            graphio.read_graph(path)

    def test_missing_sidecar(self, tmp_path):
        spec = scaled_model(ScaledFamily([3], [1], 10))
        g, _ = generate_wsbm(spec, 1)
        path = tmp_path / "g.wsbm"
        graphio.write_graph(path, g, spec, 1)
        (tmp_path / "g.wsbm.json").unlink()
        with pytest.raises(ValidationError):
            graphio.read_graph(path)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(1, 8), st.integers(0, 2 ** 63))
def test_generated_labels_in_range(K, n, seed):
    spec = ModelSpec(K, n, LabelDistribution.discrete([0.2, 0.3, 0.5]), LabelDistribution.discrete([0.6, 0.4, 0.0]))
    g, _ = generate_wsbm(spec, seed)
    assert g.upper.size == spec.N * (spec.N - 1) // 2
    assert g.upper.max(initial=0) <= 2


def test_within_label_frequency_in_wilson_99():
    spec = ModelSpec(2, 101, LabelDistribution.discrete([0.7, 0.3]), LabelDistribution.discrete([0.9, 0.1]))
    m = generate_wsbm(spec, 2024)[0].matrix()
    iu = np.triu_indices(101, 1)
    within = np.concatenate([m[:101, :101][iu], m[101:, 101:][iu]])
    trials, hits = within.size, int(within.sum())
    assert trials >= 10_000
    z = stats.norm.ppf(0.995)
    phat = hits / trials
    centre = (phat + z * z / (2 * trials)) / (1 + z * z / trials)
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials ** 2)) / (1 + z * z / trials)
    assert centre - half <= 0.3 <= centre + half
