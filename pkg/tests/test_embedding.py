import numpy as np
import pytest

from hashscope.embedding import (
    EmbeddingTable,
    TrainConfig,
    TrainingDivergedError,
    Vocabulary,
    VocabularyError,
    build_vocab,
    cbow_pair_loss,
    cosine_distance,
    init_vectors,
    load_table,
    load_table_text,
    nearest_neighbors,
    save_table,
    save_table_text,
    skipgram_pair_loss,
    train,
    _step_skipgram,
)
from hashscope.synth import SyntheticSpec, generate_synthetic


def pair_corpus(n=300):
    return [["a", "b"], ["c", "d"]] * n


class TestBuildVocab:
    def test_frequency_then_lexical_order(self):
        vocab = build_vocab([["a", "b"], ["a"]], min_count=1)
        assert vocab.tokens == ["a", "b"]
        assert vocab.index == {"a": 0, "b": 1}
        assert list(vocab.counts) == [2, 1]

    def test_min_count_filters_to_empty(self):
        with pytest.raises(VocabularyError):
            build_vocab([["a", "b"]], min_count=2)

    def test_zipf_modal_token_first(self):
        # counting oracle: most frequent sentence token gets index 0
        rng = np.random.default_rng(0)
        tokens = [f"t{i}" for i in range(30)]
        weights = 1 / np.arange(1, 31) ** 1.2
        weights /= weights.sum()
        sentences = [
            list(rng.choice(tokens, size=3, replace=False, p=weights))
            for _ in range(500)
        ]
        counts = {}
        for s in sentences:
            for t in s:
                counts[t] = counts.get(t, 0) + 1
        modal = max(sorted(counts), key=lambda t: counts[t])
        assert build_vocab(sentences).tokens[0] == modal

    def test_ties_lexical(self):
        vocab = build_vocab([["b", "a"]], min_count=1)
        assert vocab.tokens == ["a", "b"]


def central_difference(f, x, eps=1e-6):
    grad = np.zeros_like(x)
    flat = x.ravel()
    g = grad.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = f()
        flat[i] = old - eps
        lo = f()
        flat[i] = old
        g[i] = (hi - lo) / (2 * eps)
    return grad


class TestGradients:
    """Analytic gradients vs central finite differences, 5-token vocab, d=3."""

    def setup_method(self):
        rng = np.random.default_rng(42)
        self.w_in = rng.normal(0, 0.5, (5, 3))
        self.w_out = rng.normal(0, 0.5, (5, 3))

    def test_skipgram_gradients(self):
        c, o, negs = 0, 1, np.array([2, 3, 4])
        vc = self.w_in[c].copy()
        wo = self.w_out[o].copy()
        wn = self.w_out[negs].copy()
        _, g_c, g_o, g_n = skipgram_pair_loss(vc, wo, wn)
        num_c = central_difference(lambda: skipgram_pair_loss(vc, wo, wn)[0], vc)
        num_o = central_difference(lambda: skipgram_pair_loss(vc, wo, wn)[0], wo)
        num_n = central_difference(lambda: skipgram_pair_loss(vc, wo, wn)[0], wn)
        for analytic, numeric in ((g_c, num_c), (g_o, num_o), (g_n, num_n)):
            assert np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1e-12) < 1e-4

    def test_cbow_gradients(self):
        ctx = self.w_in[[0, 1, 2]].copy()
        t = self.w_out[3].copy()
        wn = self.w_out[[0, 4]].copy()
        _, g_ctx, g_t, g_n = cbow_pair_loss(ctx, t, wn)
        num_ctx = central_difference(lambda: cbow_pair_loss(ctx, t, wn)[0], ctx)
        num_t = central_difference(lambda: cbow_pair_loss(ctx, t, wn)[0], t)
        num_n = central_difference(lambda: cbow_pair_loss(ctx, t, wn)[0], wn)
        for analytic, numeric in ((g_ctx, num_ctx), (g_t, num_t), (g_n, num_n)):
            assert np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1e-12) < 1e-4

    def test_batched_step_matches_scalar_math(self):
        w_in = self.w_in.astype(np.float32).copy()
        w_out = self.w_out.astype(np.float32).copy()
        centers = np.array([0], dtype=np.int32)
        contexts = np.array([1], dtype=np.int32)
        negs = np.array([[2, 3]], dtype=np.int32)
        lr = 0.1
        _, g_c, g_o, g_n = skipgram_pair_loss(self.w_in[0], self.w_out[1],
                                              self.w_out[[2, 3]])
        expect_in = self.w_in.copy()
        expect_out = self.w_out.copy()
        expect_in[0] -= lr * g_c
        expect_out[1] -= lr * g_o
        expect_out[[2, 3]] -= lr * g_n
        _step_skipgram(w_in, w_out, centers, contexts, negs, lr)
        assert np.allclose(w_in, expect_in, atol=1e-6)
        assert np.allclose(w_out, expect_out, atol=1e-6)


class TestTrain:
    def test_zero_learning_rate_keeps_initialization(self):
        cfg = TrainConfig(mode="skipgram", dimension=8, window=2, epochs=1,
                          learning_rate=0.0, min_learning_rate=0.0, seed=5)
        sentences = pair_corpus(10)
        table = train(sentences, cfg)
        vocab = build_vocab(sentences, 1)
        assert np.array_equal(table.vectors, init_vectors(vocab, cfg))

    def test_deterministic_under_seed(self):
        cfg = TrainConfig(mode="cbow", dimension=8, window=3, epochs=2, seed=7)
        t1 = train(pair_corpus(50), cfg)
        t2 = train(pair_corpus(50), cfg)
        assert np.array_equal(t1.vectors, t2.vectors)
        assert np.array_equal(t1.output_vectors, t2.output_vectors)

    def test_cooccurring_pairs_separate(self):
        cfg = TrainConfig(mode="skipgram", dimension=16, window=5, epochs=5, seed=3)
        table = train(pair_corpus(200), cfg)
        ab = cosine_distance(table.vector("a"), table.vector("b"))
        ac = cosine_distance(table.vector("a"), table.vector("c"))
        assert ab < ac

    def test_heldout_loss_decreases(self):
        cfg = TrainConfig(mode="skipgram", dimension=16, window=5, epochs=5, seed=3)
        table = train(pair_corpus(200), cfg)
        assert len(table.heldout_loss) == 6  # pre-training value plus one per epoch
        assert table.heldout_loss[-1] < table.heldout_loss[1]

    def test_vectors_finite_and_nonzero(self):
        cfg = TrainConfig(mode="cbow", dimension=12, window=4, epochs=3, seed=1)
        table = train(pair_corpus(100), cfg)
        assert np.isfinite(table.vectors).all()
        assert (np.linalg.norm(table.vectors, axis=1) > 0).all()

    def test_divergence_detected(self):
        cfg = TrainConfig(mode="skipgram", dimension=8, window=2, epochs=3,
                          learning_rate=1e9, min_learning_rate=1e9, seed=0)
        with pytest.raises(TrainingDivergedError):
            train(pair_corpus(100), cfg)

    def test_empty_after_encoding_rejected(self):
        cfg = TrainConfig(dimension=4)
        with pytest.raises(VocabularyError):
            train([["solo"]], cfg)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            TrainConfig(mode="glove").validate()
        with pytest.raises(ValueError):
            TrainConfig(negatives=0).validate()


class TestCosineDistance:
    def test_identical_is_zero(self):
        v = np.array([1.0, 2.0, 3.0])
        assert cosine_distance(v, v) == pytest.approx(0.0, abs=1e-12)

    def test_opposite_is_two(self):
        v = np.array([1.0, -2.0, 0.5])
        assert cosine_distance(v, -v) == pytest.approx(2.0, abs=1e-12)

    def test_orthogonal_is_one(self):
        assert cosine_distance(np.array([1.0, 0.0]), np.array([0.0, 5.0])) == pytest.approx(1.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            cosine_distance(np.zeros(3), np.ones(3))


class TestNearestNeighbors:
    def _table(self, n=100, d=8, seed=0):
        rng = np.random.default_rng(seed)
        tokens = [f"t{i:03d}" for i in range(n)]
        vocab = Vocabulary(tokens=tokens, counts=np.ones(n, dtype=np.int64))
        return EmbeddingTable(vocab=vocab,
                              vectors=rng.normal(size=(n, d)).astype(np.float32))

    def test_k_zero_empty(self):
        assert nearest_neighbors(self._table(), "t000", 0) == []

    def test_query_never_in_result(self):
        table = self._table()
        assert "t000" not in nearest_neighbors(table, "t000", 99)

    def test_unknown_token(self):
        with pytest.raises(KeyError):
            nearest_neighbors(self._table(), "missing", 3)

    def test_matches_exhaustive_scan(self):
        table = self._table(n=100)
        query = "t042"
        qv = table.vector(query).astype(np.float64)
        scored = []
        for i, token in enumerate(table.vocab.tokens):
            if token == query:
                continue
            v = table.vectors[i].astype(np.float64)
            dist = 1.0 - (qv @ v) / (np.linalg.norm(qv) * np.linalg.norm(v))
            scored.append((dist, i, token))
        oracle = [t for _, _, t in sorted(scored)[:10]]
        assert nearest_neighbors(table, query, 10) == oracle

    def test_tie_break_by_index(self):
        tokens = ["q", "far", "twin1", "twin2"]
        vectors = np.array([
            [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, 1.0],
        ], dtype=np.float32)
        vocab = Vocabulary(tokens=tokens, counts=np.ones(4, dtype=np.int64))
        table = EmbeddingTable(vocab=vocab, vectors=vectors)
        assert nearest_neighbors(table, "q", 2) == ["twin1", "twin2"]


class TestSerialization:
    def _trained(self):
        cfg = TrainConfig(mode="skipgram", dimension=12, window=3, epochs=2, seed=2)
        return train(pair_corpus(50), cfg)

    def test_binary_round_trip_exact(self, tmp_path):
        table = self._trained()
        path = tmp_path / "emb.bin"
        save_table(table, path)
        loaded = load_table(path)
        assert loaded.vocab.tokens == table.vocab.tokens
        assert list(loaded.vocab.counts) == list(table.vocab.counts)
        assert np.array_equal(loaded.vectors, table.vectors)

    def test_text_round_trip_approximate(self, tmp_path):
        table = self._trained()
        path = tmp_path / "emb.txt"
        save_table_text(table, path)
        loaded = load_table_text(path)
        assert loaded.vocab.tokens == table.vocab.tokens
        assert np.allclose(loaded.vectors, table.vectors, atol=1e-6)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"JUNKxxxx")
        with pytest.raises(ValueError, match="magic"):
            load_table(path)


@pytest.fixture(scope="module")
def community_setup():
    spec = SyntheticSpec(users=300, hashtags=120, posts=60000, years=1,
                         start_year=2013, communities=20, community_mix=0.92,
                         pair_affinity=1.0, zipf_exponent=0.0,
                         mean_extra_tags=2.5, seed=17)
    corpus = generate_synthetic(spec)
    sentences = [sorted(p.hashtags) for p in corpus.posts if len(p.hashtags) >= 2]
    return spec, sentences


class TestPlantedCommunities:
    """Synonym-community corpora: neighbor quality and order invariance."""

    def test_top5_neighbors_stay_in_community(self, community_setup):
        spec, sentences = community_setup
        cfg = TrainConfig(mode="skipgram", dimension=64, window=30, negatives=5,
                          epochs=8, learning_rate=0.05, min_count=5, seed=3)
        table = train(sentences, cfg)
        comm = spec.n_communities
        hits = []
        for token in table.vocab.tokens:
            same = sum(
                1 for n in nearest_neighbors(table, token, 5)
                if int(n[3:]) % comm == int(token[3:]) % comm
            )
            hits.append(same / 5)
        assert np.mean(hits) >= 0.8

    def test_sentence_order_permutation_agreement(self, community_setup):
        spec, sentences = community_setup
        cfg = TrainConfig(mode="skipgram", dimension=64, window=30, negatives=15,
                          epochs=18, learning_rate=0.03, min_count=5, seed=3)
        tables = []
        for perm_seed in (1, 2):
            order = np.random.default_rng(perm_seed).permutation(len(sentences))
            tables.append(train([sentences[i] for i in order], cfg))
        tokens = [t for t in tables[0].vocab.tokens if t in tables[1].vocab]
        agree = np.mean([
            nearest_neighbors(tables[0], t, 1) == nearest_neighbors(tables[1], t, 1)
            for t in tokens
        ])
        assert agree >= 0.9
