import numpy as np
import pytest

from keyfuse.sgns import (
    EmbeddingMatrix,
    SgnsConfig,
    SgnsError,
    SgnsModel,
    load_embeddings,
    negative_sampling_probs,
    ngram_buckets,
    pair_grads,
    pair_loss,
    save_embeddings,
    subword_vector,
    train_sgns,
    word_ngrams,
)


def finite_difference(f, x, h=1e-5):
    """Central-difference gradient of scalar f at x (any shape)."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        grad[idx] = (f(xp) - f(xm)) / (2 * h)
        it.iternext()
    return grad


def max_rel_err(a, b):
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-8)
    return np.max(np.abs(a - b) / denom)


def cosine(a, b):
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def test_pair_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k = rng.integers(1, 7)
        u = rng.normal(size=8)
        v = rng.normal(size=8)
        negs = rng.normal(size=(k, 8))
        gu, gv, gn = pair_grads(u, v, negs)
        assert max_rel_err(gu, finite_difference(lambda x: pair_loss(x, v, negs), u)) < 1e-4
        assert max_rel_err(gv, finite_difference(lambda x: pair_loss(u, x, negs), v)) < 1e-4
        assert max_rel_err(gn, finite_difference(lambda x: pair_loss(u, v, x), negs)) < 1e-4


def test_subword_composition_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(100):
        m = rng.integers(1, 5)
        k = rng.integers(1, 5)
        w = rng.normal(size=8)
        grams = rng.normal(size=(m, 8))
        v = rng.normal(size=8)
        negs = rng.normal(size=(k, 8))

        def loss(word_vec, gram_rows):
            return pair_loss(word_vec + gram_rows.mean(axis=0), v, negs)

        gu, _, _ = pair_grads(w + grams.mean(axis=0), v, negs)
        grad_word = gu
        grad_grams = np.tile(gu / m, (m, 1))
        assert max_rel_err(grad_word, finite_difference(lambda x: loss(x, grams), w)) < 1e-4
        assert max_rel_err(grad_grams, finite_difference(lambda x: loss(w, x), grams)) < 1e-4


def two_cluster_corpus(rng, n_seqs=120, seq_len=10):
    a = [f"a{i}" for i in range(5)]
    b = [f"b{i}" for i in range(5)]
    seqs = []
    for i in range(n_seqs):
        pool = a if i % 2 == 0 else b
        seqs.append([pool[rng.integers(5)] for _ in range(seq_len)])
    return seqs, a, b


def cluster_separation(model, a, b):
    intra, inter = [], []
    for i, wa in enumerate(a):
        for wb in a[i + 1:]:
            intra.append(cosine(model.vector(wa), model.vector(wb)))
        for wb in b:
            inter.append(cosine(model.vector(wa), model.vector(wb)))
    for i, wa in enumerate(b):
        for wb in b[i + 1:]:
            intra.append(cosine(model.vector(wa), model.vector(wb)))
    return np.mean(intra), np.mean(inter)


def test_two_cluster_separation():
    rng = np.random.default_rng(42)
    seqs, a, b = two_cluster_corpus(rng)
    cfg = SgnsConfig(dim=16, context_window=3, negatives=5, epochs=5,
                     lr_start=0.05, lr_end=1e-3, seed=7)
    model = train_sgns(seqs, cfg)
    intra, inter = cluster_separation(model, a, b)
    assert intra > inter


def test_epoch_loss_non_increasing_over_seed_ensemble():
    rng = np.random.default_rng(5)
    seqs, _, _ = two_cluster_corpus(rng, n_seqs=60, seq_len=8)
    firsts, lasts = [], []
    for seed in range(10):
        cfg = SgnsConfig(dim=12, context_window=3, negatives=3, epochs=4,
                         lr_start=0.05, lr_end=1e-3, seed=seed)
        model = train_sgns(seqs, cfg)
        firsts.append(model.epoch_losses[0])
        lasts.append(model.epoch_losses[-1])
    assert np.mean(lasts) <= np.mean(firsts)


def test_repeated_pair_cosine_increases():
    seqs = [["a", "b"] * 40]
    base = SgnsConfig(dim=12, context_window=2, negatives=2, epochs=0,
                      lr_start=0.05, lr_end=1e-3, seed=3)
    init = train_sgns(seqs, base)
    trained = train_sgns(seqs, SgnsConfig(dim=12, context_window=2, negatives=2, epochs=3,
                                          lr_start=0.05, lr_end=1e-3, seed=3))
    assert cosine(trained.vector("a"), trained.vector("b")) > \
        cosine(init.vector("a"), init.vector("b"))


def test_training_deterministic():
    seqs = [["x", "y", "z", "x", "y"], ["z", "x", "q"]]
    cfg = SgnsConfig(dim=8, context_window=2, negatives=3, epochs=3,
                     lr_start=0.05, lr_end=1e-3, seed=11)
    m1 = train_sgns(seqs, cfg)
    m2 = train_sgns(seqs, cfg)
    assert np.array_equal(m1.w_in, m2.w_in)
    assert np.array_equal(m1.w_out, m2.w_out)
    assert m1.epoch_losses == m2.epoch_losses


def test_min_count_drops_rare_words():
    seqs = [["common", "common", "common", "common", "common", "rare"]]
    cfg = SgnsConfig(dim=4, context_window=2, negatives=1, epochs=1,
                     lr_start=0.025, lr_end=1e-3, min_count=5, seed=0)
    model = train_sgns(seqs, cfg)
    assert "common" in model.vocab and "rare" not in model.vocab


def test_empty_vocab_raises():
    with pytest.raises(SgnsError):
        train_sgns([["a", "b"]], SgnsConfig(dim=4, min_count=10, seed=0))
    with pytest.raises(SgnsError):
        train_sgns([], SgnsConfig(dim=4, seed=0))


def test_negative_sampling_distribution():
    freqs = [100, 50, 10, 5, 1]
    probs = negative_sampling_probs(freqs, power=0.75)
    cdf = np.cumsum(probs)
    rng = np.random.default_rng(0)
    draws = np.searchsorted(cdf, rng.random(1_000_000))
    counts = np.bincount(draws, minlength=len(freqs))
    empirical = counts / counts.sum()
    # within 2% relative for every word
    assert np.all(np.abs(empirical - probs) / probs < 0.02)


def test_word_ngrams_boundary_markers():
    grams = word_ngrams("cat", 3, 4)
    assert "<ca" in grams and "at>" in grams and "<cat" in grams
    assert set(len(g) for g in grams) == {3, 4}


def test_short_word_single_ngram():
    assert word_ngrams("a", 5, 6) == ["<a>"]


def test_subword_in_vocab_matches_training_composition():
    seqs = [["cats", "dogs", "cats", "dogs"] * 10]
    cfg = SgnsConfig(dim=8, context_window=2, negatives=2, epochs=2,
                     lr_start=0.05, lr_end=1e-3, subword=True,
                     ngram_min=3, ngram_max=4, ngram_buckets=1000, seed=2)
    model = train_sgns(seqs, cfg)
    row = model.vocab["cats"]
    expected = model.w_in[row] + model.w_ngrams[np.array(ngram_buckets("cats", cfg))].mean(axis=0)
    assert np.allclose(model.vector("cats"), expected)


def test_subword_oov_deterministic():
    seqs = [["alpha", "beta"] * 10]
    cfg = SgnsConfig(dim=8, context_window=2, negatives=2, epochs=1,
                     lr_start=0.05, lr_end=1e-3, subword=True, ngram_buckets=500, seed=2)
    model = train_sgns(seqs, cfg)
    assert "alphas" not in model.vocab
    v1 = subword_vector("alphas", model)
    v2 = subword_vector("alphas", model)
    assert np.array_equal(v1, v2)
    assert np.linalg.norm(v1) > 0


def test_subword_oov_disjoint_ngrams_near_init_norm():
    seqs = [["aaaa", "bbbb"] * 30]
    cfg = SgnsConfig(dim=8, context_window=2, negatives=2, epochs=5,
                     lr_start=0.2, lr_end=1e-3, subword=True,
                     ngram_min=3, ngram_max=4, ngram_buckets=5000, seed=6)
    model = train_sgns(seqs, cfg)
    trained_buckets = set()
    for w in model.words:
        trained_buckets.update(ngram_buckets(w, cfg))
    oov = "zzzz"
    assert set(ngram_buckets(oov, cfg)).isdisjoint(trained_buckets)
    oov_norm = np.linalg.norm(subword_vector(oov, model))
    # untouched buckets stay at their uniform(-0.5/dim, 0.5/dim) init
    init_bound = (0.5 / cfg.dim) * np.sqrt(cfg.dim)
    assert 0 < oov_norm <= init_bound
    in_vocab_norm = np.mean([np.linalg.norm(model.vector(w)) for w in model.words])
    assert in_vocab_norm > 2 * oov_norm


def test_subword_vector_requires_subword_model():
    seqs = [["a", "b"] * 5]
    model = train_sgns(seqs, SgnsConfig(dim=4, epochs=1, seed=0))
    with pytest.raises(SgnsError):
        subword_vector("a", model)


def test_embedding_file_round_trip_text(tmp_path):
    emb = EmbeddingMatrix(vocab={"a": 0, "b": 1}, words=["a", "b"],
                          vectors=np.array([[1.5, -2.25], [0.125, 3.0]], dtype=np.float32),
                          kind="structure")
    path = tmp_path / "emb.txt"
    save_embeddings(path, emb)
    assert path.read_text().splitlines()[0] == "2 2"
    loaded = load_embeddings(path)
    assert loaded.words == ["a", "b"]
    assert np.array_equal(loaded.vectors, emb.vectors)


def test_embedding_file_round_trip_binary(tmp_path):
    rng = np.random.default_rng(0)
    vectors = rng.normal(size=(3, 5)).astype(np.float32)
    emb = EmbeddingMatrix(vocab={"x": 0, "y": 1, "zed": 2}, words=["x", "y", "zed"],
                          vectors=vectors, kind="text-static")
    path = tmp_path / "emb.bin"
    save_embeddings(path, emb, binary=True)
    loaded = load_embeddings(path, binary=True, kind="text-static")
    assert loaded.words == emb.words
    assert np.array_equal(loaded.vectors, vectors)


def test_embedding_matrix_from_model_all_finite():
    seqs = [["u", "v", "w"] * 10]
    model = train_sgns(seqs, SgnsConfig(dim=6, epochs=2, lr_start=0.05,
                                        lr_end=1e-3, seed=1))
    emb = model.to_embedding_matrix("structure")
    assert emb.vectors.shape == (3, 6)
    assert np.all(np.isfinite(emb.vectors))
    assert emb.kind == "structure"
