"""Skip-gram with negative sampling over walk corpora or token text.

One trainer serves the structure branch (walks mapped to words) and the
static text baseline. The optional subword mode composes word vectors from
hashed character n-grams, so out-of-vocabulary words still get vectors.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class SgnsError(Exception):
    pass


@dataclass(frozen=True)
class SgnsConfig:
    dim: int = 128
    context_window: int = 10
    negatives: int = 5
    epochs: int = 5
    lr_start: float = 0.025
    lr_end: float = 1e-4
    min_count: int = 1
    subword: bool = False
    ngram_min: int = 3
    ngram_max: int = 6
    ngram_buckets: int = 100_000
    unigram_power: float = 0.75
    seed: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise SgnsError(f"dim must be >= 1, got {self.dim}")
        if self.negatives < 1:
            raise SgnsError(f"negatives must be >= 1, got {self.negatives}")
        if not self.lr_start >= self.lr_end > 0:
            raise SgnsError(f"need lr_start >= lr_end > 0, got {self.lr_start}, {self.lr_end}")
        if self.subword and self.ngram_min > self.ngram_max:
            raise SgnsError(f"ngram_min {self.ngram_min} > ngram_max {self.ngram_max}")


@dataclass
class EmbeddingMatrix:
    vocab: dict          # word -> row
    words: list          # row -> word
    vectors: np.ndarray  # (len(vocab), dim)
    kind: str            # structure | text-static | fused

    @property
    def dim(self):
        return self.vectors.shape[1]

    def get(self, word):
        row = self.vocab.get(word)
        return None if row is None else self.vectors[row]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def pair_loss(u, v_pos, v_negs):
    """Negative log-likelihood of one center/context pair with negatives:
    -(log s(u.v) + sum_k log s(-u.n_k))."""
    pos = _log_sigmoid(float(np.dot(u, v_pos)))
    negs = _log_sigmoid(-(v_negs @ u)).sum() if len(v_negs) else 0.0
    return -(pos + negs)


def pair_grads(u, v_pos, v_negs):
    """Analytic gradients of pair_loss wrt (u, v_pos, each negative row)."""
    g_pos = _sigmoid(float(np.dot(u, v_pos))) - 1.0
    g_negs = _sigmoid(v_negs @ u) if len(v_negs) else np.zeros(0)
    grad_u = g_pos * v_pos + (g_negs[:, None] * v_negs).sum(axis=0)
    grad_v = g_pos * u
    grad_negs = g_negs[:, None] * u[None, :]
    return grad_u, grad_v, grad_negs


def fnv1a_32(data: str) -> int:
    h = 0x811C9DC5
    for byte in data.encode("utf-8"):
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def word_ngrams(word: str, ngram_min: int, ngram_max: int) -> list:
    """Character n-grams of '<word>' with boundary markers. A word shorter
    than ngram_min (after markers) is kept as a single n-gram."""
    marked = f"<{word}>"
    if len(marked) < ngram_min:
        return [marked]
    grams = []
    for n in range(ngram_min, ngram_max + 1):
        for i in range(len(marked) - n + 1):
            grams.append(marked[i:i + n])
    return grams or [marked]


def ngram_buckets(word: str, cfg: SgnsConfig) -> list:
    return [fnv1a_32(g) % cfg.ngram_buckets for g in word_ngrams(word, cfg.ngram_min, cfg.ngram_max)]


class SgnsModel:
    """Trained skip-gram state: input/output matrices plus optional hashed
    n-gram matrix for subword composition."""

    def __init__(self, words, cfg, w_in, w_out, w_ngrams=None, epoch_losses=None):
        self.words = list(words)
        self.vocab = {w: i for i, w in enumerate(self.words)}
        self.cfg = cfg
        self.w_in = w_in
        self.w_out = w_out
        self.w_ngrams = w_ngrams
        self.epoch_losses = epoch_losses or []

    def vector(self, word):
        """Vector for any word: stored/composed for in-vocab, composed from
        n-grams only for OOV (subword mode); raises for OOV otherwise."""
        if self.cfg.subword:
            return subword_vector(word, self)
        row = self.vocab.get(word)
        if row is None:
            raise KeyError(f"{word!r} not in vocabulary")
        return self.w_in[row]

    def to_embedding_matrix(self, kind="structure") -> EmbeddingMatrix:
        vectors = np.stack([self.vector(w) for w in self.words]) if self.words \
            else np.zeros((0, self.cfg.dim))
        return EmbeddingMatrix(vocab=dict(self.vocab), words=list(self.words),
                               vectors=vectors.astype(np.float32), kind=kind)


def subword_vector(word, model: SgnsModel) -> np.ndarray:
    """Mean of the word's n-gram vectors plus the word vector when in-vocab."""
    if model.w_ngrams is None:
        raise SgnsError("model was not trained with subword=True")
    buckets = ngram_buckets(word, model.cfg)
    vec = model.w_ngrams[buckets].mean(axis=0)
    row = model.vocab.get(word)
    if row is not None:
        vec = vec + model.w_in[row]
    return vec


def _build_vocab(sequences, min_count):
    freq = Counter()
    for seq in sequences:
        freq.update(seq)
    words = sorted((w for w, c in freq.items() if c >= min_count),
                   key=lambda w: (-freq[w], w))
    return words, freq


def train_sgns(sequences, cfg: SgnsConfig) -> SgnsModel:
    """Train skip-gram with negative sampling; returns input-side vectors.

    Deterministic for a fixed (cfg.seed, input order). Negatives are drawn
    from the unigram distribution raised to cfg.unigram_power. The learning
    rate decays linearly per center position from lr_start to lr_end.
    """
    sequences = [list(s) for s in sequences]
    if not any(sequences):
        raise SgnsError("no input sequences")
    words, freq = _build_vocab(sequences, cfg.min_count)
    if not words:
        raise SgnsError(f"vocabulary is empty at min_count={cfg.min_count}")
    vocab = {w: i for i, w in enumerate(words)}
    seqs = [[vocab[w] for w in seq if w in vocab] for seq in sequences]
    seqs = [s for s in seqs if s]

    rng = np.random.default_rng(cfg.seed)
    bound = 0.5 / cfg.dim
    w_in = rng.uniform(-bound, bound, (len(words), cfg.dim))
    w_out = np.zeros((len(words), cfg.dim))
    w_ngrams = None
    grams_per_word = None
    if cfg.subword:
        w_ngrams = rng.uniform(-bound, bound, (cfg.ngram_buckets, cfg.dim))
        grams_per_word = [np.array(ngram_buckets(w, cfg)) for w in words]

    counts = np.array([freq[w] for w in words], dtype=np.float64)
    noise = counts ** cfg.unigram_power
    noise_cdf = np.cumsum(noise / noise.sum())

    total_steps = cfg.epochs * sum(len(s) for s in seqs)
    step = 0
    epoch_losses = []
    win, k = cfg.context_window, cfg.negatives
    for epoch in range(cfg.epochs):
        loss_sum, n_pairs = 0.0, 0
        for seq in seqs:
            n = len(seq)
            for i, center in enumerate(seq):
                lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * (step / max(total_steps - 1, 1))
                step += 1
                ctx = seq[max(0, i - win):i] + seq[i + 1:i + 1 + win]
                if not ctx:
                    continue
                ctx = np.array(ctx)
                negs = np.searchsorted(noise_cdf, rng.random(len(ctx) * k))
                if cfg.subword:
                    grams = grams_per_word[center]
                    u = w_in[center] + w_ngrams[grams].mean(axis=0)
                else:
                    u = w_in[center]
                v_ctx = w_out[ctx]
                v_neg = w_out[negs]
                pos_score = v_ctx @ u
                neg_score = v_neg @ u
                loss_sum += -(_log_sigmoid(pos_score).sum() + _log_sigmoid(-neg_score).sum())
                n_pairs += len(ctx)
                g_pos = _sigmoid(pos_score) - 1.0
                g_neg = _sigmoid(neg_score)
                grad_u = g_pos @ v_ctx + g_neg @ v_neg
                np.add.at(w_out, ctx, -lr * g_pos[:, None] * u[None, :])
                np.add.at(w_out, negs, -lr * g_neg[:, None] * u[None, :])
                w_in[center] -= lr * grad_u
                if cfg.subword:
                    np.add.at(w_ngrams, grams, -lr * grad_u[None, :] / len(grams))
        mean_loss = loss_sum / n_pairs if n_pairs else 0.0
        if not np.isfinite(mean_loss):
            raise SgnsError(f"non-finite loss {mean_loss} at epoch {epoch} "
                            f"(lr_start={cfg.lr_start}; try lowering it)")
        epoch_losses.append(mean_loss)
        log.info("epoch %d/%d: mean pair loss %.6f", epoch + 1, cfg.epochs, mean_loss)

    return SgnsModel(words, cfg, w_in, w_out, w_ngrams, epoch_losses)


def negative_sampling_probs(freqs, power=0.75) -> np.ndarray:
    p = np.asarray(freqs, dtype=np.float64) ** power
    return p / p.sum()


def save_embeddings(path, emb: EmbeddingMatrix, binary: bool = False):
    """Word-vector file: header `<count> <dim>`, then one word per line/record."""
    path = Path(path)
    count, dim = len(emb.words), emb.dim
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"{count} {dim}\n".encode("utf-8"))
            for i, w in enumerate(emb.words):
                fh.write(w.encode("utf-8") + b" ")
                fh.write(emb.vectors[i].astype("<f4").tobytes())
                fh.write(b"\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{count} {dim}\n")
            for i, w in enumerate(emb.words):
                values = " ".join(f"{float(x):.9g}" for x in emb.vectors[i])
                fh.write(f"{w} {values}\n")


def load_embeddings(path, binary: bool = False, kind: str = "structure") -> EmbeddingMatrix:
    path = Path(path)
    words, rows = [], []
    if binary:
        with open(path, "rb") as fh:
            count, dim = map(int, fh.readline().split())
            for _ in range(count):
                word_bytes = bytearray()
                while True:
                    ch = fh.read(1)
                    if ch == b" ":
                        break
                    if not ch:
                        raise SgnsError(f"{path}: truncated binary embedding file")
                    word_bytes += ch
                vec = np.frombuffer(fh.read(4 * dim), dtype="<f4")
                if len(vec) != dim:
                    raise SgnsError(f"{path}: truncated vector for {word_bytes!r}")
                fh.read(1)  # trailing newline
                words.append(word_bytes.decode("utf-8"))
                rows.append(vec)
    else:
        with open(path, encoding="utf-8") as fh:
            count, dim = map(int, fh.readline().split())
            for line in fh:
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise SgnsError(f"{path}: bad line width for {parts[0]!r}")
                words.append(parts[0])
                rows.append(np.array(parts[1:], dtype=np.float32))
    if len(words) != count:
        raise SgnsError(f"{path}: header says {count} words, found {len(words)}")
    vectors = np.stack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    if not np.all(np.isfinite(vectors)):
        raise SgnsError(f"{path}: non-finite vector entries")
    return EmbeddingMatrix(vocab={w: i for i, w in enumerate(words)}, words=words,
                           vectors=vectors.astype(np.float32), kind=kind)
