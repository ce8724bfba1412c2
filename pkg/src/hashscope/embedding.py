"""Shallow embedding trainer: skip-gram and CBOW with negative sampling.

Token sequences go in, a vocabulary-indexed dense vector table comes out.
Training is mini-batched numpy SGD: gradients within a batch are computed at
the batch's starting parameters, and scatter-adds apply every pair's update,
so results are bit-reproducible for a fixed seed.  Input vectors are
initialized per token from a hash of the token text, which makes tables
trained on overlapping vocabularies start from comparable coordinates.
"""

from __future__ import annotations

import hashlib
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

MAGIC = b"HSEM"
FORMAT_VERSION = 1


class VocabularyError(ValueError):
    """No usable tokens after filtering."""


class TrainingDivergedError(RuntimeError):
    """Non-finite values appeared in the embedding matrices."""


@dataclass
class Vocabulary:
    """Bijective token/index mapping with per-token frequencies.

    Indices are assigned by descending frequency, ties broken lexically.
    """

    tokens: list[str]
    counts: np.ndarray
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.counts = np.asarray(self.counts, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index


@dataclass
class TrainConfig:
    mode: str = "skipgram"
    dimension: int = 300
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    noise_power: float = 0.75
    min_count: int = 1
    subsample: float = 0.0
    batch_size: int = 1024
    seed: int = 0

    def validate(self) -> None:
        if self.mode not in ("skipgram", "cbow"):
            raise ValueError(f"mode must be 'skipgram' or 'cbow', got {self.mode!r}")
        if self.dimension < 1 or self.negatives < 1 or self.window < 1:
            raise ValueError("dimension, negatives, and window must all be >= 1")
        if self.epochs < 1 or self.batch_size < 1 or self.min_count < 1:
            raise ValueError("epochs, batch_size, and min_count must all be >= 1")


@dataclass
class EmbeddingTable:
    vocab: Vocabulary
    vectors: np.ndarray                     # |vocab| x d float32 input vectors
    output_vectors: np.ndarray | None = None  # training-side matrix
    heldout_loss: list[float] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.vocab.index[token]]


def build_vocab(sentences: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    freq = Counter()
    for sentence in sentences:
        freq.update(sentence)
    kept = sorted(
        ((t, c) for t, c in freq.items() if c >= min_count),
        key=lambda item: (-item[1], item[0]),
    )
    if not kept:
        raise VocabularyError(f"no tokens with count >= {min_count}")
    tokens = [t for t, _ in kept]
    counts = np.array([c for _, c in kept], dtype=np.int64)
    return Vocabulary(tokens=tokens, counts=counts)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):  # NaN inputs surface in the finiteness check
        return -np.logaddexp(0.0, -np.clip(x, -30.0, 30.0))


def skipgram_pair_loss(center_vec, context_vec, neg_vecs):
    """Loss and analytic gradients for one (center, context, negatives) triple.

    loss = -log s(c.o) - sum_k log s(-c.n_k); reference implementation the
    batched trainer must agree with.
    """
    c = np.asarray(center_vec, dtype=np.float64)
    o = np.asarray(context_vec, dtype=np.float64)
    negs = np.asarray(neg_vecs, dtype=np.float64)
    s_pos = _sigmoid(np.array(c @ o))
    s_neg = _sigmoid(negs @ c)
    loss = -float(_log_sigmoid(np.array(c @ o))) - float(_log_sigmoid(-(negs @ c)).sum())
    grad_c = (s_pos - 1.0) * o + s_neg @ negs
    grad_o = (s_pos - 1.0) * c
    grad_negs = s_neg[:, None] * c[None, :]
    return loss, grad_c, grad_o, grad_negs


def cbow_pair_loss(context_vecs, target_vec, neg_vecs):
    """Loss and analytic gradients for one CBOW (contexts, target, negatives) triple.

    The hidden vector is the mean of the context vectors; each context row
    receives an equal share of the hidden gradient.
    """
    ctx = np.asarray(context_vecs, dtype=np.float64)
    t = np.asarray(target_vec, dtype=np.float64)
    negs = np.asarray(neg_vecs, dtype=np.float64)
    h = ctx.mean(axis=0)
    s_pos = _sigmoid(np.array(h @ t))
    s_neg = _sigmoid(negs @ h)
    loss = -float(_log_sigmoid(np.array(h @ t))) - float(_log_sigmoid(-(negs @ h)).sum())
    grad_h = (s_pos - 1.0) * t + s_neg @ negs
    grad_ctx = np.tile(grad_h / len(ctx), (len(ctx), 1))
    grad_t = (s_pos - 1.0) * h
    grad_negs = s_neg[:, None] * h[None, :]
    return loss, grad_ctx, grad_t, grad_negs


def _token_seed(seed: int, token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return ((seed & 0xFFFFFFFFFFFFFFFF) << 64) | int.from_bytes(digest, "little")


def init_vectors(vocab: Vocabulary, config: TrainConfig) -> np.ndarray:
    """Per-token deterministic uniform init in [-0.5/d, 0.5/d]."""
    d = config.dimension
    out = np.empty((len(vocab), d), dtype=np.float32)
    for i, token in enumerate(vocab.tokens):
        r = np.random.default_rng(_token_seed(config.seed, token))
        out[i] = (r.random(d, dtype=np.float64) - 0.5) / d
    return out


def _encode(sentences, vocab: Vocabulary) -> list[np.ndarray]:
    idx = vocab.index
    out = []
    for sentence in sentences:
        enc = [idx[t] for t in sentence if t in idx]
        if len(enc) >= 2:
            out.append(np.array(enc, dtype=np.int32))
    return out


def _apply_subsampling(encoded, counts, threshold, rng):
    total = counts.sum()
    keep_p = np.minimum(1.0, np.sqrt(threshold * total / counts))
    out = []
    for sent in encoded:
        kept = sent[rng.random(len(sent)) < keep_p[sent]]
        if len(kept) >= 2:
            out.append(kept)
    return out


def _skipgram_pairs(encoded: list[np.ndarray], window: int):
    """(center, context) index arrays for every in-window ordered pair."""
    by_len: dict[int, list[np.ndarray]] = {}
    for sent in encoded:
        by_len.setdefault(len(sent), []).append(sent)
    centers, contexts = [], []
    for length in sorted(by_len):
        mat = np.stack(by_len[length])
        ci, oi = [], []
        for i in range(length):
            for j in range(max(0, i - window), min(length, i + window + 1)):
                if j != i:
                    ci.append(i)
                    oi.append(j)
        if not ci:
            continue
        centers.append(mat[:, ci].ravel())
        contexts.append(mat[:, oi].ravel())
    if not centers:
        raise VocabularyError("no co-occurring token pairs to train on")
    return np.concatenate(centers), np.concatenate(contexts)


def _cbow_examples(encoded: list[np.ndarray], window: int):
    """(target, padded context matrix) for every position; pad index is -1."""
    by_len: dict[int, list[np.ndarray]] = {}
    for sent in encoded:
        by_len.setdefault(len(sent), []).append(sent)
    targets, ctx_blocks = [], []
    max_ctx = 0
    for length in sorted(by_len):
        mat = np.stack(by_len[length])
        template = np.full((length, 2 * window), -1, dtype=np.int64)
        for i in range(length):
            cols = [j for j in range(max(0, i - window), min(length, i + window + 1)) if j != i]
            template[i, : len(cols)] = cols
        width = max(int((template >= 0).sum(axis=1).max()), 1)
        template = template[:, :width]
        max_ctx = max(max_ctx, width)
        ctx = np.where(template[None, :, :] >= 0, mat[:, np.clip(template, 0, None)], -1)
        targets.append(mat.ravel())
        ctx_blocks.append(ctx.reshape(-1, width).astype(np.int32))
    if not targets:
        raise VocabularyError("no co-occurring token pairs to train on")
    padded = [np.pad(b, ((0, 0), (0, max_ctx - b.shape[1])), constant_values=-1)
              for b in ctx_blocks]
    return np.concatenate(targets).astype(np.int32), np.concatenate(padded)


def _noise_cdf(counts: np.ndarray, power: float) -> np.ndarray:
    w = np.power(counts.astype(np.float64), power)
    cdf = np.cumsum(w)
    return cdf / cdf[-1]


def _scatter_add(matrix: np.ndarray, rows: np.ndarray, grads: np.ndarray) -> None:
    """matrix[rows] += grads with duplicate rows accumulated.

    Sparse-matrix accumulation; much faster than np.add.at for the batch
    sizes and vocabulary sizes used here.
    """
    if len(rows) == 0:
        return
    ones = np.ones(len(rows), dtype=np.float32)
    s = sparse.csr_matrix(
        (ones, (rows, np.arange(len(rows)))), shape=(len(matrix), len(rows))
    )
    matrix += s @ grads


def _heldout_loss_skipgram(w_in, w_out, centers, contexts, negs):
    vc = w_in[centers]
    pos = np.einsum("bd,bd->b", vc, w_out[contexts])
    neg = np.einsum("bkd,bd->bk", w_out[negs], vc)
    neg_mask = negs != contexts[:, None]
    return float(-(_log_sigmoid(pos).sum() + (_log_sigmoid(-neg) * neg_mask).sum())
                 / len(centers))


def _heldout_loss_cbow(w_in, w_out, targets, ctx, negs):
    mask = ctx >= 0
    gathered = w_in[np.clip(ctx, 0, None)] * mask[:, :, None]
    h = gathered.sum(axis=1) / np.maximum(mask.sum(axis=1), 1)[:, None]
    pos = np.einsum("bd,bd->b", h, w_out[targets])
    neg = np.einsum("bkd,bd->bk", w_out[negs], h)
    neg_mask = negs != targets[:, None]
    return float(-(_log_sigmoid(pos).sum() + (_log_sigmoid(-neg) * neg_mask).sum())
                 / len(targets))


def _step_skipgram(w_in, w_out, centers, contexts, negs, lr):
    lr = np.float32(lr)
    vc = w_in[centers]
    wo = w_out[contexts]
    wn = w_out[negs]
    g_pos = (_sigmoid(np.einsum("bd,bd->b", vc, wo)) - 1.0).astype(np.float32)  # B
    g_neg = _sigmoid(np.einsum("bkd,bd->bk", wn, vc)).astype(np.float32)        # B x K
    g_neg *= negs != contexts[:, None]
    grad_c = g_pos[:, None] * wo + np.einsum("bk,bkd->bd", g_neg, wn)
    _scatter_add(w_in, centers, -lr * grad_c)
    out_rows = np.concatenate((contexts, negs.ravel()))
    out_grads = np.concatenate((
        -lr * g_pos[:, None] * vc,
        (-lr * g_neg[:, :, None] * vc[:, None, :]).reshape(-1, vc.shape[1]),
    ))
    _scatter_add(w_out, out_rows, out_grads)


def _step_cbow(w_in, w_out, targets, ctx, negs, lr):
    lr = np.float32(lr)
    mask = ctx >= 0
    counts = np.maximum(mask.sum(axis=1), 1).astype(np.float32)
    gathered = w_in[np.clip(ctx, 0, None)] * mask[:, :, None]
    h = gathered.sum(axis=1) / counts[:, None]
    wt = w_out[targets]
    wn = w_out[negs]
    g_pos = (_sigmoid(np.einsum("bd,bd->b", h, wt)) - 1.0).astype(np.float32)
    g_neg = _sigmoid(np.einsum("bkd,bd->bk", wn, h)).astype(np.float32)
    g_neg *= negs != targets[:, None]
    grad_h = g_pos[:, None] * wt + np.einsum("bk,bkd->bd", g_neg, wn)
    grad_ctx = (grad_h / counts[:, None])[:, None, :] * mask[:, :, None]
    _scatter_add(w_in, ctx[mask], -lr * grad_ctx[mask])
    out_rows = np.concatenate((targets, negs.ravel()))
    out_grads = np.concatenate((
        -lr * g_pos[:, None] * h,
        (-lr * g_neg[:, :, None] * h[:, None, :]).reshape(-1, h.shape[1]),
    ))
    _scatter_add(w_out, out_rows, out_grads)


def train(
    sentences: Iterable[Sequence[str]],
    config: TrainConfig,
    vocab: Vocabulary | None = None,
) -> EmbeddingTable:
    """Train an embedding table over token sequences.

    Deterministic for a fixed config seed.  Tracks a held-out co-occurrence
    loss per epoch in the returned table (index 0 is the pre-training loss).
    Raises TrainingDivergedError if non-finite values appear.
    """
    config.validate()
    sentences = list(sentences)
    if vocab is None:
        vocab = build_vocab(sentences, config.min_count)
    if len(vocab) == 0:
        raise VocabularyError("empty vocabulary")

    rng = np.random.default_rng(config.seed)
    encoded = _encode(sentences, vocab)
    if config.subsample > 0:
        encoded = _apply_subsampling(encoded, vocab.counts, config.subsample, rng)
    if not encoded:
        raise VocabularyError("no sentences with >= 2 in-vocabulary tokens")

    w_in = init_vectors(vocab, config)
    w_out = np.zeros((len(vocab), config.dimension), dtype=np.float32)
    noise_cdf = _noise_cdf(vocab.counts, config.noise_power)
    k = config.negatives

    if config.mode == "skipgram":
        centers, contexts = _skipgram_pairs(encoded, config.window)
        n_examples = len(centers)
    else:
        targets, ctx_matrix = _cbow_examples(encoded, config.window)
        n_examples = len(targets)

    # frozen held-out sample: fixed example subset with fixed negatives
    held_n = min(10000, n_examples)
    held_idx = rng.choice(n_examples, size=held_n, replace=False)
    held_negs = np.searchsorted(noise_cdf, rng.random((held_n, k))).astype(np.int32)

    def heldout() -> float:
        if config.mode == "skipgram":
            return _heldout_loss_skipgram(
                w_in, w_out, centers[held_idx], contexts[held_idx], held_negs)
        return _heldout_loss_cbow(
            w_in, w_out, targets[held_idx], ctx_matrix[held_idx], held_negs)

    history = [heldout()]
    batches_per_epoch = math.ceil(n_examples / config.batch_size)
    total_steps = max(config.epochs * batches_per_epoch, 1)
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n_examples)
        for lo in range(0, n_examples, config.batch_size):
            sel = order[lo: lo + config.batch_size]
            lr = config.learning_rate + (
                config.min_learning_rate - config.learning_rate
            ) * (step / total_steps)
            negs = np.searchsorted(noise_cdf, rng.random((len(sel), k))).astype(np.int32)
            if config.mode == "skipgram":
                _step_skipgram(w_in, w_out, centers[sel], contexts[sel], negs, lr)
            else:
                _step_cbow(w_in, w_out, targets[sel], ctx_matrix[sel], negs, lr)
            step += 1
        if not (np.isfinite(w_in).all() and np.isfinite(w_out).all()):
            raise TrainingDivergedError(
                f"non-finite embedding values after epoch {epoch + 1}; "
                f"lr={config.learning_rate}, mode={config.mode}"
            )
        loss = heldout()
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite held-out loss after epoch {epoch + 1}; "
                f"lr={config.learning_rate}, mode={config.mode}"
            )
        history.append(loss)

    return EmbeddingTable(vocab=vocab, vectors=w_in, output_vectors=w_out,
                          heldout_loss=history)


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cosine similarity; lies in [0, 2]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine distance undefined for zero-norm vector")
    return float(np.clip(1.0 - (u @ v) / (nu * nv), 0.0, 2.0))


def nearest_neighbors(table: EmbeddingTable, token: str, k: int) -> list[str]:
    """k tokens closest to the query by cosine distance, query excluded.

    Ties break on vocabulary index, so results are stable across runs.
    """
    if token not in table.vocab:
        raise KeyError(f"unknown token {token!r}")
    if k <= 0:
        return []
    q = table.vectors[table.vocab.index[token]].astype(np.float64)
    nq = np.linalg.norm(q)
    if nq == 0.0:
        raise ValueError("cosine distance undefined for zero-norm vector")
    mat = table.vectors.astype(np.float64)
    norms = np.linalg.norm(mat, axis=1)
    norms[norms == 0.0] = 1.0
    dist = 1.0 - (mat @ q) / (norms * nq)
    order = np.lexsort((np.arange(len(dist)), dist))
    out = []
    qi = table.vocab.index[token]
    for i in order:
        if i == qi:
            continue
        out.append(table.vocab.tokens[i])
        if len(out) == k:
            break
    return out


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    """Binary format: header, token strings with counts, float32 matrix."""
    vec = np.ascontiguousarray(table.vectors, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQI", FORMAT_VERSION, len(table.vocab), table.dimension))
        for token, count in zip(table.vocab.tokens, table.vocab.counts):
            raw = token.encode("utf-8")
            fh.write(struct.pack("<IQ", len(raw), int(count)))
            fh.write(raw)
        fh.write(vec.tobytes())


def load_table(path: str | Path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"not an embedding table file (magic {magic!r})")
        version, n, d = struct.unpack("<IQI", fh.read(16))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported table version {version}")
        tokens, counts = [], []
        for _ in range(n):
            length, count = struct.unpack("<IQ", fh.read(12))
            tokens.append(fh.read(length).decode("utf-8"))
            counts.append(count)
        mat = np.frombuffer(fh.read(n * d * 4), dtype="<f4").reshape(n, d).copy()
    vocab = Vocabulary(tokens=tokens, counts=np.array(counts, dtype=np.int64))
    return EmbeddingTable(vocab=vocab, vectors=mat)


def save_table_text(table: EmbeddingTable, path: str | Path) -> None:
    """Plain-text interop format: token then d floats per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vocab)} {table.dimension}\n")
        for i, token in enumerate(table.vocab.tokens):
            floats = " ".join(f"{x:.8g}" for x in table.vectors[i])
            fh.write(f"{token} {floats}\n")


def load_table_text(path: str | Path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        n, d = (int(x) for x in fh.readline().split())
        tokens, rows = [], []
        for _ in range(n):
            parts = fh.readline().rstrip("\n").split(" ")
            tokens.append(parts[0])
            rows.append([float(x) for x in parts[1: d + 1]])
    vocab = Vocabulary(tokens=tokens, counts=np.ones(n, dtype=np.int64))
    return EmbeddingTable(vocab=vocab, vectors=np.array(rows, dtype=np.float32))
