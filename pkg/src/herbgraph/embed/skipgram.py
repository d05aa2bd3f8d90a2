"""Skip-gram with negative sampling (word2vec-style), in plain numpy."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import LayoutMismatch, VocabularyTooSmall
from .io import read_matrix, write_matrix


@dataclass(frozen=True)
class SkipGramConfig:
    window: int = 5
    dim: int = 15
    negatives: int = 5
    epochs: int = 15
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    seed: int = 0
    batch_size: int = 64
    unigram_power: float = 0.75

    def __post_init__(self):
        if self.window < 1 or self.dim < 1 or self.negatives < 1 or self.epochs < 0:
            raise ValueError(f"invalid skip-gram config: {self}")
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError(f"invalid skip-gram config: {self}")


@dataclass
class EmbeddingTable:
    tokens: tuple[str, ...]
    vectors: np.ndarray
    loss_history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.shape[0] != len(self.tokens):
            raise ValueError("one vector per token required")
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, token) -> bool:
        return token in self._index

    def __getitem__(self, token) -> np.ndarray:
        return self.vectors[self._index[token]]

    def get(self, token, default=None):
        i = self._index.get(token)
        return default if i is None else self.vectors[i]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return self.tokens == other.tokens and np.array_equal(self.vectors, other.vectors)

    def save(self, path: str | Path, dtype: str = "f32") -> None:
        write_matrix(path, self.vectors, {"kind": "embedding", "dim": self.dim,
                                          "tokens": list(self.tokens)}, dtype=dtype)

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        values, meta = read_matrix(path)
        if meta.get("kind") != "embedding" or meta.get("dim") != values.shape[1]:
            raise LayoutMismatch(f"{path} is not an embedding table")
        return cls(tuple(meta["tokens"]), values)


def _vocabulary(sentences: Sequence[Sequence[str]]) -> tuple[list[str], np.ndarray]:
    counts = Counter(tok for s in sentences for tok in s)
    vocab = sorted(counts, key=lambda t: (-counts[t], t))
    return vocab, np.array([counts[t] for t in vocab], dtype=np.float64)


def _context_pairs(encoded: list[np.ndarray], window: int) -> np.ndarray:
    centers, contexts = [], []
    for ids in encoded:
        n = len(ids)
        for off in range(1, window + 1):
            if off >= n:
                break
            centers += [ids[:-off], ids[off:]]
            contexts += [ids[off:], ids[:-off]]
    if not centers:
        return np.empty((0, 2), dtype=np.int64)
    return np.stack([np.concatenate(centers), np.concatenate(contexts)], axis=1)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def train_skipgram(sentences: Sequence[Sequence[str]], cfg: SkipGramConfig) -> EmbeddingTable:
    """Learn one ``cfg.dim`` vector per distinct token.

    Every (center, context) pair within ``cfg.window`` positions of the same
    sentence is a positive example; ``cfg.negatives`` noise tokens per pair are
    drawn from the unigram distribution raised to ``cfg.unigram_power``. Mini-
    batch SGD with a linearly decaying step size. The returned table carries
    the mean loss of each epoch in ``loss_history``.
    """
    vocab, counts = _vocabulary(sentences)
    if len(vocab) < 2:
        raise VocabularyTooSmall(f"need at least 2 distinct tokens, got {len(vocab)}")
    index = {t: i for i, t in enumerate(vocab)}
    encoded = [np.array([index[t] for t in s], dtype=np.int64) for s in sentences if len(s)]
    pairs = _context_pairs(encoded, cfg.window)

    rng = np.random.default_rng(cfg.seed)
    v, d = len(vocab), cfg.dim
    w_in = (rng.random((v, d)) - 0.5) / d
    w_out = np.zeros((v, d))
    if len(pairs) == 0 or cfg.epochs == 0:
        return EmbeddingTable(tuple(vocab), w_in, ())

    noise = counts ** cfg.unigram_power
    noise_cdf = np.cumsum(noise / noise.sum())
    noise_cdf[-1] = 1.0

    eval_negs = np.searchsorted(noise_cdf, np.random.default_rng([cfg.seed, 1]).random((len(pairs), cfg.negatives)),
                                side="right")
    eval_keep = (eval_negs != pairs[:, 1:2]).astype(np.float64)

    def frozen_loss() -> float:
        vc = w_in[pairs[:, 0]]
        pos = np.einsum("bd,bd->b", vc, w_out[pairs[:, 1]])
        neg = np.einsum("bd,bkd->bk", vc, w_out[eval_negs])
        return -float(_log_sigmoid(pos).sum() + (eval_keep * _log_sigmoid(-neg)).sum()) / len(pairs)

    n_batches = -(-len(pairs) // cfg.batch_size)
    total_steps = n_batches * cfg.epochs
    history = []
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        for b in range(n_batches):
            lr = cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) * step / total_steps
            lr = max(lr, cfg.min_learning_rate)
            step += 1
            batch = pairs[order[b * cfg.batch_size:(b + 1) * cfg.batch_size]]
            c, o = batch[:, 0], batch[:, 1]
            negs = np.searchsorted(noise_cdf, rng.random((len(batch), cfg.negatives)), side="right")
            keep = (negs != o[:, None]).astype(np.float64)

            vc = w_in[c]
            uo = w_out[o]
            un = w_out[negs]
            pos_score = np.einsum("bd,bd->b", vc, uo)
            neg_score = np.einsum("bd,bkd->bk", vc, un)

            g_pos = 1.0 / (1.0 + np.exp(-pos_score)) - 1.0
            g_neg = keep / (1.0 + np.exp(-neg_score))
            grad_vc = g_pos[:, None] * uo + np.einsum("bk,bkd->bd", g_neg, un)
            np.add.at(w_out, o, -lr * g_pos[:, None] * vc)
            np.add.at(w_out, negs.ravel(), (-lr * g_neg[:, :, None] * vc[:, None, :]).reshape(-1, d))
            np.add.at(w_in, c, -lr * grad_vc)
        history.append(frozen_loss())
    return EmbeddingTable(tuple(vocab), w_in, tuple(history))
