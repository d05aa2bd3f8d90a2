"""Node2Vec: second-order biased random walks fed to skip-gram."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np

from .skipgram import EmbeddingTable, SkipGramConfig, train_skipgram


@dataclass(frozen=True)
class Node2VecConfig:
    dim: int = 32
    walks_per_node: int = 10
    walk_length: int = 80
    p: float = 1.0
    q: float = 1.0
    skipgram: SkipGramConfig = field(default_factory=lambda: SkipGramConfig(window=10, dim=32, epochs=5))

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise ValueError("return and in-out parameters must be positive")
        if self.walks_per_node < 1 or self.walk_length < 1:
            raise ValueError("walk counts must be positive")


class _WalkGraph:
    """Sorted adjacency arrays for fast repeated sampling."""

    def __init__(self, g: nx.Graph):
        self.nodes = sorted(g.nodes, key=str)
        self.index = {n: i for i, n in enumerate(self.nodes)}
        self.nbrs: list[np.ndarray] = []
        self.weights: list[np.ndarray] = []
        self.nbr_sets: list[set[int]] = []
        for n in self.nodes:
            items = sorted(((self.index[m], float(d.get("weight", 1.0))) for m, d in g[n].items() if m != n))
            self.nbrs.append(np.array([i for i, _ in items], dtype=np.int64))
            self.weights.append(np.array([w for _, w in items], dtype=np.float64))
            self.nbr_sets.append({i for i, _ in items})

    def transition(self, prev: int | None, cur: int, p: float, q: float) -> tuple[np.ndarray, np.ndarray]:
        nbrs, w = self.nbrs[cur], self.weights[cur]
        if prev is None:
            return nbrs, w / w.sum()
        prev_set = self.nbr_sets[prev]
        bias = np.array([1.0 / p if x == prev else (1.0 if x in prev_set else 1.0 / q) for x in nbrs])
        un = w * bias
        return nbrs, un / un.sum()


def transition_probabilities(g: nx.Graph, prev, cur, p: float = 1.0, q: float = 1.0) -> dict:
    """Next-step distribution of a walk currently at ``cur`` having come from ``prev``."""
    wg = _WalkGraph(g)
    nbrs, probs = wg.transition(None if prev is None else wg.index[prev], wg.index[cur], p, q)
    return {wg.nodes[i]: float(pr) for i, pr in zip(nbrs, probs)}


def generate_walks(g: nx.Graph, cfg: Node2VecConfig, seed: int) -> list[list]:
    """``walks_per_node`` rounds; round r uses its own RNG stream ``(seed, r)``."""
    wg = _WalkGraph(g)
    starts = [i for i in range(len(wg.nodes)) if len(wg.nbrs[i])]
    walks = []
    for r in range(cfg.walks_per_node):
        rng = np.random.default_rng([seed, r])
        for s in rng.permutation(starts):
            walk = [int(s)]
            prev = None
            while len(walk) < cfg.walk_length:
                cur = walk[-1]
                nbrs, probs = wg.transition(prev, cur, cfg.p, cfg.q)
                cdf = np.cumsum(probs)
                j = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(nbrs) - 1)
                prev = cur
                walk.append(int(nbrs[j]))
            walks.append([wg.nodes[i] for i in walk])
    return walks


def node2vec_embed(g: nx.Graph, cfg: Node2VecConfig | None = None) -> EmbeddingTable:
    """Embed every node of ``g``; isolated nodes get the zero vector."""
    cfg = cfg or Node2VecConfig()
    sg = replace(cfg.skipgram, dim=cfg.dim)
    nodes = sorted(g.nodes, key=str)
    walks = generate_walks(g, cfg, sg.seed)
    vectors = np.zeros((len(nodes), cfg.dim))
    history: tuple[float, ...] = ()
    if walks:
        table = train_skipgram([[str(n) for n in w] for w in walks], sg)
        history = table.loss_history
        for i, n in enumerate(nodes):
            vec = table.get(str(n))
            if vec is not None:
                vectors[i] = vec
    return EmbeddingTable(tuple(str(n) for n in nodes), vectors, history)
