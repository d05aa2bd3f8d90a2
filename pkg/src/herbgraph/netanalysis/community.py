"""Property co-occurrence counts and Louvain community detection."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import networkx as nx
import numpy as np

from ..errors import EmptyGraph
from ..kg import PROPERTY_KINDS, KnowledgeGraph


@dataclass(frozen=True)
class Cooccurrence:
    tokens: tuple[str, ...]
    values: np.ndarray  # symmetric int matrix; diagonal holds token frequency

    def to_graph(self) -> nx.Graph:
        """Weighted token graph of the nonzero off-diagonal entries."""
        g = nx.Graph()
        g.add_nodes_from(self.tokens)
        n = len(self.tokens)
        for i in range(n):
            for j in range(i + 1, n):
                if self.values[i, j]:
                    g.add_edge(self.tokens[i], self.tokens[j], weight=float(self.values[i, j]))
        return g


def cooccurrence_matrix(kg: KnowledgeGraph) -> Cooccurrence:
    """Herb counts per pair of property tokens (natures, flavors, meridians in vocabulary order)."""
    tokens: list[str] = []
    for kind in PROPERTY_KINDS:
        tokens += [t for t in kg.vocab.tokens(kind) if t not in tokens]
    index = {t: i for i, t in enumerate(tokens)}
    incidence = np.zeros((len(kg.herbs), len(tokens)), dtype=np.int64)
    for r, h in enumerate(kg.herbs.values()):
        for kind in PROPERTY_KINDS:
            for t in h.properties(kind):
                if t in index:
                    incidence[r, index[t]] = 1
    return Cooccurrence(tuple(tokens), incidence.T @ incidence)


@dataclass(frozen=True)
class Partition:
    membership: dict  # node -> community id, ids dense from 0
    modularity: float
    level_modularity: tuple[float, ...] = field(default=())

    @property
    def n_communities(self) -> int:
        return len(set(self.membership.values()))

    def communities(self) -> list[list]:
        out: list[list] = [[] for _ in range(self.n_communities)]
        for node, c in self.membership.items():
            out[c].append(node)
        return out


def modularity(g: nx.Graph, membership: dict, weight: str = "weight") -> float:
    """Newman modularity of an undirected weighted graph (self-loops count twice in degrees)."""
    two_m = 0.0
    internal: dict = {}
    total: dict = {}
    for u, v, d in g.edges(data=True):
        w = d.get(weight, 1.0)
        two_m += 2 * w
        cu, cv = membership[u], membership[v]
        total[cu] = total.get(cu, 0.0) + w
        total[cv] = total.get(cv, 0.0) + w
        if cu == cv:
            internal[cu] = internal.get(cu, 0.0) + 2 * w
    if two_m == 0:
        raise EmptyGraph("graph has no weighted edges")
    return sum(internal.get(c, 0.0) / two_m - (total[c] / two_m) ** 2 for c in total)


class _Level:
    """Weighted graph in adjacency-dict form with self-loop weights."""

    def __init__(self, n: int, adj: list[dict[int, float]], loops: np.ndarray):
        self.n = n
        self.adj = adj
        self.loops = loops
        self.degree = np.array([2 * loops[i] + sum(adj[i].values()) for i in range(n)])
        self.two_m = float(self.degree.sum())


def _one_level(level: _Level, rng: np.random.Generator, init: np.ndarray | None = None) -> tuple[np.ndarray, bool]:
    """Greedy local moving until no single move raises modularity."""
    comm = np.arange(level.n) if init is None else init.copy()
    tot = np.bincount(comm, weights=level.degree, minlength=level.n).astype(np.float64)
    size = np.bincount(comm, minlength=level.n)
    m2 = level.two_m
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in rng.permutation(level.n):
            ci = comm[i]
            ki = level.degree[i]
            links: dict[int, float] = {}
            for j, w in level.adj[i].items():
                links[comm[j]] = links.get(comm[j], 0.0) + w
            tot[ci] -= ki
            size[ci] -= 1
            # gain of joining c, up to a common factor: k_i,in(c) - k_i * tot(c) / 2m
            best_c, best_gain = ci, links.get(ci, 0.0) - ki * tot[ci] / m2
            for c in sorted(links):
                gain = links[c] - ki * tot[c] / m2
                if gain > best_gain + 1e-12:
                    best_c, best_gain = c, gain
            if best_gain < -1e-12 and size[ci] > 0:
                best_c = int(np.flatnonzero(size == 0)[0])  # leaving for a new community scores 0
            tot[best_c] += ki
            size[best_c] += 1
            if best_c != ci:
                comm[i] = best_c
                improved = moved_any = True
    return comm, moved_any


def _aggregate(level: _Level, comm: np.ndarray) -> tuple[_Level, np.ndarray]:
    labels, dense = np.unique(comm, return_inverse=True)
    k = len(labels)
    adj: list[dict[int, float]] = [dict() for _ in range(k)]
    loops = np.zeros(k)
    for i in range(level.n):
        ci = dense[i]
        loops[ci] += level.loops[i]
        for j, w in level.adj[i].items():
            cj = dense[j]
            if ci == cj:
                loops[ci] += w / 2  # each internal edge is seen from both ends
            else:
                adj[ci][cj] = adj[ci].get(cj, 0.0) + w
    return _Level(k, adj, loops), dense


def _kl_refine(level: _Level, labels: np.ndarray) -> np.ndarray:
    """Vertex-mover fine-tuning: move every node once, each time along the best
    available move even when it lowers modularity, then roll back to the best
    state seen. Repeated while a sweep improves on its starting point."""
    n, m2 = level.n, level.two_m
    labels = np.unique(labels, return_inverse=True)[1]

    def quality(lab):
        tot = np.bincount(lab, weights=level.degree, minlength=n)
        inside = np.bincount(lab, weights=2 * level.loops, minlength=n)
        for i in range(n):
            for j, w in level.adj[i].items():
                if lab[i] == lab[j]:
                    inside[lab[i]] += w
        return float(np.sum(inside / m2 - (tot / m2) ** 2))

    current = quality(labels)
    while True:
        lab = labels.copy()
        tot = np.bincount(lab, weights=level.degree, minlength=n).astype(np.float64)
        size = np.bincount(lab, minlength=n)
        q = best_q = current
        best = lab.copy()
        free = np.ones(n, dtype=bool)
        for _ in range(n):
            move = None
            for i in np.flatnonzero(free):
                ci, ki = lab[i], level.degree[i]
                links: dict[int, float] = {}
                for j, w in level.adj[i].items():
                    links[lab[j]] = links.get(lab[j], 0.0) + w
                cands = sorted(c for c in links if c != ci)
                if size[ci] > 1:
                    cands.append(int(np.flatnonzero(size == 0)[0]))
                for c in cands:
                    dq = 2 * (links.get(c, 0.0) - links.get(ci, 0.0)) / m2 \
                        - 2 * ki * (tot[c] - tot[ci] + ki) / m2 ** 2
                    if move is None or dq > move[0] + 1e-15:
                        move = (dq, i, c)
            if move is None:
                break
            dq, i, c = move
            tot[lab[i]] -= level.degree[i]
            size[lab[i]] -= 1
            tot[c] += level.degree[i]
            size[c] += 1
            lab[i] = c
            free[i] = False
            q += dq
            if q > best_q + 1e-12:
                best_q, best = q, lab.copy()
        if best_q <= current + 1e-12:
            return labels
        labels, current = np.unique(best, return_inverse=True)[1], quality(best)


@lru_cache(maxsize=None)
def _block_assignments(u: int, r: int) -> np.ndarray:
    """Every partition of u ordered items into at most r blocks, as canonical
    label rows (first item in block 0, each new block numbered next)."""
    digits = (np.arange(r ** (u - 1))[:, None] // r ** np.arange(u - 1)[::-1]) % r
    rows = np.hstack([np.zeros((len(digits), 1), dtype=np.int64), digits])
    prev_max = np.maximum.accumulate(rows, axis=1)
    ok = np.all(rows[:, 1:] <= prev_max[:, :-1] + 1, axis=1)
    return rows[ok]


def _regroup(level: _Level, labels: np.ndarray, max_group: int = 3, max_union: int = 12) -> np.ndarray:
    """For every set of up to ``max_group`` communities whose union has at most
    ``max_union`` nodes, replace them by the best repartition of the union
    into at most that many parts (exhaustive over all such partitions)."""
    m2 = level.two_m
    labels = np.unique(labels, return_inverse=True)[1]
    changed = True
    while changed:
        changed = False
        k = int(labels.max()) + 1
        for r in range(2, max_group + 1):
            for group in combinations(range(k), r):
                union = np.flatnonzero(np.isin(labels, group))
                u = len(union)
                if u > max_union:
                    continue
                pos = {int(n): i for i, n in enumerate(union)}
                w = np.diag(2 * level.loops[union])
                for i, n in enumerate(union):
                    for j, wt in level.adj[n].items():
                        if j in pos:
                            w[i, pos[j]] += wt
                deg = level.degree[union]
                rows = _block_assignments(u, r)
                score = np.zeros(len(rows))
                for blk in range(r):
                    s_ = (rows == blk).astype(np.float64)
                    score += np.einsum("ri,ij,rj->r", s_, w, s_) / m2 - (s_ @ deg / m2) ** 2
                now = 0.0
                for c in group:
                    s_ = (labels[union] == c).astype(np.float64)
                    now += s_ @ w @ s_ / m2 - (s_ @ deg / m2) ** 2
                best = int(np.argmax(score))
                if score[best] > now + 1e-12:
                    labels = labels.copy()
                    labels[union] = np.asarray(group)[rows[best]]
                    labels = np.unique(labels, return_inverse=True)[1]
                    changed = True
                    break
            if changed:
                break
    return labels


def _densify(nodes: list, labels: np.ndarray) -> dict:
    remap: dict[int, int] = {}
    out = {}
    for node, c in zip(nodes, labels):
        out[node] = remap.setdefault(int(c), len(remap))
    return out


def _louvain_once(g: nx.Graph, nodes: list, rng: np.random.Generator, weight: str, refine: bool):
    index = {u: i for i, u in enumerate(nodes)}
    adj: list[dict[int, float]] = [dict() for _ in nodes]
    loops = np.zeros(len(nodes))
    for u, v, d in g.edges(data=True):
        w = float(d.get(weight, 1.0))
        i, j = index[u], index[v]
        if i == j:
            loops[i] += w
        else:
            adj[i][j] = adj[i].get(j, 0.0) + w
            adj[j][i] = adj[j].get(i, 0.0) + w
    base = _Level(len(nodes), adj, loops)
    labels = np.arange(len(nodes))
    history = [modularity(g, _densify(nodes, labels), weight)]
    while True:
        level, init = base, labels
        # re-run local moving on the original nodes from the current partition,
        # then the usual aggregate-and-move passes on top of it
        labels, refined = _one_level(level, rng, np.unique(init, return_inverse=True)[1])
        level, labels = _aggregate(base, labels)
        moved_any = refined
        while True:
            comm, moved = _one_level(level, rng)
            if not moved:
                break
            moved_any = True
            level, dense = _aggregate(level, comm)
            labels = dense[labels]
        if not moved_any:
            break
        q = modularity(g, _densify(nodes, labels), weight)
        if q <= history[-1] + 1e-12:
            break
        history.append(q)
    if refine:
        while True:
            labels = _regroup(base, _kl_refine(base, labels))
            q = modularity(g, _densify(nodes, labels), weight)
            if q <= history[-1] + 1e-12:
                break
            history.append(q)
    return _densify(nodes, labels), history


def louvain(g: nx.Graph, seed: int = 0, restarts: int = 8, weight: str = "weight",
            refine_max_nodes: int = 300) -> Partition:
    """Two-phase Louvain (local moving, then aggregation) on weighted modularity.

    Node visit order is a seeded permutation at every sweep. The search is
    repeated ``restarts`` times with independent orders and the best
    partition kept (first one on ties). On graphs of at most
    ``refine_max_nodes`` nodes each run ends with a vertex-mover sweep
    (quadratic cost) and an exact regrouping of every two or three
    communities whose union has at most 12 nodes; both escape optima that no
    single greedy move leaves.
    """
    total = sum(d.get(weight, 1.0) for _, _, d in g.edges(data=True))
    if g.number_of_edges() == 0 or total <= 0:
        raise EmptyGraph("louvain needs at least one weighted edge")
    nodes = sorted(g.nodes(), key=str)
    refine = g.number_of_nodes() <= refine_max_nodes
    best = None
    for r in range(max(1, restarts)):
        rng = np.random.default_rng([seed, r])
        membership, history = _louvain_once(g, nodes, rng, weight, refine)
        if best is None or history[-1] > best[1][-1] + 1e-12:
            best = (membership, history)
    membership, history = best
    return Partition(membership, modularity(g, membership, weight), tuple(history))
