"""Ten per-node centrality metrics on an unweighted view of a graph.

Conventions: betweenness and load are normalized by (n-1)(n-2)/2 unordered
pairs; closeness is Wasserman-Faust scaled per component; harmonic is the raw
sum of 1/d over reachable nodes; eigenvector and PageRank (damping 0.85) are
power iterations run to 1e-10.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import networkx as nx
import numpy as np

from ..errors import ConvergenceFailure, EmptyGraph

METRICS = ("degree", "betweenness", "closeness", "eigenvector", "pagerank", "harmonic",
           "clustering", "avg_neighbor_degree", "core_number", "load")
DAMPING = 0.85
MAX_ITER = 100_000
TOL = 1e-10


@dataclass(frozen=True)
class CentralityTable:
    nodes: tuple
    values: np.ndarray  # n x 10, columns in METRICS order

    def column(self, metric: str) -> dict:
        j = METRICS.index(metric)
        return {u: float(v) for u, v in zip(self.nodes, self.values[:, j])}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("node",) + METRICS)
        for u, row in zip(self.nodes, self.values):
            w.writerow([u] + [int(v) if m == "core_number" else repr(float(v)) for m, v in zip(METRICS, row)])
        return buf.getvalue()


def _pagerank(g: nx.Graph, nodes: list) -> np.ndarray:
    """Power iteration with uniform teleport; dangling mass is spread uniformly."""
    n = len(nodes)
    a = nx.to_numpy_array(g, nodelist=nodes, weight=None)
    deg = a.sum(axis=1)
    dangling = deg == 0
    p = np.divide(a, deg[:, None], out=np.zeros_like(a), where=deg[:, None] > 0)
    r = np.full(n, 1.0 / n)
    for _ in range(MAX_ITER):
        nxt = DAMPING * (r @ p + r[dangling].sum() / n) + (1 - DAMPING) / n
        nxt /= nxt.sum()
        if np.abs(nxt - r).sum() <= TOL:
            return nxt
        r = nxt
    raise ConvergenceFailure(f"PageRank did not converge in {MAX_ITER} iterations")


def pagerank_residual(g: nx.Graph, nodes: list, r: np.ndarray) -> float:
    """L1 norm of G^T r - r for the Google matrix G of ``g``."""
    n = len(nodes)
    a = nx.to_numpy_array(g, nodelist=nodes, weight=None)
    deg = a.sum(axis=1)
    p = np.where(deg[:, None] > 0, a / np.where(deg > 0, deg, 1.0)[:, None], 1.0 / n)
    google = DAMPING * p + (1 - DAMPING) / n
    return float(np.abs(r @ google - r).sum())


def centrality_profile(g: nx.Graph) -> CentralityTable:
    """All ten metrics per node; edge weights and self-loops are ignored."""
    if g.number_of_nodes() == 0:
        raise EmptyGraph("centrality of a graph without nodes")
    h = nx.Graph()
    h.add_nodes_from(g.nodes())
    h.add_edges_from((u, v) for u, v in g.edges() if u != v)
    nodes = sorted(h.nodes(), key=str)
    try:
        eig = nx.eigenvector_centrality(h, max_iter=MAX_ITER, tol=TOL)
    except nx.PowerIterationFailedConvergence as exc:
        raise ConvergenceFailure(str(exc)) from exc
    cols = {
        "degree": nx.degree_centrality(h) if len(nodes) > 1 else {nodes[0]: 0.0},
        "betweenness": nx.betweenness_centrality(h, normalized=True),
        "closeness": nx.closeness_centrality(h, wf_improved=True),
        "eigenvector": eig,
        "pagerank": dict(zip(nodes, _pagerank(h, nodes))),
        "harmonic": nx.harmonic_centrality(h),
        "clustering": nx.clustering(h),
        "avg_neighbor_degree": nx.average_neighbor_degree(h),
        "core_number": nx.core_number(h),
        "load": nx.load_centrality(h, normalized=True),
    }
    values = np.array([[float(cols[m][u]) for m in METRICS] for u in nodes])
    if not np.all(np.isfinite(values)):
        raise ConvergenceFailure("non-finite centrality value")
    return CentralityTable(tuple(nodes), values)
