"""Agglomerative clustering of term vectors with a deterministic tie-break.

Each active cluster lives in the slot of its smallest member index. At every
step the closest pair is merged; among exactly equal distances the pair with
the lexicographically smallest (slot, slot) wins. The merge tree uses the
scipy linkage layout (``Z`` rows: id_a, id_b, height, size) so dendrogram
tools can consume it directly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import KTooLarge

LINKAGES = ("ward", "average", "complete", "single")


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray  # n ints in [0, k); clusters numbered by smallest member
    linkage: np.ndarray  # (n-1) x 4
    centroids: np.ndarray  # k x d
    method: str

    @property
    def k(self) -> int:
        return len(self.centroids)

    def composition(self, types) -> list[dict]:
        """Per cluster: size, then count and proportion of each term type."""
        types = list(types)
        kinds = sorted(set(types))
        rows = []
        for c in range(self.k):
            members = [t for t, lab in zip(types, self.labels) if lab == c]
            row = {"cluster": c, "size": len(members)}
            for kind in kinds:
                cnt = sum(1 for t in members if t == kind)
                row[f"n_{kind}"] = cnt
                row[f"p_{kind}"] = cnt / len(members)
            rows.append(row)
        return rows

    def to_csv(self, ids) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("id", "cluster"))
        for i, lab in zip(ids, self.labels):
            w.writerow((i, int(lab)))
        return buf.getvalue()


def _update(method: str, d_ik, d_jk, d_ij, ni, nj, nk):
    """Lance-Williams distance from the merged cluster (i+j) to every k."""
    if method == "single":
        return np.minimum(d_ik, d_jk)
    if method == "complete":
        return np.maximum(d_ik, d_jk)
    if method == "average":
        return (ni * d_ik + nj * d_jk) / (ni + nj)
    t = ni + nj + nk
    sq = ((ni + nk) * d_ik ** 2 + (nj + nk) * d_jk ** 2 - nk * d_ij ** 2) / t
    return np.sqrt(np.maximum(sq, 0.0))


def linkage_matrix(vectors, method: str = "ward") -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("vectors must be a non-empty 2-D array")
    if method not in LINKAGES:
        raise ValueError(f"unknown linkage {method!r}; expected one of {LINKAGES}")
    n = len(x)
    d = cdist(x, x)
    np.fill_diagonal(d, np.inf)
    size = np.ones(n)
    ident = np.arange(n)  # scipy cluster id held by each slot
    active = np.ones(n, dtype=bool)
    z = np.zeros((max(n - 1, 0), 4))
    for step in range(n - 1):
        flat = int(np.argmin(d))
        i, j = divmod(flat, n)
        i, j = min(i, j), max(i, j)
        h = d[i, j]
        a, b = sorted((ident[i], ident[j]))
        z[step] = (a, b, h, size[i] + size[j])
        row = _update(method, d[i], d[j], h, size[i], size[j], size)
        active[j] = False
        row[~active] = np.inf
        row[i] = np.inf
        d[i, :] = row
        d[:, i] = row
        d[j, :] = np.inf
        d[:, j] = np.inf
        size[i] += size[j]
        ident[i] = n + step
    return z


def cut_tree(z: np.ndarray, n: int, k: int) -> np.ndarray:
    """Labels after replaying the first n - k merges; numbered by smallest member."""
    parent = list(range(2 * n - 1))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for step in range(n - k):
        a, b = int(z[step, 0]), int(z[step, 1])
        parent[find(a)] = n + step
        parent[find(b)] = n + step
    roots = [find(i) for i in range(n)]
    order: dict[int, int] = {}
    for r in roots:
        order.setdefault(r, len(order))
    return np.array([order[r] for r in roots], dtype=np.int64)


def hierarchical_cluster(vectors, k: int, linkage: str = "ward") -> ClusterResult:
    x = np.asarray(vectors, dtype=np.float64)
    n = len(x)
    if k < 1 or k > n:
        raise KTooLarge(f"k={k} must lie in [1, {n}]")
    z = linkage_matrix(x, linkage)
    labels = cut_tree(z, n, k)
    centroids = np.array([x[labels == c].mean(axis=0) for c in range(k)])
    return ClusterResult(labels, z, centroids, linkage)
