"""Taxonomy path distances and the PCA used to turn them into origin features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DisjointForest, UnresolvedLeaf
from ..kg import TaxonomyTable


@dataclass(frozen=True)
class DistanceMatrix:
    leaves: tuple[int, ...]
    values: np.ndarray


def phylo_distances(tax: TaxonomyTable, leaves) -> DistanceMatrix:
    """Edge count between every pair of leaves through their lowest common ancestor.

    All branch lengths are 1. Leaves rooted in different trees raise
    DisjointForest listing every such pair.
    """
    leaves = tuple(leaves)
    paths = []
    for leaf in leaves:
        path = tax.path_to_root(leaf)
        if path is None:
            raise UnresolvedLeaf(leaf)
        paths.append(path)
    depth_maps = [{node: k for k, node in enumerate(p)} for p in paths]
    n = len(leaves)
    d = np.zeros((n, n))
    disjoint = []
    for i in range(n):
        for j in range(i + 1, n):
            up_j = depth_maps[j]
            for k, node in enumerate(paths[i]):
                if node in up_j:
                    d[i, j] = d[j, i] = k + up_j[node]
                    break
            else:
                disjoint.append((leaves[i], leaves[j]))
    if disjoint:
        raise DisjointForest(disjoint)
    return DistanceMatrix(leaves, d)


@dataclass(frozen=True)
class PCA:
    mean: np.ndarray
    components: np.ndarray  # cols x k, one principal axis per column
    eigenvalues: np.ndarray  # all of them, descending
    explained: np.ndarray  # first k shares

    def transform(self, m: np.ndarray) -> np.ndarray:
        return (np.asarray(m, dtype=np.float64) - self.mean) @ self.components


def pca_fit(m, k: int) -> PCA:
    """Column-centred PCA from the eigendecomposition of the covariance matrix.

    Each axis is flipped so its largest-magnitude loading is positive. Rank
    deficiency is not an error: trailing components carry zero variance.
    """
    x = np.asarray(m, dtype=np.float64)
    n, cols = x.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 rows")
    if not 1 <= k <= min(n, cols):
        raise ValueError(f"k={k} must lie in [1, {min(n, cols)}]")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    for j in range(evecs.shape[1]):
        col = evecs[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            evecs[:, j] = -col
    total = evals.sum()
    explained = evals[:k] / total if total > 0 else np.zeros(k)
    return PCA(mean, evecs[:, :k], evals, explained)


def pca_fit_transform(m, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Scores (n x k) and explained-variance shares (k)."""
    model = pca_fit(m, k)
    return model.transform(m), model.explained


def pcoa(dist, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Classical multidimensional scaling of a distance matrix (double-centred)."""
    d = np.asarray(dist, dtype=np.float64)
    n = d.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    j = np.eye(n) - 1.0 / n
    b = -0.5 * j @ (d ** 2) @ j
    evals, evecs = np.linalg.eigh((b + b.T) / 2)
    order = np.argsort(evals)[::-1]
    evals, evecs = np.clip(evals[order], 0.0, None), evecs[:, order]
    for c in range(n):
        col = evecs[:, c]
        if col[np.argmax(np.abs(col))] < 0:
            evecs[:, c] = -col
    total = evals.sum()
    explained = evals[:k] / total if total > 0 else np.zeros(k)
    return evecs[:, :k] * np.sqrt(evals[:k]), explained
