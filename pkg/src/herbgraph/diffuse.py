"""Neighbor-diffusion expansion of compound-target associations, and the
coverage / drug-likeness analytics built on top of it."""

from __future__ import annotations

import logging
import math
import operator
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import MissingAffinity, TooFewCompounds
from .kg import CompoundRecord, CompoundTargetPair, Provenance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiffusionConfig:
    k: int = 10
    metric: str = "cosine"
    affinity_threshold: float = 5.0
    reduce_dims: int | None = None
    depth: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.metric not in ("euclidean", "cosine"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")


@dataclass(frozen=True)
class NeighborIndex:
    ids: tuple[str, ...]
    neighbors: dict[str, tuple[tuple[str, float], ...]]
    metric: str
    reduced: bool = False

    def neighbor_ids(self, key: str) -> list[str]:
        return [n for n, _ in self.neighbors.get(key, ())]


def _exact_distances(x: np.ndarray, i: int, cand: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        diff = x[cand] - x[i]
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return 1.0 - x[cand] @ x[i]


def knn_neighbors(ids: Sequence[str], features, cfg: DiffusionConfig, chunk: int = 512) -> NeighborIndex:
    """Exact k nearest neighbors of every row, self excluded.

    Lists are sorted by distance with ties broken by identifier order. A
    vectorised pass proposes candidates; their distances are then recomputed
    row by row so the final ordering matches a direct pairwise scan.
    """
    ids = tuple(ids)
    x = np.asarray(features, dtype=np.float64)
    n = len(ids)
    if n < 2:
        raise TooFewCompounds(f"need at least 2 compounds, got {n}")
    if x.shape[0] != n or not np.all(np.isfinite(x)):
        raise ValueError("feature rows must be finite and match the id list")
    reduced = False
    if cfg.reduce_dims is not None and cfg.reduce_dims < x.shape[1]:
        from .embed.phylo import pca_fit_transform

        x, _ = pca_fit_transform(x, min(cfg.reduce_dims, n))
        reduced = True
    if cfg.metric == "cosine":
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        x = x / norms
    key_rank = np.empty(n, dtype=np.int64)
    key_rank[np.argsort(np.array(ids, dtype=object), kind="stable")] = np.arange(n)
    k = min(cfg.k, n - 1)
    sq = np.einsum("ij,ij->i", x, x)
    scale = 1.0 + math.sqrt(float(sq.max()))
    out: dict[str, tuple[tuple[str, float], ...]] = {}
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        if cfg.metric == "euclidean":
            approx = np.sqrt(np.clip(sq[rows, None] + sq[None, :] - 2.0 * x[rows] @ x.T, 0.0, None))
        else:
            approx = 1.0 - x[rows] @ x.T
        approx[np.arange(len(rows)), rows] = np.inf
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
        for r, i in enumerate(rows):
            slack = 1e-6 * (abs(kth[r]) + scale)
            cand = np.flatnonzero(approx[r] <= kth[r] + slack)
            cand = cand[cand != i]
            dist = _exact_distances(x, i, cand, cfg.metric)
            order = np.lexsort((key_rank[cand], dist))[:k]
            out[ids[i]] = tuple((ids[j], float(dist[o])) for o, j in zip(order, cand[order]))
    return NeighborIndex(ids, out, cfg.metric, reduced)


def _reachable(idx: NeighborIndex, key: str, depth: int) -> set[str]:
    seen, frontier = {key}, [key]
    for _ in range(depth):
        nxt = []
        for c in frontier:
            for nb in idx.neighbor_ids(c):
                if nb not in seen:
                    seen.add(nb)
                    nxt.append(nb)
        frontier = nxt
    seen.discard(key)
    return seen


def diffuse_pairs(pairs: Iterable[CompoundTargetPair], idx: NeighborIndex, depth: int = 1) -> list[CompoundTargetPair]:
    """Candidate pairs inherited from feature-space neighbors.

    Compound c receives every target known for any compound within ``depth``
    neighbor hops; pairs already known for c are not re-emitted. Output is
    sorted by (compound, target) and carries no affinity.
    """
    known: dict[str, set[int]] = {}
    for p in pairs:
        known.setdefault(p.inchikey, set()).add(p.entrez_id)
    cands: set[tuple[str, int]] = set()
    for c in idx.ids:
        have = known.get(c, set())
        for nb in _reachable(idx, c, depth):
            for t in known.get(nb, ()):
                if t not in have:
                    cands.add((c, t))
    return [CompoundTargetPair(c, t, None, Provenance.DIFFUSED) for c, t in sorted(cands)]


def _require_affinity(pairs) -> None:
    for p in pairs:
        if p.affinity is None:
            raise MissingAffinity(f"pair {p.inchikey}/{p.entrez_id} has no affinity")


def filter_by_affinity(pairs: Sequence[CompoundTargetPair], threshold: float) -> list[CompoundTargetPair]:
    """Keep pairs whose affinity is strictly above ``threshold``."""
    _require_affinity(pairs)
    kept = [p for p in pairs if p.affinity > threshold]
    log.info("affinity > %s: kept %d of %d pairs", threshold, len(kept), len(pairs))
    return kept


@dataclass(frozen=True)
class CoverageRow:
    threshold: float
    n_compounds: int
    compound_cov: float
    n_targets: int
    target_cov: float
    n_pairs: int
    mean_targets_per_compound: float

    CSV_COLUMNS = ("threshold", "n_compounds", "compound_cov", "n_targets", "target_cov", "n_pairs")

    def csv_row(self) -> tuple:
        return tuple(getattr(self, c) for c in self.CSV_COLUMNS)


def coverage_report(pairs: Sequence[CompoundTargetPair], compound_universe: Iterable[str],
                    target_universe: Iterable[int], thresholds: Sequence[float]) -> list[CoverageRow]:
    """Distinct compounds, targets and pairs surviving each affinity threshold."""
    cu, tu = set(compound_universe), set(target_universe)
    if not cu or not tu:
        raise ValueError("universes must be non-empty")
    _require_affinity(pairs)
    rows = []
    for t in thresholds:
        surv = {(p.inchikey, p.entrez_id) for p in pairs
                if p.affinity > t and p.inchikey in cu and p.entrez_id in tu}
        comps = {c for c, _ in surv}
        targs = {e for _, e in surv}
        rows.append(CoverageRow(
            threshold=float(t), n_compounds=len(comps), compound_cov=len(comps) / len(cu),
            n_targets=len(targs), target_cov=len(targs) / len(tu), n_pairs=len(surv),
            mean_targets_per_compound=len(surv) / len(comps) if comps else 0.0,
        ))
    return rows


_OPS = {"<=": operator.le, "<": operator.lt, ">=": operator.ge, ">": operator.gt}


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[tuple[str, str, float], ...] = field(default_factory=tuple)


# RDKit descriptor names.
LIPINSKI = RuleSet((
    ("MolWt", "<=", 500.0),
    ("LogP", "<=", 5.0),
    ("NumHDonors", "<=", 5.0),
    ("NumHAcceptors", "<=", 10.0),
))


def filter_druglike(compounds: Iterable[CompoundRecord], rules: RuleSet = LIPINSKI,
                    return_missing: bool = False):
    """Inchikeys of compounds satisfying every rule.

    A compound lacking a descriptor a rule needs is excluded and reported as
    ``(inchikey, field)``; pass ``return_missing=True`` to get that list too.
    """
    passed, missing = [], []
    for c in compounds:
        ok = True
        for name, op, value in rules.rules:
            x = c.descriptor(name)
            if x is None or (isinstance(x, float) and math.isnan(x)):
                missing.append((c.inchikey, name))
                ok = False
                break
            if not _OPS[op](x, value):
                ok = False
                break
        if ok:
            passed.append(c.inchikey)
    if missing:
        log.warning("%d compound(s) excluded for missing descriptors", len(missing))
    return (passed, missing) if return_missing else passed
