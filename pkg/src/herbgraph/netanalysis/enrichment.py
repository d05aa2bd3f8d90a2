"""Pathway over-representation and the class-compound-target-pathway network."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, Mapping

from ..errors import EmptyTargetSet
from ..kg import CompoundRecord, CompoundTargetPair, PathwayTable

UNCLASSIFIED = "Unclassified"


def hypergeom_sf(overlap: int, universe: int, pathway: int, draws: int) -> float:
    """P(X >= overlap) for X ~ Hypergeometric(universe, pathway, draws), summed in exact integers."""
    if overlap <= 0:
        return 1.0
    hi = min(pathway, draws)
    if overlap > hi:
        return 0.0
    num = sum(comb(pathway, i) * comb(universe - pathway, draws - i) for i in range(overlap, hi + 1))
    return float(Fraction(num, comb(universe, draws)))


def bh_adjust(p: list[float]) -> list[float]:
    """Benjamini-Hochberg q-values, returned in input order."""
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    q = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        i = order[rank - 1]
        running = min(running, p[i] if rank == m else p[i] * m / rank)
        q[i] = running
    return q


@dataclass(frozen=True)
class EnrichmentRow:
    pathway: str
    overlap: int
    pathway_size: int
    n_targets: int
    universe: int
    p_value: float
    fold_enrichment: float
    q_value: float


@dataclass(frozen=True)
class EnrichmentTable:
    rows: tuple[EnrichmentRow, ...]
    n_outside_universe: int = 0

    def significant(self, q: float = 0.05) -> list[str]:
        return [r.pathway for r in self.rows if r.q_value <= q]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("pathway", "overlap", "pathway_size", "n_targets", "universe", "p_value",
                    "fold_enrichment", "q_value"))
        for r in self.rows:
            w.writerow((r.pathway, r.overlap, r.pathway_size, r.n_targets, r.universe, repr(r.p_value),
                        repr(r.fold_enrichment), repr(r.q_value)))
        return buf.getvalue()


def enrich_pathways(targets: Iterable[int], pt: PathwayTable) -> EnrichmentTable:
    """One-sided hypergeometric test per pathway, sorted by p then pathway id.

    Targets outside the universe are dropped and counted.
    """
    given = set(targets)
    hits = given & set(pt.universe)
    if not hits:
        raise EmptyTargetSet("no targets inside the pathway universe")
    big_n, n = len(pt.universe), len(hits)
    names = sorted(pt.members)
    ps, rows = [], []
    for name in names:
        members = set(pt.members[name]) & set(pt.universe)
        k = len(members)
        x = len(hits & members)
        p = hypergeom_sf(x, big_n, k, n)
        fold = (x / n) / (k / big_n) if k else 0.0
        ps.append(p)
        rows.append((name, x, k, p, fold))
    qs = bh_adjust(ps)
    out = [EnrichmentRow(name, x, k, n, big_n, p, fold, q) for (name, x, k, p, fold), q in zip(rows, qs)]
    out.sort(key=lambda r: (r.p_value, r.pathway))
    return EnrichmentTable(tuple(out), len(given) - n)


@dataclass(frozen=True)
class CTPNetwork:
    nodes: tuple[tuple[str, str], ...]  # (node id, kind)
    edges: tuple[tuple[str, str, float], ...]  # (source, target, weight)

    def to_json(self) -> str:
        return json.dumps({"nodes": [{"id": i, "kind": k} for i, k in self.nodes],
                           "edges": [{"source": s, "target": t, "weight": w} for s, t, w in self.edges]},
                          indent=1, sort_keys=True)


def build_ctp_network(pairs: Iterable[CompoundTargetPair], compounds: Mapping[str, CompoundRecord],
                      pt: PathwayTable, affinity_threshold: float = 8.0,
                      pathways: Iterable[str] | None = None) -> CTPNetwork:
    """Tripartite class -> compound -> target -> pathway network.

    A pair contributes only when its affinity exceeds the threshold and its
    target lies in at least one of ``pathways`` (default: every pathway).
    Compound-target edges carry the affinity; the rest carry weight 1.
    """
    selected = sorted(pt.members) if pathways is None else sorted(set(pathways))
    by_target: dict[int, list[str]] = {}
    for name in selected:
        for t in pt.members[name]:
            by_target.setdefault(t, []).append(name)
    nodes: dict[str, str] = {}
    edges: dict[tuple[str, str], float] = {}
    for p in pairs:
        if p.affinity is None or not p.affinity > affinity_threshold or p.entrez_id not in by_target:
            continue
        rec = compounds.get(p.inchikey)
        cls = (rec.compound_class if rec is not None else None) or UNCLASSIFIED
        c, comp, tgt = f"class:{cls}", f"compound:{p.inchikey}", f"target:{p.entrez_id}"
        nodes.update({c: "class", comp: "compound", tgt: "target"})
        edges[(c, comp)] = 1.0
        edges[(comp, tgt)] = max(edges.get((comp, tgt), float("-inf")), float(p.affinity))
        for name in by_target[p.entrez_id]:
            pw = f"pathway:{name}"
            nodes[pw] = "pathway"
            edges[(tgt, pw)] = 1.0
    return CTPNetwork(tuple(sorted(nodes.items())), tuple((s, t, w) for (s, t), w in sorted(edges.items())))
