"""Formula -> heterogeneous graph with real herb nodes and virtual property nodes.

Node attributes are 91 wide: the herb's 90 features followed by its dose
weight (dose / formula total, or 0 when any dose in the formula is unknown).
A virtual node stands for one property value (e.g. the flavor "bitter")
present in the formula and links to every herb carrying it. Two virtual nodes
are linked when they share at least one herb. There are no herb-herb edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .embed.features import N_FEATURES, FeatureMatrix
from .errors import UnknownHerbFeatures
from .kg import Formula, KnowledgeGraph

NODE_KINDS = ("CHP", "TherapeuticNature", "MedicinalFlavor", "MeridianTropism")
VIRTUAL_KINDS = NODE_KINDS[1:]
_KIND_OF_PROPERTY = {"nature": "TherapeuticNature", "flavor": "MedicinalFlavor", "meridian": "MeridianTropism"}
N_NODE_FEATURES = N_FEATURES + 1
DOSE_SLOT = N_FEATURES
N_EDGE_FEATURES = 2


@dataclass(frozen=True)
class FormulaGraph:
    formula_id: str
    kinds: tuple[str, ...]
    keys: tuple[str, ...]
    x: np.ndarray  # n_nodes x 91
    edges: np.ndarray  # n_edges x 2, undirected, i < j
    edge_attr: np.ndarray  # n_edges x 2: (dose-derived weight, 1 herb-virtual / 0 virtual-virtual)
    labels: tuple[int, ...] | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.kinds)

    @property
    def chp_index(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.kinds) if k == "CHP"], dtype=np.int64)

    @property
    def virtual_index(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.kinds) if k != "CHP"], dtype=np.int64)

    def with_x(self, x: np.ndarray) -> "FormulaGraph":
        return replace(self, x=x)

    def incidence(self) -> np.ndarray:
        """Herb x virtual-node membership matrix (each column is one hyperedge)."""
        chp, virt = self.chp_index, self.virtual_index
        pos_c = {int(n): i for i, n in enumerate(chp)}
        pos_v = {int(n): j for j, n in enumerate(virt)}
        h = np.zeros((len(chp), len(virt)))
        for (a, b), attr in zip(self.edges, self.edge_attr):
            if attr[1] == 1.0:
                c, v = (a, b) if a in pos_c else (b, a)
                h[pos_c[int(c)], pos_v[int(v)]] = 1.0
        return h

    def permuted(self, perm) -> "FormulaGraph":
        """Same graph with node i moved to position perm[i]."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.argsort(perm)
        e = perm[self.edges] if len(self.edges) else self.edges
        if len(e):
            e = np.sort(e, axis=1)
        return FormulaGraph(self.formula_id, tuple(self.kinds[i] for i in inv), tuple(self.keys[i] for i in inv),
                            self.x[inv], e, self.edge_attr.copy(), self.labels)

    def to_dict(self) -> dict:
        return {
            "formula_id": self.formula_id,
            "labels": list(self.labels) if self.labels is not None else None,
            "nodes": [{"kind": k, "key": key, "attr": [float(v) for v in row]}
                      for k, key, row in zip(self.kinds, self.keys, self.x)],
            "edges": [[int(a), int(b), [float(v) for v in attr]] for (a, b), attr in zip(self.edges, self.edge_attr)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FormulaGraph":
        nodes = d["nodes"]
        edges = d["edges"]
        return cls(
            formula_id=d["formula_id"],
            kinds=tuple(n["kind"] for n in nodes),
            keys=tuple(n["key"] for n in nodes),
            x=np.array([n["attr"] for n in nodes], dtype=np.float64).reshape(len(nodes), N_NODE_FEATURES),
            edges=np.array([[a, b] for a, b, _ in edges], dtype=np.int64).reshape(-1, 2),
            edge_attr=np.array([attr for _, _, attr in edges], dtype=np.float64).reshape(-1, N_EDGE_FEATURES),
            labels=tuple(d["labels"]) if d.get("labels") is not None else None,
        )


def dose_weights(f: Formula) -> np.ndarray:
    ratios = f.dose_ratios()
    return np.zeros(len(f.members)) if ratios is None else np.array(ratios)


def _weighted_mean(rows: np.ndarray, w: np.ndarray) -> np.ndarray:
    if w.sum() > 0:
        return (w[:, None] * rows).sum(axis=0) / w.sum()
    return rows.mean(axis=0)


def encode_formula(f: Formula, feats: FeatureMatrix, kg: KnowledgeGraph) -> FormulaGraph:
    """Build the virtual-node graph of one formula."""
    herb_ids = f.herb_ids
    for h in herb_ids:
        if h not in feats:
            raise UnknownHerbFeatures(h)
    w = dose_weights(f)
    chp_x = np.column_stack([np.array([feats[h] for h in herb_ids]).reshape(len(herb_ids), N_FEATURES), w])

    kinds = ["CHP"] * len(herb_ids)
    keys = list(herb_ids)
    members: list[np.ndarray] = []
    for prop, kind in _KIND_OF_PROPERTY.items():
        present: set[str] = set()
        for h in herb_ids:
            present |= kg.herbs[h].properties(prop)
        vocab = kg.vocab.tokens(prop)
        ordered = [t for t in vocab if t in present] + sorted(present.difference(vocab))
        for tok in ordered:
            kinds.append(kind)
            keys.append(tok)
            members.append(np.array([i for i, h in enumerate(herb_ids) if tok in kg.herbs[h].properties(prop)]))

    n_chp = len(herb_ids)
    virt_x = [_weighted_mean(chp_x[m], w[m]) for m in members]
    x = np.vstack([chp_x, *virt_x]) if virt_x else chp_x

    edges, attrs = [], []
    incident: list[list[np.ndarray]] = []
    for j, m in enumerate(members):
        v = n_chp + j
        rows = []
        for i in m:
            edges.append((int(i), v))
            attrs.append((w[i], 1.0))
            rows.append(np.array([w[i], 1.0]))
        incident.append(rows)
    member_sets = [set(m.tolist()) for m in members]
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            if member_sets[a] & member_sets[b]:
                pooled = np.array(incident[a] + incident[b])
                edges.append((n_chp + a, n_chp + b))
                attrs.append((pooled[:, 0].mean(), 0.0))
    return FormulaGraph(
        formula_id=f.id, kinds=tuple(kinds), keys=tuple(keys), x=x,
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        edge_attr=np.array(attrs, dtype=np.float64).reshape(-1, N_EDGE_FEATURES),
        labels=f.labels,
    )


def encode_all(formulas: Iterable[Formula], feats: FeatureMatrix, kg: KnowledgeGraph) -> list[FormulaGraph]:
    return [encode_formula(f, feats, kg) for f in formulas]


def write_graphs(path: str | Path, graphs: Iterable[FormulaGraph]) -> None:
    from .embed.io import atomic_write_bytes

    text = "".join(json.dumps(g.to_dict(), separators=(",", ":")) + "\n" for g in graphs)
    atomic_write_bytes(path, text.encode())


def read_graphs(path: str | Path) -> list[FormulaGraph]:
    with open(path, encoding="utf-8") as fh:
        return [FormulaGraph.from_dict(json.loads(line)) for line in fh if line.strip()]
