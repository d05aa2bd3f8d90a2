"""Herb-role interpretation of a trained model: CHP x CHP attention, feature
nullification, node masking, and corpus-level attention statistics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
import torch

from .errors import ArchUnsupported
from .formula_graph import DOSE_SLOT, NODE_KINDS, N_NODE_FEATURES, FormulaGraph
from .gnn.batch import collate
from .gnn.models import forward
from .gnn.training import evaluate, predict_proba


class FeatureGroup(Enum):
    """Column ranges of the 91-wide node attribute."""

    Sources = (0, 15)
    MedicinalProperties = (15, 30)
    Efficacy = (30, 60)
    Combination = (60, 90)
    DosageWeight = (DOSE_SLOT, N_NODE_FEATURES)

    @property
    def columns(self) -> slice:
        return slice(*self.value)


AGGREGATION = "mean over layers and heads of two-hop herb->virtual->herb attention plus the self term; rows renormalised"


@dataclass(frozen=True)
class AttentionMatrix:
    """``values[i, j]``: attention herb i draws from herb j. Rows sum to 1."""

    formula_id: str
    herb_ids: tuple[str, ...]
    values: np.ndarray
    meta: dict = field(default_factory=lambda: {"aggregation": AGGREGATION})

    def received(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def emitted(self) -> np.ndarray:
        """Mass each herb spends on other herbs (row sum minus diagonal)."""
        return 1.0 - np.diag(self.values)

    def to_dict(self) -> dict:
        return {"formula_id": self.formula_id, "herb_ids": list(self.herb_ids),
                "values": self.values.tolist(), "meta": self.meta}


def _dense(att, n: int) -> np.ndarray:
    """Per-head n x n matrices (H x n x n) from one graph's attention record."""
    w = att.weights.detach().double().numpy()
    out = np.zeros((w.shape[1], n, n))
    out[:, att.dst.numpy(), att.src.numpy()] = w.T
    return out


def attention_matrix(model, g: FormulaGraph) -> AttentionMatrix:
    if model.cfg.arch != "GAT":
        raise ArchUnsupported(f"herb x herb attention is defined for GAT, not {model.cfg.arch}")
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        _, attn = forward(model, collate([g], dtype), "eval")
    chp = g.chp_index
    virt = g.virtual_index
    acc = np.zeros((len(chp), len(chp)))
    count = 0
    for layer in attn:
        for a in _dense(layer, g.n_nodes):
            two_hop = a[np.ix_(chp, virt)] @ a[np.ix_(virt, chp)]
            acc += two_hop + np.diag(a[chp, chp])
            count += 1
    m = acc / count
    m = m / m.sum(axis=1, keepdims=True)
    return AttentionMatrix(g.formula_id, tuple(g.keys[i] for i in chp), m)


@dataclass
class DeltaReport:
    """AUC change per label after an input perturbation (positive = worse)."""

    name: str
    baseline_auc: np.ndarray
    ablated_auc: np.ndarray
    baseline_probs: np.ndarray
    ablated_probs: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return self.baseline_auc - self.ablated_auc

    @property
    def mean_delta(self) -> float:
        return float(np.mean(self.delta))

    def shift_correlation(self) -> np.ndarray:
        """Pearson correlation of baseline vs perturbed probabilities per label (NaN if constant)."""
        out = np.full(self.baseline_probs.shape[1], np.nan)
        for j in range(len(out)):
            a, b = self.baseline_probs[:, j], self.ablated_probs[:, j]
            if a.std() > 0 and b.std() > 0:
                out[j] = float(np.corrcoef(a, b)[0, 1])
        return out

    def rows(self) -> list[dict]:
        corr = self.shift_correlation()
        return [{"perturbation": self.name, "label": j, "baseline_auc": float(self.baseline_auc[j]),
                 "ablated_auc": float(self.ablated_auc[j]), "delta_auc": float(self.delta[j]),
                 "shift_corr": float(corr[j])} for j in range(len(self.delta))]


def delta_csv(reports: Iterable[DeltaReport]) -> str:
    buf = io.StringIO()
    cols = ["perturbation", "label", "baseline_auc", "ablated_auc", "delta_auc", "shift_corr"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in reports:
        for row in r.rows():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _aucs(model, split: Sequence[FormulaGraph]) -> np.ndarray:
    rep = evaluate(model, split, name="split")
    return np.array([m.auc for m in rep.splits["split"]])


def _perturbed(model, split, name: str, transform) -> DeltaReport:
    split = list(split)
    changed = [g.with_x(transform(g)) for g in split]
    return DeltaReport(name, _aucs(model, split), _aucs(model, changed),
                       predict_proba(model, split), predict_proba(model, changed))


def ablate_feature(model, split: Sequence[FormulaGraph], grp) -> DeltaReport:
    """Zero the group's columns in every node of every graph, then re-evaluate.

    ``grp`` may be one :class:`FeatureGroup` or several.
    """
    groups = [grp] if isinstance(grp, FeatureGroup) else list(grp)

    def zero(g):
        x = g.x.copy()
        for gr in groups:
            x[:, gr.columns] = 0.0
        return x

    return _perturbed(model, split, "+".join(gr.name for gr in groups), zero)


def mask_node_kind(model, split: Sequence[FormulaGraph], kind: str) -> DeltaReport:
    """Zero every attribute of nodes of ``kind``; topology is untouched."""
    if kind not in NODE_KINDS:
        raise ValueError(f"unknown node kind {kind!r}")

    def zero(g):
        x = g.x.copy()
        x[np.array([k == kind for k in g.kinds], dtype=bool)] = 0.0
        return x

    return _perturbed(model, split, kind, zero)


@dataclass(frozen=True)
class HerbStat:
    chp_id: str
    freq: int
    mean_attention: float
    mean_emitted: float


@dataclass(frozen=True)
class PairStat:
    chp_a: str
    chp_b: str
    count: int
    mean_attention: float


def corpus_attention_stats(model, graphs: Sequence[FormulaGraph]):
    """Herb and herb-pair frequencies with their mean attention.

    Returns ``(herb_stats, pair_stats, matrices)``. Herbs are sorted by
    descending frequency then id; pairs likewise, with ``chp_a < chp_b``.
    A pair's attention is the symmetrised entry (M[a, b] + M[b, a]) / 2.
    """
    mats = [attention_matrix(model, g) for g in graphs]
    herb_rec: dict[str, list[tuple[float, float]]] = {}
    pair_rec: dict[tuple[str, str], list[float]] = {}
    for am in mats:
        rec, emi = am.received(), am.emitted()
        for i, h in enumerate(am.herb_ids):
            herb_rec.setdefault(h, []).append((rec[i], emi[i]))
        for i, j in combinations(range(len(am.herb_ids)), 2):
            a, b = am.herb_ids[i], am.herb_ids[j]
            sym = 0.5 * (am.values[i, j] + am.values[j, i])
            pair_rec.setdefault((a, b) if a < b else (b, a), []).append(sym)
    herbs = [HerbStat(h, len(v), float(np.mean([r for r, _ in v])), float(np.mean([e for _, e in v])))
             for h, v in herb_rec.items()]
    herbs.sort(key=lambda s: (-s.freq, s.chp_id))
    pairs = [PairStat(a, b, len(v), float(np.mean(v))) for (a, b), v in pair_rec.items()]
    pairs.sort(key=lambda s: (-s.count, s.chp_a, s.chp_b))
    return herbs, pairs, mats
