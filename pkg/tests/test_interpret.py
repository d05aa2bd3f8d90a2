from __future__ import annotations

import itertools
from collections import Counter

import numpy as np
import pytest
import torch

from herbgraph.errors import ArchUnsupported
from herbgraph.formula_graph import FormulaGraph
from herbgraph.gnn import ModelConfig, build_model, evaluate
from herbgraph.interpret import (
    FeatureGroup,
    ablate_feature,
    attention_matrix,
    corpus_attention_stats,
    delta_csv,
    mask_node_kind,
)

from .graphs import random_graph


def _gat(seed=0):
    return build_model(ModelConfig("GAT", 8, 2, 0.0), seed=seed, dtype=torch.float64)


def _median(runs, key, sub):
    return float(np.median([r[key][sub] for r in runs]))


def test_feature_groups_tile_the_attribute():
    cols = sorted(c for g in FeatureGroup for c in range(*g.value))
    assert cols == list(range(91))


def test_single_herb_matrix():
    x = np.random.default_rng(0).normal(size=(2, 91))
    g = FormulaGraph("F", ("CHP", "MedicinalFlavor"), ("CHP00001", "bitter"), x, np.array([[0, 1]]),
                     np.array([[1.0, 1.0]]))
    assert attention_matrix(_gat(), g).values.tolist() == [[1.0]]


def test_symmetric_herbs_give_symmetric_matrix():
    x = np.random.default_rng(1).normal(size=(3, 91))
    x[1] = x[0]
    x[:2, 90] = 0.5
    g = FormulaGraph("F", ("CHP", "CHP", "MedicinalFlavor"), ("a", "b", "bitter"), x,
                     np.array([[0, 2], [1, 2]]), np.array([[0.5, 1.0], [0.5, 1.0]]))
    m = attention_matrix(_gat(3), g).values
    assert np.allclose(m, m.T, atol=1e-14)


def test_rows_are_stochastic():
    rng = np.random.default_rng(2)
    model = _gat(1)
    for _ in range(30):
        g = random_graph(rng)
        m = attention_matrix(model, g).values
        assert np.all(m >= 0) and np.abs(m.sum(axis=1) - 1).max() <= 1e-6


def test_other_architectures_rejected():
    g = random_graph(np.random.default_rng(0))
    with pytest.raises(ArchUnsupported):
        attention_matrix(build_model(ModelConfig("GTN", 8, 2), dtype=torch.float64), g)


def _labeled(n=30, seed=4):
    rng = np.random.default_rng(seed)
    graphs = [random_graph(rng) for _ in range(n)]
    return [g if any(g.labels) else FormulaGraph(g.formula_id, g.kinds, g.keys, g.x, g.edges, g.edge_attr,
                                                 (1, 0, 0, 0, 0)) for g in graphs]


def test_zeroing_an_empty_segment_changes_nothing():
    graphs = _labeled()
    graphs = [g.with_x(np.concatenate([g.x[:, :60], np.zeros((g.n_nodes, 30)), g.x[:, 90:]], axis=1))
              for g in graphs]
    rep = ablate_feature(_gat(), graphs, FeatureGroup.Combination)
    assert np.all(rep.delta == 0)


def test_absent_kind_masks_nothing():
    graphs = [g for g in _labeled(40) if "MeridianTropism" not in g.kinds]
    assert graphs
    rep = mask_node_kind(_gat(), graphs, "MeridianTropism")
    assert np.all(rep.delta == 0)


def test_baseline_matches_evaluate_and_is_deterministic():
    graphs = _labeled()
    model = _gat(2)
    rep = mask_node_kind(model, graphs, "CHP")
    ev = evaluate(model, graphs, name="x")
    assert rep.baseline_auc.tolist() == [m.auc for m in ev.splits["x"]]
    again = mask_node_kind(model, graphs, "CHP")
    assert np.array_equal(rep.ablated_auc, again.ablated_auc)
    assert delta_csv([rep]) == delta_csv([again])


def test_nullification_commutes():
    graphs = _labeled()
    model = _gat(5)
    ab = ablate_feature(model, graphs, [FeatureGroup.Efficacy, FeatureGroup.Sources])
    ba = ablate_feature(model, graphs, [FeatureGroup.Sources, FeatureGroup.Efficacy])
    assert np.array_equal(ab.ablated_auc, ba.ablated_auc)
    assert np.array_equal(ab.ablated_probs, ba.ablated_probs)


def _formula_graph(fid, herbs, rng):
    """Herbs share one flavor node so every pair is linked through it."""
    n = len(herbs)
    x = rng.normal(size=(n + 1, 91))
    x[:n, 90] = 1 / n
    edges = np.array([[i, n] for i in range(n)])
    return FormulaGraph(fid, ("CHP",) * n + ("MedicinalFlavor",), tuple(herbs) + ("bitter",), x, edges,
                        np.array([[1 / n, 1.0]] * n))


def test_two_herb_corpus():
    herbs, pairs, _ = corpus_attention_stats(_gat(), [_formula_graph("F", ["a", "b"], np.random.default_rng(0))])
    assert [(h.chp_id, h.freq) for h in herbs] == [("a", 1), ("b", 1)]
    assert [(p.chp_a, p.chp_b, p.count) for p in pairs] == [("a", "b", 1)]


def test_corpus_counts_and_pair_attention_recount():
    rng = np.random.default_rng(3)
    members = [["a", "b", "c"], ["a", "c"], ["b", "d"], ["a", "d", "c"], ["e", "b"]]
    graphs = [_formula_graph(f"F{i}", m, rng) for i, m in enumerate(members)]
    herbs, pairs, mats = corpus_attention_stats(_gat(7), graphs)
    freq = Counter(h for m in members for h in m)
    assert {h.chp_id: h.freq for h in herbs} == dict(freq)
    assert {h.chp_id: h.freq for h in herbs}["a"] == 3
    recount: dict = {}
    for am in mats:
        for i, j in itertools.combinations(range(len(am.herb_ids)), 2):
            key = tuple(sorted((am.herb_ids[i], am.herb_ids[j])))
            recount.setdefault(key, []).append((am.values[i, j] + am.values[j, i]) / 2)
    assert {(p.chp_a, p.chp_b): (p.count, p.mean_attention) for p in pairs} == \
        {k: (len(v), float(np.mean(v))) for k, v in recount.items()}
    assert [h.freq for h in herbs] == sorted((h.freq for h in herbs), reverse=True)


# planted corpus (ten trained seeds, shared with the acceptance suite)

def test_planted_rule_segment_drop_exceeds_point_two(planted_runs):
    assert _median(planted_runs, "groups", "Combination") > 0.2


def test_planted_irrelevant_segment_drop_is_small(planted_runs):
    assert _median(planted_runs, "groups", "DosageWeight") < 0.05


def test_planted_all_groups_nulled_is_chance(planted_runs):
    assert 0.4 <= float(np.median([r["all_groups_auc"] for r in planted_runs])) <= 0.6


def test_planted_chp_masking_dominates(planted_runs):
    chp = _median(planted_runs, "kinds", "CHP")
    assert all(chp > _median(planted_runs, "kinds", k) for k in ("TherapeuticNature", "MedicinalFlavor",
                                                                 "MeridianTropism"))
