from __future__ import annotations

import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from herbgraph.embed import (
    FeatureMatrix,
    Node2VecConfig,
    SkipGramConfig,
    assemble_chp_features,
    build_corpora,
    embed_herbs,
    node2vec_embed,
    pca_fit,
    pca_fit_transform,
    phylo_distances,
    segment,
    train_skipgram,
)
from herbgraph.embed.node2vec import generate_walks
from herbgraph.errors import DisjointForest, EmptyCorpus, LayoutMismatch, UnresolvedLeaf, VocabularyTooSmall
from herbgraph.kg import Formula, HerbPiece, KnowledgeGraph, TaxonomyTable, load_knowledge_graph


def _cos(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def _clique_corpus(rng, n_sentences=200):
    groups = (["a0", "a1", "a2", "a3"], ["b0", "b1", "b2", "b3"])
    return [list(rng.permutation(groups[i % 2])) for i in range(n_sentences)], groups


# corpora

def test_property_and_combination_sentences():
    h = HerbPiece("CHP00001", "x", "Plantae", natures=frozenset({"warm"}), flavors=frozenset({"bitter"}))
    f = Formula("F1", (("CHP00001", 1.0), ("CHP00002", 1.0), ("CHP00003", 1.0)))
    kg = KnowledgeGraph(herbs={h.id: h}, formulas={"F1": f})
    with pytest.raises(EmptyCorpus):
        build_corpora(kg)  # no efficacy phrases anywhere
    h2 = HerbPiece("CHP00001", "x", "Plantae", natures=frozenset({"warm"}), flavors=frozenset({"bitter"}),
                   efficacy=("tonify",))
    c = build_corpora(KnowledgeGraph(herbs={h2.id: h2}, formulas={"F1": f}))
    assert c.property["CHP00001"] == ["warm", "bitter"]
    assert c.combination["F1"] == ["CHP00001", "CHP00002", "CHP00003"]


def test_fixture_combination_corpus_size(tiny_dir):
    kg = load_knowledge_graph(tiny_dir)
    sentences = build_corpora(kg).sentences("combination")
    assert len(sentences) == 2
    assert sum(map(len, sentences)) == sum(len(f.members) for f in kg.formulas.values())


# skip-gram

def test_two_token_corpus_shape_and_determinism():
    cfg = SkipGramConfig(window=1, dim=4, seed=7, epochs=3)
    corpus = [["x", "y"]] * 20
    a, b = train_skipgram(corpus, cfg), train_skipgram(corpus, cfg)
    assert a.vectors.shape == (2, 4) and np.all(np.isfinite(a.vectors))
    assert a == b and a.loss_history == b.loss_history


def test_vocabulary_too_small():
    with pytest.raises(VocabularyTooSmall):
        train_skipgram([["x", "x", "x"]], SkipGramConfig())


def test_clique_tokens_cluster_over_ten_seeds():
    within, cross = [], []
    for seed in range(10):
        corpus, groups = _clique_corpus(np.random.default_rng(seed))
        t = train_skipgram(corpus, SkipGramConfig(window=3, dim=8, epochs=10, seed=seed))
        for g in groups:
            within += [_cos(t[u], t[v]) for u, v in itertools.combinations(g, 2)]
        cross += [_cos(t[u], t[v]) for u in groups[0] for v in groups[1]]
    assert np.mean(within) > np.mean(cross)


def test_epoch_loss_non_increasing_on_clique_corpus():
    # a small step keeps SGD jitter below the per-epoch decrease on this 8-token vocabulary
    for seed in range(10):
        corpus, _ = _clique_corpus(np.random.default_rng(seed))
        cfg = SkipGramConfig(window=3, dim=8, epochs=15, seed=seed, learning_rate=0.005)
        hist = train_skipgram(corpus, cfg).loss_history
        assert len(hist) == 15
        assert all(b <= a for a, b in zip(hist, hist[1:])), hist
        assert hist[-1] < hist[0]


def test_final_epoch_loss_below_first_at_defaults(planted30):
    from herbgraph.embed.features import DEFAULT_SKIPGRAM

    sentences = build_corpora(planted30).sentences("combination")
    hist = train_skipgram(sentences, DEFAULT_SKIPGRAM["combination"]).loss_history
    assert hist[-1] < hist[0]


def test_embedding_round_trip(tmp_path):
    t = train_skipgram([["x", "y", "z"]] * 5, SkipGramConfig(dim=3, epochs=2))
    t.save(tmp_path / "e.bin", dtype="f64")
    assert type(t).load(tmp_path / "e.bin") == t


# taxonomy distances and PCA

def test_phylo_distance_examples():
    tax = TaxonomyTable({1: None, 2: 1, 3: 1, 4: 1, 5: 4})
    d = phylo_distances(tax, [2, 3, 5])
    assert d.values[0, 1] == 2 and d.values[0, 0] == 0 and d.values[0, 2] == 3
    assert np.array_equal(d.values, d.values.T)


def test_phylo_errors():
    tax = TaxonomyTable({1: None, 2: 1, 10: None, 11: 10})
    with pytest.raises(DisjointForest) as exc:
        phylo_distances(tax, [2, 11])
    assert exc.value.pairs == [(2, 11)]
    with pytest.raises(UnresolvedLeaf):
        phylo_distances(tax, [2, 99])


def _enumerated_path_length(parent, a, b):
    """Shortest path in the undirected tree, by breadth-first search."""
    g = nx.Graph([(c, p) for c, p in parent.items() if p is not None])
    return nx.shortest_path_length(g, a, b)


@given(st.lists(st.integers(0, 100), min_size=2, max_size=15))
def test_phylo_distances_match_tree_paths(raw):
    parent = {0: None}
    for i, r in enumerate(raw, start=1):
        parent[i] = r % i
    tax = TaxonomyTable(parent)
    leaves = list(parent)
    d = phylo_distances(tax, leaves)
    for i, j in itertools.combinations(range(len(leaves)), 2):
        assert d.values[i, j] == _enumerated_path_length(parent, leaves[i], leaves[j])


def test_pca_collinear_points():
    x = np.outer(np.arange(5.0), [1.0, 2.0, -1.0])
    _, explained = pca_fit_transform(x, 1)
    assert explained == pytest.approx([1.0], abs=1e-12)


def test_pca_equidistant_leaves_equal_shares():
    tax = TaxonomyTable({1: None, 2: 1, 3: 1, 4: 1})
    _, explained = pca_fit_transform(phylo_distances(tax, [2, 3, 4]).values, 2)
    assert explained[0] == pytest.approx(explained[1], abs=1e-12) and explained[0] > 0


@given(st.integers(0, 2**32 - 1), st.integers(3, 12), st.integers(2, 6))
def test_pca_properties(seed, n, cols):
    x = np.random.default_rng(seed).normal(size=(n, cols))
    k = min(n, cols)
    model = pca_fit(x, k)
    scores = model.transform(x)
    assert sum(model.explained) == pytest.approx(1.0, abs=1e-9)
    gram = scores.T @ scores
    assert np.abs(gram - np.diag(np.diag(gram))).max() <= 1e-8
    xc = x - x.mean(axis=0)
    if k == cols:
        assert np.linalg.norm(scores @ model.components.T - xc) <= 1e-6
    cov = xc.T @ xc / (n - 1)
    for j in range(k):
        v = model.components[:, j]
        assert np.linalg.norm(cov @ v - model.eigenvalues[j] * v) <= 1e-8
        assert v[np.argmax(np.abs(v))] > 0


# feature assembly

def test_tiny_feature_matrix(tiny_dir):
    kg = load_knowledge_graph(tiny_dir)
    fm, _, _ = embed_herbs(kg, seed=0)
    assert fm.values.shape == (3, 90)
    assert np.all(fm.values[:, :5].sum(axis=1) == 1)
    mineral = fm["CHP00003"]
    assert mineral[4] == 1 and np.all(mineral[segment("phylo_pca")] == 0)
    prop = fm.values[:, segment("property")]
    assert np.abs(prop.mean(axis=0)).max() <= 1e-6


def test_planted_segments_are_zscored(planted30):
    fm, _, _ = embed_herbs(planted30, seed=1)
    for name in ("property", "efficacy", "combination"):
        block = fm.values[:, segment(name)]
        assert np.abs(block.mean(axis=0)).max() <= 1e-6
        sd = block.std(axis=0)
        assert np.all((np.abs(sd - 1) <= 1e-6) | (sd == 0))


def test_herb_absent_from_corpora_has_only_one_hot(tiny_dir):
    kg = load_knowledge_graph(tiny_dir)
    lonely = HerbPiece("CHP00009", "lonely", "Fungi")
    kg2 = KnowledgeGraph(herbs={**kg.herbs, lonely.id: lonely}, formulas=kg.formulas, vocab=kg.vocab,
                         taxonomy=kg.taxonomy)
    _, tables, origin = embed_herbs(kg, seed=0)
    fm = assemble_chp_features(kg2, tables, origin.scores)
    v = fm["CHP00009"]
    assert np.flatnonzero(v).tolist() == [2]
    assert {seg for h, seg in fm.missing if h == "CHP00009"} == {"property", "efficacy", "combination"}


def test_feature_matrix_layout_is_enforced(tmp_path, tiny_dir):
    fm, _, _ = embed_herbs(load_knowledge_graph(tiny_dir), seed=0)
    fm.save(tmp_path / "f.bin", dtype="f64")
    assert FeatureMatrix.load(tmp_path / "f.bin") == fm
    with pytest.raises(LayoutMismatch):
        FeatureMatrix(fm.herb_ids, fm.values[:, :89])
    with pytest.raises(LayoutMismatch):
        FeatureMatrix(fm.herb_ids, fm.values, (("kingdom", 0, 6),))


# node2vec

def test_isolated_node_gets_zero_vector():
    g = nx.Graph()
    g.add_node("t")
    t = node2vec_embed(g)
    assert t.vectors.shape == (1, 32) and not t.vectors.any()


def test_barbell_cliques_separate():
    g = nx.barbell_graph(5, 0)
    left, right = range(5), range(5, 10)
    within, cross = [], []
    for seed in range(10):
        cfg = Node2VecConfig(dim=16, walks_per_node=5, walk_length=20,
                             skipgram=SkipGramConfig(window=5, dim=16, epochs=3, seed=seed))
        t = node2vec_embed(g, cfg)
        for side in (left, right):
            within += [_cos(t[str(u)], t[str(v)]) for u, v in itertools.combinations(side, 2)]
        cross += [_cos(t[str(u)], t[str(v)]) for u in left for v in right]
    assert np.mean(within) > np.mean(cross)


def test_node2vec_deterministic():
    g = nx.karate_club_graph()
    cfg = Node2VecConfig(dim=8, walks_per_node=2, walk_length=10, skipgram=SkipGramConfig(epochs=1, seed=3))
    a, b = node2vec_embed(g, cfg), node2vec_embed(g, cfg)
    assert a.tokens == b.tokens and a.vectors.tobytes() == b.vectors.tobytes()


def test_uniform_walk_transitions_follow_edge_weights():
    g = nx.Graph()
    g.add_weighted_edges_from([("c", "a", 1.0), ("c", "b", 2.0), ("c", "d", 5.0), ("a", "b", 1.0), ("d", "e", 1.0)])
    walks = generate_walks(g, Node2VecConfig(walks_per_node=50, walk_length=400), seed=0)
    counts = {"a": 0, "b": 0, "d": 0}
    for w in walks:
        for u, v in zip(w, w[1:]):
            if u == "c":
                counts[v] += 1
    total = sum(counts.values())
    assert total >= 10_000
    probs = {"a": 1 / 8, "b": 2 / 8, "d": 5 / 8}
    for k, p in probs.items():
        sigma = np.sqrt(total * p * (1 - p))
        assert abs(counts[k] - total * p) <= 3 * sigma


def test_return_and_inout_bias():
    from herbgraph.embed import transition_probabilities

    g = nx.Graph([("a", "b"), ("b", "c"), ("a", "c"), ("b", "d")])
    pr = transition_probabilities(g, "a", "b", p=0.5, q=2.0)
    # back to a: 1/p = 2, c shares an edge with a: 1, d is farther: 1/q = 0.5
    assert pr == pytest.approx({"a": 2 / 3.5, "c": 1 / 3.5, "d": 0.5 / 3.5})
