"""Synthetic knowledge graph with a planted label rule.

Label k of a formula is 1 exactly when both herbs of the k-th signal pair
(A_k, B_k) are members. Herbs come in classes of three "twins" sharing
kingdom, taxon, properties and efficacy, so an individual herb is only
identifiable through its co-occurrence (Combination) embedding. Doses are
random and carry no signal. Small compound, target, pathway and term tables
are included so every pipeline stage has input; compound-target pairs into pathway
hsa04000 carry high affinities so that pathway is over-represented.
"""

from __future__ import annotations

import string

import numpy as np

from .kg import (
    N_LABELS,
    TERM_TYPES,
    CompoundRecord,
    CompoundTargetPair,
    FeatureBlock,
    Formula,
    HerbPiece,
    KnowledgeGraph,
    PathwayTable,
    TaxonomyTable,
    TermGraph,
    Vocabulary,
)

NATURES = ("cold", "cool", "neutral", "warm", "hot")
FLAVORS = ("bitter", "sweet", "pungent", "sour", "salty")
MERIDIANS = ("lung", "heart", "spleen", "liver", "kidney", "stomach")
EFFICACY = ("clear-heat", "tonify-qi", "resolve-damp", "move-blood", "calm-mind", "release-exterior",
            "nourish-yin", "warm-interior")
N_CLASSES = 10
TWINS = 3
COMPOUND_CLASSES = ("flavonoid", "alkaloid", "terpenoid", "saponin")


def herb_id(i: int) -> str:
    return f"CHP{i + 1:05d}"


def signal_pairs() -> list[tuple[str, str]]:
    """(A_k, B_k) per label. A_k is the first twin of class k, B_k the first of class k + 5."""
    return [(herb_id(TWINS * k), herb_id(TWINS * (k + N_LABELS))) for k in range(N_LABELS)]


def _inchikey(rng: np.random.Generator) -> str:
    letters = np.array(list(string.ascii_uppercase))
    return "".join(rng.choice(letters, 14)) + "-" + "".join(rng.choice(letters, 10)) + "-N"


def _herbs(rng: np.random.Generator) -> tuple[dict[str, HerbPiece], TaxonomyTable]:
    # taxonomy: root 1 -> two families -> genera -> one species per class
    parent: dict[int, int | None] = {1: None, 2: 1, 3: 1}
    rank = {1: "kingdom", 2: "family", 3: "family"}
    herbs: dict[str, HerbPiece] = {}
    for c in range(N_CLASSES):
        mineral = c == N_CLASSES - 1
        taxid = None
        if not mineral:
            genus, species = 10 + c // 2, 100 + c
            parent.setdefault(genus, 2 + (c // 2) % 2)
            rank.setdefault(genus, "genus")
            parent[species] = genus
            rank[species] = "species"
            taxid = species
        natures = frozenset({NATURES[c % len(NATURES)]})
        flavors = frozenset(rng.choice(FLAVORS, size=1 + c % 2, replace=False).tolist())
        meridians = frozenset(rng.choice(MERIDIANS, size=1 + c % 3, replace=False).tolist())
        efficacy = tuple(sorted(rng.choice(EFFICACY, size=2, replace=False).tolist()))
        for t in range(TWINS):
            i = TWINS * c + t
            herbs[herb_id(i)] = HerbPiece(
                id=herb_id(i), name=f"herb-{c}-{t}", kingdom="Mineralia" if mineral else "Plantae",
                taxid=taxid, natures=natures, flavors=flavors, meridians=meridians, efficacy=efficacy,
            )
    return herbs, TaxonomyTable(parent, rank)


def _formulas(rng: np.random.Generator, n: int, herb_ids: list[str]) -> dict[str, Formula]:
    pairs = signal_pairs()
    signal = {h for p in pairs for h in p}
    fillers = [h for h in herb_ids if h not in signal]
    out: dict[str, Formula] = {}
    for fi in range(n):
        members: list[str] = []
        labels = []
        for a, b in pairs:
            u = rng.random()
            if u < 0.3:
                members += [a, b]
            elif u < 0.45:
                members.append(a)
            elif u < 0.6:
                members.append(b)
        target = int(rng.integers(4, 9))
        extra = [h for h in rng.permutation(fillers) if h not in members][: max(1, target - len(members))]
        members += list(extra)
        members = [members[i] for i in rng.permutation(len(members))]
        present = set(members)
        labels = tuple(int(a in present and b in present) for a, b in pairs)
        doses = rng.integers(3, 31, size=len(members)).astype(float)
        out[f"F{fi:04d}"] = Formula(f"F{fi:04d}", tuple(zip(members, doses.tolist())), labels)
    return out


def planted_knowledge_graph(n_formulas: int = 300, seed: int = 0) -> KnowledgeGraph:
    """Deterministic planted-rule knowledge graph with ``n_formulas`` formulas."""
    rng = np.random.default_rng(seed)
    herbs, taxonomy = _herbs(rng)
    formulas = _formulas(rng, n_formulas, list(herbs))

    n_comp, n_targets = 40, 30
    keys = sorted({_inchikey(rng) for _ in range(n_comp)})
    compounds = {}
    for i, k in enumerate(keys):
        desc = (("LogP", round(float(rng.normal(2.5, 2.0)), 3)), ("MolWt", round(float(rng.uniform(150, 800)), 3)),
                ("NumHAcceptors", float(rng.integers(0, 14))), ("NumHDonors", float(rng.integers(0, 8))))
        compounds[k] = CompoundRecord(k, desc, COMPOUND_CLASSES[i % len(COMPOUND_CLASSES)])
    feats = FeatureBlock(tuple(keys), rng.normal(size=(len(keys), 16)))
    targets = [1000 + t for t in range(n_targets)]
    pathways = {f"hsa{4000 + p:05d}": frozenset(int(t) for t in rng.choice(targets, 8, replace=False))
                for p in range(6)}
    universe = frozenset().union(*pathways.values())
    hot = pathways["hsa04000"]  # pairs into this pathway bind strongly, so it comes out enriched
    pairs = []
    for k in keys:
        for t in rng.choice(targets, size=int(rng.integers(1, 4)), replace=False):
            lo, hi = (8.0, 10.0) if int(t) in hot else (3.0, 8.5)
            pairs.append(CompoundTargetPair(k, int(t), round(float(rng.uniform(lo, hi)), 3)))
    pairs.sort(key=lambda p: (p.inchikey, p.entrez_id))
    herb_compounds = sorted({(h, keys[int(j)]) for h in herbs for j in rng.choice(len(keys), 3, replace=False)})

    n_terms = 36
    types = {f"T{i:03d}": TERM_TYPES[i % len(TERM_TYPES)] for i in range(n_terms)}
    names = {t: f"term {i}" for i, t in enumerate(types)}
    term_ids = list(types)
    edges = []
    for i in range(n_terms):
        group = i // 6  # six loose clusters of terms
        for j in range(i + 1, n_terms):
            p = 0.6 if j // 6 == group else 0.03
            if rng.random() < p:
                edges.append((term_ids[i], term_ids[j], round(float(rng.uniform(0.5, 2.0)), 3)))

    return KnowledgeGraph(
        herbs=herbs, formulas=formulas, compounds=compounds, compound_features=feats,
        pairs=tuple(pairs), herb_compounds=tuple(herb_compounds), taxonomy=taxonomy,
        terms=TermGraph(types, names, tuple(edges)), pathways=PathwayTable(pathways, universe),
        vocab=Vocabulary(NATURES, FLAVORS, MERIDIANS),
    )
