"""Token corpora and the 90-column herb feature matrix.

Column layout (frozen; stored alongside every saved matrix)::

    [0, 5)    kingdom one-hot (Plantae, Animalia, Fungi, Algae, Mineralia)
    [5, 15)   phylogenetic PCA scores, zero-padded
    [15, 30)  medicinal-property embedding
    [30, 60)  efficacy embedding
    [60, 90)  combination (co-prescription) embedding
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import EmptyCorpus, LayoutMismatch
from ..kg import KINGDOMS, PROPERTY_KINDS, KnowledgeGraph
from .io import read_matrix, write_matrix
from .phylo import pca_fit_transform, pcoa, phylo_distances
from .skipgram import EmbeddingTable, SkipGramConfig, train_skipgram

LAYOUT = (
    ("kingdom", 0, 5),
    ("phylo_pca", 5, 15),
    ("property", 15, 30),
    ("efficacy", 30, 60),
    ("combination", 60, 90),
)
N_FEATURES = 90
LAYOUT_VERSION = 1
PCA_COMPONENTS = 10
ZSCORED = ("property", "efficacy", "combination")


def segment(name: str) -> slice:
    for seg, a, b in LAYOUT:
        if seg == name:
            return slice(a, b)
    raise KeyError(name)


@dataclass(frozen=True)
class CorpusSet:
    property: dict[str, list[str]]
    efficacy: dict[str, list[str]]
    combination: dict[str, list[str]]

    def sentences(self, kind: str) -> list[list[str]]:
        return [s for s in getattr(self, kind).values() if s]


def build_corpora(kg: KnowledgeGraph) -> CorpusSet:
    """Per-herb property and efficacy sentences; per-formula member sentences."""
    prop, eff = {}, {}
    for h in kg.herbs.values():
        sent = []
        for kind in PROPERTY_KINDS:
            have = h.properties(kind)
            ordered = [t for t in kg.vocab.tokens(kind) if t in have]
            sent += ordered + sorted(have.difference(ordered))
        prop[h.id] = sent
        eff[h.id] = list(h.efficacy)
    comb = {f.id: list(f.herb_ids) for f in kg.formulas.values()}
    corpora = CorpusSet(prop, eff, comb)
    for kind in ("property", "efficacy", "combination"):
        if not corpora.sentences(kind):
            raise EmptyCorpus(kind)
    return corpora


DEFAULT_SKIPGRAM = {
    "property": SkipGramConfig(window=5, dim=15),
    "efficacy": SkipGramConfig(window=10, dim=30),
    "combination": SkipGramConfig(window=10, dim=30),
}


@dataclass(frozen=True)
class OriginScores:
    scores: dict[str, np.ndarray]
    explained: dict[str, np.ndarray]


def origin_scores(kg: KnowledgeGraph, n_components: int = PCA_COMPONENTS, method: str = "rows") -> OriginScores:
    """Per-kingdom PCA of taxonomy distances between the herbs' taxa.

    Minerals and herbs without a taxid get zeros; kingdoms with fewer than
    ``n_components`` distinct taxa keep as many components as taxa and are
    zero-padded. ``method="pcoa"`` swaps row-wise PCA for classical MDS.
    """
    out: dict[str, np.ndarray] = {h: np.zeros(n_components) for h in kg.herbs}
    explained: dict[str, np.ndarray] = {}
    for kingdom in KINGDOMS:
        if kingdom == "Mineralia":
            continue
        members = [h for h in kg.herbs.values() if h.kingdom == kingdom and h.taxid is not None]
        taxa = sorted({h.taxid for h in members})
        if len(taxa) < 2:
            continue
        dm = phylo_distances(kg.taxonomy, taxa)
        k = min(n_components, len(taxa))
        if method == "pcoa":
            scores, expl = pcoa(dm.values, k)
        else:
            scores, expl = pca_fit_transform(dm.values, k)
        explained[kingdom] = expl
        row = {t: i for i, t in enumerate(taxa)}
        for h in members:
            vec = np.zeros(n_components)
            vec[:k] = scores[row[h.taxid]]
            out[h.id] = vec
    return OriginScores(out, explained)


@dataclass
class FeatureMatrix:
    herb_ids: tuple[str, ...]
    values: np.ndarray
    layout: tuple = LAYOUT
    missing: tuple[tuple[str, str], ...] = field(default=(), compare=False)

    def __post_init__(self):
        if tuple(tuple(s) for s in self.layout) != LAYOUT:
            raise LayoutMismatch(f"unexpected feature layout {self.layout}")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.herb_ids), N_FEATURES):
            raise LayoutMismatch(f"feature matrix must be n x {N_FEATURES}, got {self.values.shape}")
        self._index = {h: i for i, h in enumerate(self.herb_ids)}

    def __contains__(self, herb_id) -> bool:
        return herb_id in self._index

    def __getitem__(self, herb_id) -> np.ndarray:
        return self.values[self._index[herb_id]]

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return self.herb_ids == other.herb_ids and np.array_equal(self.values, other.values)

    def save(self, path: str | Path, dtype: str = "f32") -> None:
        meta = {
            "kind": "feature_matrix",
            "layout_version": LAYOUT_VERSION,
            "layout": [list(s) for s in LAYOUT],
            "row_index": list(self.herb_ids),
            "missing": [list(m) for m in self.missing],
        }
        write_matrix(path, self.values, meta, dtype=dtype)

    @classmethod
    def load(cls, path: str | Path) -> "FeatureMatrix":
        values, meta = read_matrix(path)
        if meta.get("kind") != "feature_matrix" or meta.get("layout_version") != LAYOUT_VERSION:
            raise LayoutMismatch(f"{path} is not a v{LAYOUT_VERSION} feature matrix")
        layout = tuple(tuple(s) for s in meta["layout"])
        return cls(tuple(meta["row_index"]), values, layout,
                   tuple(tuple(m) for m in meta.get("missing", ())))


def _mean_vector(tokens, table: EmbeddingTable | None):
    if table is None:
        return None
    vecs = [table[t] for t in tokens if t in table]
    return np.mean(vecs, axis=0) if vecs else None


def _zscore(block: np.ndarray, covered: np.ndarray) -> np.ndarray:
    out = np.zeros_like(block)
    if covered.any():
        sub = block[covered]
        mu = sub.mean(axis=0)
        sd = sub.std(axis=0)
        sd[sd == 0] = 1.0
        out[covered] = (sub - mu) / sd
    return out


def assemble_chp_features(kg: KnowledgeGraph, tables: dict[str, EmbeddingTable],
                          pca_scores: dict[str, np.ndarray]) -> FeatureMatrix:
    """Concatenate origin and relational segments for every herb.

    The three learned segments are z-scored column-wise over the herbs that
    have them; a herb with no vector for a segment gets zeros there and a
    ``(herb, segment)`` entry in ``missing``.
    """
    herb_ids = tuple(kg.herbs)
    n = len(herb_ids)
    values = np.zeros((n, N_FEATURES))
    missing = []
    for i, hid in enumerate(herb_ids):
        h = kg.herbs[hid]
        if h.kingdom in KINGDOMS:
            values[i, KINGDOMS.index(h.kingdom)] = 1.0
        pc = pca_scores.get(hid)
        if pc is not None:
            values[i, segment("phylo_pca")][: len(pc)] = pc[:PCA_COMPONENTS]

    sources = {
        "property": lambda h: _mean_vector(
            [t for kind in PROPERTY_KINDS for t in sorted(h.properties(kind))], tables.get("property")),
        "efficacy": lambda h: _mean_vector(h.efficacy, tables.get("efficacy")),
        "combination": lambda h: (tables["combination"].get(h.id) if "combination" in tables else None),
    }
    for name in ZSCORED:
        sl = segment(name)
        width = sl.stop - sl.start
        block = np.zeros((n, width))
        covered = np.zeros(n, dtype=bool)
        for i, hid in enumerate(herb_ids):
            vec = sources[name](kg.herbs[hid])
            if vec is None:
                missing.append((hid, name))
                continue
            if len(vec) != width:
                raise LayoutMismatch(f"{name} vectors must have {width} dims, got {len(vec)}")
            block[i] = vec
            covered[i] = True
        values[:, sl] = _zscore(block, covered)
    return FeatureMatrix(herb_ids, values, LAYOUT, tuple(missing))


def embed_herbs(kg: KnowledgeGraph, seed: int = 0, configs: dict[str, SkipGramConfig] | None = None,
                pca_method: str = "rows") -> tuple[FeatureMatrix, dict[str, EmbeddingTable], OriginScores]:
    """Full herb embedding pipeline: corpora, three skip-gram tables, origin PCA, assembly."""
    from dataclasses import replace

    corpora = build_corpora(kg)
    configs = configs or DEFAULT_SKIPGRAM
    tables = {}
    for offset, kind in enumerate(("property", "efficacy", "combination")):
        cfg = replace(configs[kind], seed=seed + offset)
        tables[kind] = train_skipgram(corpora.sentences(kind), cfg)
    origin = origin_scores(kg, method=pca_method)
    return assemble_chp_features(kg, tables, origin.scores), tables, origin
