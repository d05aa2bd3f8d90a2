from .features import (
    LAYOUT,
    CorpusSet,
    FeatureMatrix,
    assemble_chp_features,
    build_corpora,
    embed_herbs,
    origin_scores,
    segment,
)
from .node2vec import Node2VecConfig, node2vec_embed, transition_probabilities
from .phylo import DistanceMatrix, pca_fit, pca_fit_transform, pcoa, phylo_distances
from .skipgram import EmbeddingTable, SkipGramConfig, train_skipgram

__all__ = [
    "LAYOUT",
    "CorpusSet",
    "DistanceMatrix",
    "EmbeddingTable",
    "FeatureMatrix",
    "Node2VecConfig",
    "SkipGramConfig",
    "assemble_chp_features",
    "build_corpora",
    "embed_herbs",
    "node2vec_embed",
    "origin_scores",
    "pca_fit",
    "pca_fit_transform",
    "pcoa",
    "phylo_distances",
    "segment",
    "train_skipgram",
    "transition_probabilities",
]
