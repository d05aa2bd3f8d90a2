"""Network analytics: co-occurrence, communities, layout, centralities, clustering, enrichment."""

from .centrality import METRICS, CentralityTable, centrality_profile, pagerank_residual
from .cluster import LINKAGES, ClusterResult, cut_tree, hierarchical_cluster, linkage_matrix
from .community import Cooccurrence, Partition, cooccurrence_matrix, louvain, modularity
from .enrichment import (
    CTPNetwork,
    EnrichmentRow,
    EnrichmentTable,
    bh_adjust,
    build_ctp_network,
    enrich_pathways,
    hypergeom_sf,
)
from .layout import Layout, LayoutParams, forceatlas2, smoothed

__all__ = [
    "METRICS", "CentralityTable", "centrality_profile", "pagerank_residual",
    "LINKAGES", "ClusterResult", "cut_tree", "hierarchical_cluster", "linkage_matrix",
    "Cooccurrence", "Partition", "cooccurrence_matrix", "louvain", "modularity",
    "CTPNetwork", "EnrichmentRow", "EnrichmentTable", "bh_adjust", "build_ctp_network",
    "enrich_pathways", "hypergeom_sf",
    "Layout", "LayoutParams", "forceatlas2", "smoothed",
]
