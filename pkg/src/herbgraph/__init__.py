"""Knowledge-graph features, formula graphs and attention GNNs for herbal formula analysis."""

__version__ = "0.1.0"
