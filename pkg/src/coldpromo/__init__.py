"""Simulate promoting a cold-start item by linking it to chosen users and
measure its exposure in item-based collaborative-filtering lists."""

from .network import BipartiteNetwork, degrees, ingest_edge_list, read_edge_list, validate, write_edge_list
from .netstats import knn_by_degree, powerlaw_exponent_mle, summarize
from .nullmodel import reshuffle
from .promotion import PromotionStrategy, run_experiment, sweep
from .recsys import item_similarity, recommend

__all__ = [
    "BipartiteNetwork",
    "PromotionStrategy",
    "degrees",
    "ingest_edge_list",
    "item_similarity",
    "knn_by_degree",
    "powerlaw_exponent_mle",
    "read_edge_list",
    "recommend",
    "reshuffle",
    "run_experiment",
    "summarize",
    "sweep",
    "validate",
    "write_edge_list",
]
