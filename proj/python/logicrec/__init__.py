"""Python bindings for the LogicRec C++ engine."""

from ._logicrec import (  # noqa: F401
    KgSplit,
    LogicRecError,
    KnowledgeGraph,
    Model,
    Query,
    answer_logicrec,
    answer_preference,
    answer_requirement,
    build_dataset,
    hit_at_k,
    load_graph,
    load_split,
    ndcg_at_k,
    parse_query,
    split_edges,
    synthetic_graph,
)

__all__ = [
    "KgSplit",
    "LogicRecError",
    "KnowledgeGraph",
    "Model",
    "Query",
    "answer_logicrec",
    "answer_preference",
    "answer_requirement",
    "build_dataset",
    "hit_at_k",
    "load_graph",
    "load_split",
    "ndcg_at_k",
    "parse_query",
    "split_edges",
    "synthetic_graph",
]
