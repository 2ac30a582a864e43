"""Rank modules of object-oriented code by dependence-weighted PageRank.

Typical use::

    from docrank import extract_project, solve, rank, select_top

    graph = extract_project("path/to/src")
    ranked = rank(solve(graph))
    important = select_top(ranked, 10).selected
"""

__version__ = "0.1.0"

from .evaluation import (BootstrapResult, ConfusionMatrix, IndicatorRecord, LabelSet,
                         bootstrap_split, confusion, indicators, read_labels, run_bootstrap)
from .extract import JavaParseError, extract_project, parse_unit
from .graph import DependenceCounts, DependenceGraph, WeightMatrix, deserialize, serialize
from .pagerank import ScoreVector, SolverConfig, build_transition, score_subset, solve, solve_direct
from .ranking import RankedList, rank, select_top
from .stats import benjamini_hochberg, cliffs_delta, wilcoxon_signed_rank

__all__ = [
    "BootstrapResult", "ConfusionMatrix", "DependenceCounts", "DependenceGraph",
    "IndicatorRecord", "JavaParseError", "LabelSet", "RankedList", "ScoreVector",
    "SolverConfig", "WeightMatrix", "benjamini_hochberg", "bootstrap_split",
    "build_transition", "cliffs_delta", "confusion", "deserialize", "extract_project",
    "indicators", "parse_unit", "rank", "read_labels", "run_bootstrap", "score_subset",
    "select_top", "serialize", "solve", "solve_direct", "wilcoxon_signed_rank",
]
