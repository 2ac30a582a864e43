"""Synthetic dependence graphs for property checks and demos."""

from __future__ import annotations

import numpy as np

from .graph import DependenceCounts, DependenceGraph


def scale_free_graph(n: int = 300, edges_per_node: int = 3, seed: int = 0,
                     max_count: int = 3) -> DependenceGraph:
    """Directed preferential-attachment graph.

    Each new module depends on up to ``edges_per_node`` earlier modules chosen
    with probability proportional to (in-degree + 1), so a few modules become
    heavily depended-upon hubs.  Per-kind counts are drawn uniformly from
    0..max_count (ci from 0..1), with at least one positive count per edge.
    """
    if n < 2:
        raise ValueError("need at least two modules")
    rng = np.random.Generator(np.random.PCG64(seed))
    width = len(str(n - 1))
    names = [f"M{i:0{width}d}" for i in range(n)]
    graph = DependenceGraph()
    for name in names:
        graph.add_node(name)
    indegree = np.zeros(n)
    for i in range(1, n):
        k = min(i, edges_per_node)
        weights = indegree[:i] + 1.0
        targets = rng.choice(i, size=k, replace=False, p=weights / weights.sum())
        for t in sorted(int(t) for t in targets):
            counts = [int(rng.integers(0, 2))] + [int(c) for c in rng.integers(0, max_count + 1, size=3)]
            if sum(counts) == 0:
                counts[3] = 1
            graph.set_counts(names[i], names[t], DependenceCounts(*counts))
            indegree[t] += 1
    return graph


def top_indegree_modules(graph: DependenceGraph, count: int) -> list[str]:
    """The ``count`` modules with most distinct dependents; ties by name."""
    indegree = {name: 0 for name in graph.nodes}
    for (_, v) in graph.edges:
        indegree[v] += 1
    order = sorted(indegree, key=lambda name: (-indegree[name], name))
    return order[:count]
