"""Edge-weighted PageRank over module dependence graphs.

Scores satisfy, for every module u,

    PR(u) = d * sum_{v -> u} w(v, u) / TL(v) * PR(v) + (1 - d) / m

where TL(v) is the total out-weight of v and m the number of modules.  The
teleport term is divided by m, so the scores form a probability vector.
Columns of dangling modules (TL(v) == 0) are replaced by the uniform column.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np
from scipy import sparse

from .graph import DependenceGraph, WeightMatrix

__all__ = [
    "NumericError",
    "OracleBoundError",
    "ScoreVector",
    "SolverConfig",
    "Transition",
    "build_transition",
    "exact_transition",
    "score_subset",
    "solve",
    "solve_direct",
]


class NumericError(ArithmeticError):
    pass


class OracleBoundError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    damping: float = 0.85
    max_iterations: int = 100
    tolerance: float = 1e-7
    oracle_bound: int = 64

    def __post_init__(self):
        if not 0 < self.damping < 1:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


class ScoreVector(Mapping):
    """Read-only module -> score mapping with solver diagnostics.

    ``errors`` holds the L1 change of every iteration; ``converged`` is
    False when the iteration cap was hit first.
    """

    def __init__(self, scores: Mapping[str, float], iterations_used: int = 0,
                 final_error: float = 0.0, converged: bool = True,
                 errors: Iterable[float] = ()):
        self._scores = dict(scores)
        self.iterations_used = iterations_used
        self.final_error = final_error
        self.converged = converged
        self.errors = list(errors)

    def __getitem__(self, key: str) -> float:
        return self._scores[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._scores)

    def __len__(self) -> int:
        return len(self._scores)

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v:.4f}" for k, v in self._scores.items())
        return f"ScoreVector({{{body}}}, iterations_used={self.iterations_used})"

    def as_array(self, order: Iterable[str]) -> np.ndarray:
        return np.array([self._scores[k] for k in order])

    def restrict(self, names: Iterable[str]) -> ScoreVector:
        return ScoreVector({k: self._scores[k] for k in names}, self.iterations_used,
                           self.final_error, self.converged, self.errors)


@dataclass
class Transition:
    """Column-stochastic transition structure.

    ``linked[u, v]`` is w(v, u) / TL(v) for non-dangling v; dangling
    columns are zero in ``linked`` and flagged in ``dangling`` -- they act
    as the uniform column 1/m.
    """

    nodes: tuple[str, ...]
    linked: sparse.csr_matrix
    dangling: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.nodes)

    def dot(self, p: np.ndarray) -> np.ndarray:
        m = len(self.nodes)
        spill = np.sum(p[self.dangling]) / m if self.dangling.any() else 0.0
        return self.linked @ p + spill

    def toarray(self) -> np.ndarray:
        dense = self.linked.toarray()
        dense[:, self.dangling] = 1.0 / len(self.nodes)
        return dense


def _as_matrix(source) -> WeightMatrix:
    if isinstance(source, DependenceGraph):
        return source.weight_matrix()
    if isinstance(source, WeightMatrix):
        return source
    raise TypeError(f"expected DependenceGraph or WeightMatrix, got {type(source).__name__}")


def build_transition(source) -> Transition:
    matrix = _as_matrix(source)
    m = len(matrix)
    if m < 1:
        raise ValueError("cannot build a transition structure for an empty graph")
    out = matrix.out_weights()
    dangling = out <= 0
    inv = np.zeros(m)
    inv[~dangling] = 1.0 / out[~dangling]
    # row-scale W by 1/TL, then transpose: linked[u, v] = w(v, u) / TL(v)
    linked = (sparse.diags(inv) @ matrix.matrix).T.tocsr()
    linked.sort_indices()
    return Transition(matrix.nodes, linked, dangling)


def exact_transition(source) -> tuple[tuple[str, ...], list[list[Fraction]]]:
    """The transition matrix as rationals, rows and columns in node order.

    Entry [i][j] is w(j, i) / TL(j).  Each stored weight is converted with
    ``Fraction(float)``, which is exact for integer counts and for back
    fractions that are dyadic (such as the default 0.5).
    """
    matrix = _as_matrix(source)
    m = len(matrix)
    if m < 1:
        raise ValueError("cannot build a transition structure for an empty graph")
    coo = matrix.matrix.tocoo()
    weights = [[Fraction(0)] * m for _ in range(m)]
    for i, j, w in zip(coo.row, coo.col, coo.data):
        weights[i][j] += Fraction(float(w))
    cells = [[Fraction(0)] * m for _ in range(m)]
    for j in range(m):
        total = sum(weights[j])
        for i in range(m):
            cells[i][j] = weights[j][i] / total if total > 0 else Fraction(1, m)
    return tuple(matrix.nodes), cells


def solve(source, config: SolverConfig | None = None) -> ScoreVector:
    """Power iteration from the uniform vector.

    Stops once the L1 change between successive iterates drops below
    ``config.tolerance`` or after ``config.max_iterations`` iterations; in
    the latter case the last iterate is returned with ``converged=False``.
    """
    config = config or SolverConfig()
    transition = build_transition(source)
    m = len(transition)
    d = config.damping
    teleport = (1.0 - d) / m
    p = np.full(m, 1.0 / m)
    errors = []
    converged = False
    for _ in range(config.max_iterations):
        nxt = d * transition.dot(p) + teleport
        if not np.all(np.isfinite(nxt)):
            raise NumericError("non-finite scores during iteration")
        err = float(np.sum(np.abs(nxt - p)))
        errors.append(err)
        p = nxt
        if err < config.tolerance:
            converged = True
            break
    return ScoreVector(dict(zip(transition.nodes, p.tolist())), len(errors),
                       errors[-1], converged, errors)


def solve_direct(source, config: SolverConfig | None = None) -> ScoreVector:
    """Exact fixed point by dense elimination, for small graphs.

    Builds the transition matrix from the raw weights independently of
    :func:`build_transition` and solves (I - d M) P = (1 - d)/m e.
    """
    config = config or SolverConfig()
    matrix = _as_matrix(source)
    m = len(matrix)
    if m < 1:
        raise ValueError("cannot solve an empty graph")
    if m > config.oracle_bound:
        raise OracleBoundError(f"{m} nodes exceeds the direct-solve bound of {config.oracle_bound}")
    weights = matrix.toarray()
    columns = np.empty((m, m))
    for v in range(m):
        total = sum(weights[v, u] for u in range(m))
        for u in range(m):
            columns[u, v] = weights[v, u] / total if total > 0 else 1.0 / m
    d = config.damping
    lhs = np.eye(m) - d * columns
    rhs = np.full(m, (1.0 - d) / m)
    p = np.linalg.solve(lhs, rhs)
    if not np.all(np.isfinite(p)):
        raise NumericError("direct solve produced non-finite scores")
    return ScoreVector(dict(zip(matrix.nodes, p.tolist())), 0, 0.0, True)


def score_subset(graph: DependenceGraph, labeled: Iterable[str], mode: str = "subset_graph",
                 config: SolverConfig | None = None) -> ScoreVector:
    """Scores for the labeled modules only.

    ``subset_graph`` solves on the subgraph induced by ``labeled``;
    ``whole_project`` solves on the full graph and keeps the labeled
    entries without renormalizing them.
    """
    labeled = sorted(set(labeled))
    if not labeled:
        raise ValueError("labeled subset is empty")
    missing = [name for name in labeled if name not in graph]
    if missing:
        raise KeyError(f"modules not in graph: {', '.join(missing)}")
    if mode == "subset_graph":
        return solve(graph.subgraph(labeled), config)
    if mode == "whole_project":
        return solve(graph, config).restrict(labeled)
    raise ValueError(f"unknown subset mode {mode!r}")
