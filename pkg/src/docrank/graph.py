"""Edge-weighted module dependence graphs.

A :class:`DependenceGraph` stores, for every ordered pair of modules, how
many times the first depends on the second through each of the four
dependence kinds (inheritance, attribute type, method signature, method
call).  Scalar edge weights are derived from those counts according to the
graph's weighting mode.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np
from scipy import sparse

__all__ = [
    "DEPENDENCE_KINDS",
    "EMPIRICAL_COEFFICIENTS",
    "MODULE_KINDS",
    "WEIGHT_MODES",
    "DependenceCounts",
    "DependenceGraph",
    "GraphError",
    "GraphFormatError",
    "SelfEdgeError",
    "UnknownNodeError",
    "WeightMatrix",
    "deserialize",
    "read_graph",
    "serialize",
    "write_graph",
]

DEPENDENCE_KINDS = ("ci", "ca", "cm", "mm")
MODULE_KINDS = ("class", "interface")
WEIGHT_MODES = ("uniform", "empirical", "back_recommendation", "empirical_plus_back")
EMPIRICAL_COEFFICIENTS = {"ci": 3, "ca": 3, "cm": 2, "mm": 4}
DEFAULT_BACK_FRACTION = 0.5

GRAPH_HEADER = "#docrank-graph v1"


class GraphError(ValueError):
    pass


class SelfEdgeError(GraphError):
    pass


class UnknownNodeError(GraphError, KeyError):
    def __str__(self) -> str:
        return ValueError.__str__(self)


class GraphFormatError(GraphError):
    """Malformed graph file; carries the 1-based line number and field name."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class DependenceCounts:
    ci: int = 0
    ca: int = 0
    cm: int = 0
    mm: int = 0

    def __post_init__(self):
        for kind in DEPENDENCE_KINDS:
            value = getattr(self, kind)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 0:
                raise GraphError(f"{kind} must be a non-negative integer, got {value!r}")
        if self.ci > 1:
            raise GraphError(f"ci is binary, got {self.ci}")

    def total(self) -> int:
        return self.ci + self.ca + self.cm + self.mm

    def empirical(self) -> int:
        return sum(EMPIRICAL_COEFFICIENTS[k] * getattr(self, k) for k in DEPENDENCE_KINDS)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.ci, self.ca, self.cm, self.mm)


class DependenceGraph:
    """Directed module graph with per-edge dependence counts.

    Nodes are keyed by fully qualified module name; each carries a kind
    (``"class"`` or ``"interface"``).  ``weight_mode`` selects how edge
    weights are derived from the counts:

    ``uniform``
        ci + ca + cm + mm
    ``empirical``
        3*ci + 3*ca + 2*cm + 4*mm
    ``back_recommendation`` / ``empirical_plus_back``
        the uniform / empirical weights R plus ``back_fraction`` times R
        transposed.
    """

    def __init__(self, weight_mode: str = "uniform", back_fraction: float = DEFAULT_BACK_FRACTION):
        if weight_mode not in WEIGHT_MODES:
            raise GraphError(f"unknown weight mode {weight_mode!r}")
        if not back_fraction >= 0:
            raise GraphError(f"back_fraction must be >= 0, got {back_fraction!r}")
        self.weight_mode = weight_mode
        self.back_fraction = float(back_fraction)
        self.nodes: dict[str, str] = {}
        self.edges: dict[tuple[str, str], DependenceCounts] = {}
        self._out: dict[str, set[str]] = {}
        self._in: dict[str, set[str]] = {}

    def __repr__(self) -> str:
        return (f"DependenceGraph({len(self.nodes)} nodes, {len(self.edges)} edges, "
                f"weight_mode={self.weight_mode!r})")

    def __contains__(self, name: object) -> bool:
        return name in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DependenceGraph):
            return NotImplemented
        return (self.nodes == other.nodes and self.edges == other.edges
                and self.weight_mode == other.weight_mode
                and self.back_fraction == other.back_fraction)

    # construction

    def add_node(self, name: str, kind: str = "class") -> None:
        if not name or any(ch.isspace() for ch in name):
            raise GraphError(f"invalid module name {name!r}")
        if kind not in MODULE_KINDS:
            raise GraphError(f"module kind must be one of {MODULE_KINDS}, got {kind!r}")
        if name in self.nodes:
            if self.nodes[name] != kind:
                raise GraphError(f"module {name!r} already declared as {self.nodes[name]}")
            return
        self.nodes[name] = kind
        self._out[name] = set()
        self._in[name] = set()

    def add_dependence(self, u: str, v: str, kind: str, count: int = 1) -> None:
        """Increment the ``kind`` count of edge (u, v) by ``count``.

        Missing endpoints are inserted as classes.
        """
        kind = kind.lower()
        if kind not in DEPENDENCE_KINDS:
            raise GraphError(f"unknown dependence kind {kind!r}")
        if u == v:
            raise SelfEdgeError(f"self-dependence on {u!r} is not an edge")
        if isinstance(count, bool) or int(count) != count or count < 1:
            raise GraphError(f"count must be a positive integer, got {count!r}")
        current = self.edges.get((u, v), DependenceCounts())
        values = dict(zip(DEPENDENCE_KINDS, current.as_tuple()))
        values[kind] += int(count)
        if values["ci"] > 1:
            raise GraphError(f"inheritance between {u!r} and {v!r} is already recorded")
        for name in (u, v):
            if name not in self.nodes:
                self.add_node(name)
        self._set_counts(u, v, DependenceCounts(**values))

    def set_counts(self, u: str, v: str, counts: DependenceCounts) -> None:
        """Replace the counts on (u, v); both endpoints must exist."""
        self._require(u)
        self._require(v)
        if u == v:
            raise SelfEdgeError(f"self-dependence on {u!r} is not an edge")
        if counts.total() == 0:
            self.edges.pop((u, v), None)
            self._out[u].discard(v)
            self._in[v].discard(u)
            return
        self._set_counts(u, v, counts)

    def _set_counts(self, u, v, counts):
        self.edges[(u, v)] = counts
        self._out[u].add(v)
        self._in[v].add(u)

    def _require(self, name: str) -> None:
        if name not in self.nodes:
            raise UnknownNodeError(f"unknown module {name!r}")

    def copy(self) -> DependenceGraph:
        return copy.deepcopy(self)

    def with_weighting(self, weight_mode: str, back_fraction: float | None = None) -> DependenceGraph:
        """A copy sharing the counts but deriving weights differently."""
        other = self.copy()
        if weight_mode not in WEIGHT_MODES:
            raise GraphError(f"unknown weight mode {weight_mode!r}")
        other.weight_mode = weight_mode
        if back_fraction is not None:
            if not back_fraction >= 0:
                raise GraphError(f"back_fraction must be >= 0, got {back_fraction!r}")
            other.back_fraction = float(back_fraction)
        return other

    def subgraph(self, names: Iterable[str]) -> DependenceGraph:
        keep = set(names)
        for name in keep:
            self._require(name)
        sub = DependenceGraph(self.weight_mode, self.back_fraction)
        for name in sorted(keep):
            sub.add_node(name, self.nodes[name])
        for (u, v), counts in self.edges.items():
            if u in keep and v in keep:
                sub._set_counts(u, v, counts)
        return sub

    # weights

    def counts(self, u: str, v: str) -> DependenceCounts:
        self._require(u)
        self._require(v)
        return self.edges.get((u, v), DependenceCounts())

    @property
    def uses_back_recommendation(self) -> bool:
        return self.weight_mode in ("back_recommendation", "empirical_plus_back")

    def _forward(self, u: str, v: str) -> int:
        counts = self.edges.get((u, v))
        if counts is None:
            return 0
        if self.weight_mode in ("empirical", "empirical_plus_back"):
            return counts.empirical()
        return counts.total()

    def edge_weight(self, u: str, v: str) -> float:
        """Weight of (u, v) under the graph's weighting mode; 0 when absent."""
        self._require(u)
        self._require(v)
        weight = self._forward(u, v)
        if self.uses_back_recommendation:
            return weight + self.back_fraction * self._forward(v, u)
        return weight

    def out_edges(self, u: str) -> dict[str, float]:
        self._require(u)
        targets = set(self._out[u])
        if self.uses_back_recommendation and self.back_fraction > 0:
            targets |= self._in[u]
        weights = {v: self.edge_weight(u, v) for v in sorted(targets)}
        return {v: w for v, w in weights.items() if w > 0}

    def in_edges(self, u: str) -> dict[str, float]:
        self._require(u)
        sources = set(self._in[u])
        if self.uses_back_recommendation and self.back_fraction > 0:
            sources |= self._out[u]
        weights = {v: self.edge_weight(v, u) for v in sorted(sources)}
        return {v: w for v, w in weights.items() if w > 0}

    def total_out_weight(self, v: str) -> float:
        return sum(self.out_edges(v).values())

    def weight_matrix(self) -> WeightMatrix:
        """Weight matrix over the nodes in ascending name order."""
        names = tuple(sorted(self.nodes))
        index = {name: i for i, name in enumerate(names)}
        m = len(names)
        rows, cols, data = [], [], []
        for (u, v) in self.edges:
            rows.append(index[u])
            cols.append(index[v])
            data.append(float(self._forward(u, v)))
        forward = sparse.csr_matrix(
            (np.array(data, dtype=float), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
            shape=(m, m))
        if self.uses_back_recommendation:
            matrix = forward + self.back_fraction * forward.T.tocsr()
        else:
            matrix = forward
        matrix = sparse.csr_matrix(matrix)
        matrix.eliminate_zeros()
        matrix.sort_indices()
        return WeightMatrix(names, matrix)


class WeightMatrix:
    """Sparse (u, v) -> weight map over a fixed, ordered node list."""

    def __init__(self, nodes: Iterable[str], matrix):
        self.nodes = tuple(nodes)
        self.index = {name: i for i, name in enumerate(self.nodes)}
        if len(self.index) != len(self.nodes):
            raise GraphError("duplicate node names in weight matrix")
        self.matrix = sparse.csr_matrix(matrix, dtype=float)
        m = len(self.nodes)
        if self.matrix.shape != (m, m):
            raise GraphError(f"matrix shape {self.matrix.shape} does not match {m} nodes")
        if self.matrix.nnz and (self.matrix.data < 0).any():
            raise GraphError("weights must be non-negative")
        if self.matrix.nnz and self.matrix.diagonal().any():
            raise SelfEdgeError("weight matrix has self-edges")
        self.matrix.eliminate_zeros()

    @classmethod
    def from_dense(cls, nodes: Iterable[str], array) -> WeightMatrix:
        return cls(nodes, sparse.csr_matrix(np.asarray(array, dtype=float)))

    @classmethod
    def from_edges(cls, nodes: Iterable[str], weights: Mapping[tuple[str, str], float]) -> WeightMatrix:
        nodes = tuple(nodes)
        index = {name: i for i, name in enumerate(nodes)}
        dense = np.zeros((len(nodes), len(nodes)))
        for (u, v), w in weights.items():
            dense[index[u], index[v]] += w
        return cls.from_dense(nodes, dense)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[str]:
        return iter(self.nodes)

    def _idx(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise UnknownNodeError(f"unknown module {name!r}") from None

    def get(self, u: str, v: str) -> float:
        return float(self.matrix[self._idx(u), self._idx(v)])

    def out_edges(self, u: str) -> dict[str, float]:
        i = self._idx(u)
        start, end = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return {self.nodes[j]: float(w)
                for j, w in zip(self.matrix.indices[start:end], self.matrix.data[start:end])
                if w > 0}

    def in_edges(self, u: str) -> dict[str, float]:
        column = self.matrix.getcol(self._idx(u)).tocoo()
        return {self.nodes[i]: float(w) for i, w in sorted(zip(column.row, column.data)) if w > 0}

    def total_out_weight(self, v: str) -> float:
        i = self._idx(v)
        start, end = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return float(np.sum(self.matrix.data[start:end]))

    def out_weights(self) -> np.ndarray:
        """Row sums, i.e. the total out-weight of every node."""
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def scaled(self, factor: float) -> WeightMatrix:
        return WeightMatrix(self.nodes, self.matrix * float(factor))


# serialization


def _format_number(value: float) -> str:
    return f"{value:.17g}"


def serialize(graph: DependenceGraph) -> str:
    """Canonical text form: nodes and edges sorted by name, tab separated."""
    lines = [GRAPH_HEADER]
    if graph.weight_mode != "uniform" or graph.back_fraction != DEFAULT_BACK_FRACTION:
        lines.append(f"W\t{graph.weight_mode}\t{_format_number(graph.back_fraction)}")
    for name in sorted(graph.nodes):
        lines.append(f"N\t{name}\t{graph.nodes[name]}")
    for (u, v) in sorted(graph.edges):
        counts = graph.edges[(u, v)]
        lines.append("\t".join(["E", u, v, *map(str, counts.as_tuple())]))
    return "\n".join(lines) + "\n"


def _parse_count(text: str, lineno: int, field: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise GraphFormatError(f"expected a non-negative integer, got {text!r}", lineno, field) from None
    if value < 0 or not text.strip().isdigit():
        raise GraphFormatError(f"expected a non-negative integer, got {text!r}", lineno, field)
    return value


def deserialize(data: str | bytes) -> DependenceGraph:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise GraphFormatError(f"not UTF-8: {exc}") from None
    lines = data.splitlines()
    if not lines or lines[0].strip() != GRAPH_HEADER:
        raise GraphFormatError(f"missing header {GRAPH_HEADER!r}", 1, "header")

    graph = DependenceGraph()
    pending_edges = []
    seen_mode = False
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        tag = fields[0]
        if tag == "N":
            if len(fields) != 3:
                raise GraphFormatError(f"node line needs 3 fields, got {len(fields)}", lineno, "N")
            name, kind = fields[1], fields[2]
            if kind not in MODULE_KINDS:
                raise GraphFormatError(f"unknown module kind {kind!r}", lineno, "kind")
            if name in graph.nodes:
                raise GraphFormatError(f"duplicate node {name!r}", lineno, "name")
            graph.add_node(name, kind)
        elif tag == "E":
            if len(fields) != 7:
                raise GraphFormatError(f"edge line needs 7 fields, got {len(fields)}", lineno, "E")
            values = [_parse_count(text, lineno, kind) for text, kind in zip(fields[3:], DEPENDENCE_KINDS)]
            pending_edges.append((lineno, fields[1], fields[2], values))
        elif tag == "W":
            if seen_mode:
                raise GraphFormatError("duplicate weighting line", lineno, "W")
            if len(fields) != 3:
                raise GraphFormatError(f"weighting line needs 3 fields, got {len(fields)}", lineno, "W")
            if fields[1] not in WEIGHT_MODES:
                raise GraphFormatError(f"unknown weight mode {fields[1]!r}", lineno, "weight_mode")
            try:
                fraction = float(fields[2])
            except ValueError:
                raise GraphFormatError(f"bad back fraction {fields[2]!r}", lineno, "back_fraction") from None
            if not fraction >= 0:
                raise GraphFormatError(f"bad back fraction {fields[2]!r}", lineno, "back_fraction")
            graph.weight_mode, graph.back_fraction = fields[1], fraction
            seen_mode = True
        else:
            raise GraphFormatError(f"unknown line tag {tag!r}", lineno, "tag")

    for lineno, u, v, values in pending_edges:
        for name, field in ((u, "source"), (v, "target")):
            if name not in graph.nodes:
                raise GraphFormatError(f"edge endpoint {name!r} has no node line", lineno, field)
        if u == v:
            raise GraphFormatError(f"self-edge on {u!r}", lineno, "target")
        if (u, v) in graph.edges:
            raise GraphFormatError(f"duplicate edge {u} -> {v}", lineno, "E")
        if values[0] > 1:
            raise GraphFormatError(f"ci is binary, got {values[0]}", lineno, "ci")
        if sum(values) == 0:
            raise GraphFormatError(f"edge {u} -> {v} has zero weight", lineno, "E")
        graph.set_counts(u, v, DependenceCounts(*values))
    return graph


def write_graph(graph: DependenceGraph, path: str | Path) -> None:
    Path(path).write_text(serialize(graph), encoding="utf-8")


def read_graph(path: str | Path) -> DependenceGraph:
    return deserialize(Path(path).read_bytes())
