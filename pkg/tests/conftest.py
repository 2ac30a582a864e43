import itertools
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as sps

from docrank.extract import extract_project
from docrank.graph import DependenceGraph

FIXTURES = Path(__file__).parent / "fixtures"
EXAMPLE_DIR = FIXTURES / "example"

# Edge weights of the worked example, read off the inline annotations.
EXAMPLE_WEIGHTS = {
    ("A", "B"): 3, ("A", "C"): 3, ("A", "D"): 5,
    ("B", "A"): 1, ("B", "D"): 1,
    ("C", "B"): 1,
    ("D", "B"): 1, ("D", "C"): 1,
}


def exact_solve(matrix, rhs):
    """Gauss-Jordan elimination over Fractions."""
    n = len(matrix)
    aug = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [row[-1] for row in aug]


def exact_pagerank(nodes, weights, damping=Fraction(17, 20)):
    """Fixed point of the weighted PageRank equations in exact arithmetic."""
    m = len(nodes)
    index = {name: i for i, name in enumerate(nodes)}
    out = {v: sum(Fraction(w) for (a, _), w in weights.items() if a == v) for v in nodes}
    lhs = [[Fraction(int(i == j)) for j in range(m)] for i in range(m)]
    for u in nodes:
        for v in nodes:
            if out[v] == 0:
                entry = Fraction(1, m)
            else:
                entry = Fraction(weights.get((v, u), 0)) / out[v]
            lhs[index[u]][index[v]] -= damping * entry
    rhs = [(1 - damping) / m] * m
    return dict(zip(nodes, exact_solve(lhs, rhs)))


def brute_force_wilcoxon(a, b):
    """Two-sided p by enumerating every sign assignment of the nonzero differences."""
    diff = [x - y for x, y in zip(a, b) if x != y]
    m = len(diff)
    if m == 0:
        return 1.0
    doubled = [int(round(2 * r)) for r in sps.rankdata(np.abs(diff))]
    observed = sum(r for r, d in zip(doubled, diff) if d > 0)
    centre = sum(doubled) / 2
    extreme = 0
    for signs in itertools.product((0, 1), repeat=m):
        t = sum(r for r, s in zip(doubled, signs) if s)
        if abs(t - centre) >= abs(observed - centre):
            extreme += 1
    return extreme / 2 ** m


def brute_force_delta(a, b):
    gt = sum(1 for x in a for y in b if x > y)
    lt = sum(1 for x in a for y in b if x < y)
    return (gt - lt) / (len(a) * len(b))


# (number, title, passed, detail) per acceptance criterion, filled by test_acceptance
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def extracted_example() -> DependenceGraph:
    return extract_project(EXAMPLE_DIR)


@pytest.fixture
def example_graph() -> DependenceGraph:
    """The worked-example graph built by hand from its edge weights (all MM)."""
    graph = DependenceGraph()
    for name, kind in (("A", "class"), ("B", "class"), ("C", "interface"), ("D", "class")):
        graph.add_node(name, kind)
    for (u, v), w in EXAMPLE_WEIGHTS.items():
        graph.add_dependence(u, v, "mm", w)
    return graph
