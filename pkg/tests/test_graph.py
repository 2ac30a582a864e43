import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docrank.graph import (DependenceCounts, DependenceGraph, GraphError, GraphFormatError,
                           SelfEdgeError, UnknownNodeError, WeightMatrix, deserialize, serialize)


def test_add_dependence_on_empty_graph():
    g = DependenceGraph()
    g.add_dependence("A", "B", "CI")
    assert set(g.nodes) == {"A", "B"}
    assert g.counts("A", "B") == DependenceCounts(1, 0, 0, 0)


def test_add_dependence_accumulates():
    g = DependenceGraph()
    g.add_dependence("A", "B", "cm", 2)
    g.add_dependence("A", "B", "mm")
    g.add_dependence("A", "B", "cm")
    assert g.counts("A", "B").as_tuple() == (0, 0, 3, 1)


def test_self_edge_rejected():
    g = DependenceGraph()
    with pytest.raises(SelfEdgeError):
        g.add_dependence("A", "A", "ca")


def test_second_inheritance_rejected():
    g = DependenceGraph()
    g.add_dependence("A", "B", "ci")
    with pytest.raises(GraphError):
        g.add_dependence("A", "B", "ci")


@pytest.mark.parametrize("count", [0, -1, 1.5, True])
def test_bad_count_rejected(count):
    with pytest.raises(GraphError):
        DependenceGraph().add_dependence("A", "B", "mm", count)


def test_example_counts(extracted_example):
    assert extracted_example.counts("A", "B").as_tuple() == (1, 0, 2, 0)
    assert extracted_example.edge_weight("A", "B") == 3
    assert extracted_example.counts("A", "D").as_tuple() == (0, 1, 1, 3)
    assert extracted_example.edge_weight("A", "D") == 5


def test_edge_weight_modes():
    g = DependenceGraph()
    g.add_node("A")
    g.add_node("B")
    g.set_counts("A", "B", DependenceCounts(0, 1, 1, 3))
    assert g.edge_weight("A", "B") == 5
    assert g.with_weighting("empirical").edge_weight("A", "B") == 3 * 0 + 3 * 1 + 2 * 1 + 4 * 3
    assert g.edge_weight("B", "A") == 0


def test_edge_weight_unknown_node():
    g = DependenceGraph()
    g.add_node("A")
    with pytest.raises(UnknownNodeError):
        g.edge_weight("A", "Z")


def test_back_recommendation_single_edge():
    g = DependenceGraph("back_recommendation", 0.5)
    g.add_dependence("A", "B", "mm", 3)
    w = g.weight_matrix()
    assert w.get("A", "B") == 3
    assert w.get("B", "A") == 1.5


def test_back_recommendation_symmetric_pair():
    g = DependenceGraph("back_recommendation", 0.5)
    g.add_dependence("A", "B", "mm", 2)
    g.add_dependence("B", "A", "mm", 2)
    w = g.weight_matrix()
    assert w.get("A", "B") == w.get("B", "A") == 3


def test_empirical_then_back():
    g = DependenceGraph("empirical_plus_back", 0.5)
    g.add_dependence("A", "B", "ca", 1)
    w = g.weight_matrix()
    assert w.get("A", "B") == 3
    assert w.get("B", "A") == 1.5


def test_edgeless_matrix_is_zero():
    g = DependenceGraph("back_recommendation")
    for name in "XYZ":
        g.add_node(name)
    assert not g.weight_matrix().toarray().any()


def test_example_edges(extracted_example):
    assert extracted_example.out_edges("A") == {"B": 3, "C": 3, "D": 5}
    assert extracted_example.total_out_weight("A") == 11
    assert extracted_example.total_out_weight("B") == 2
    assert extracted_example.in_edges("B") == {"A": 3, "C": 1, "D": 1}
    w = extracted_example.weight_matrix()
    assert w.out_edges("A") == {"B": 3, "C": 3, "D": 5}
    assert w.in_edges("B") == {"A": 3, "C": 1, "D": 1}
    assert w.total_out_weight("A") == 11


def test_isolated_node():
    g = DependenceGraph()
    g.add_node("Lonely", "interface")
    assert g.in_edges("Lonely") == {} and g.out_edges("Lonely") == {}
    assert g.total_out_weight("Lonely") == 0
    assert g.weight_matrix().total_out_weight("Lonely") == 0


def test_in_edges_unknown_node():
    with pytest.raises(UnknownNodeError):
        DependenceGraph().in_edges("nope")
    with pytest.raises(UnknownNodeError):
        WeightMatrix.from_dense(["A"], [[0]]).out_edges("nope")


def test_back_edges_show_up_in_adjacency():
    g = DependenceGraph("back_recommendation", 0.5)
    g.add_dependence("A", "B", "mm", 4)
    assert g.out_edges("B") == {"A": 2.0}
    assert g.in_edges("A") == {"B": 2.0}


# properties

names = st.sampled_from(list("ABCDEF"))
count_strategy = st.tuples(st.integers(0, 1), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4))


@st.composite
def graphs(draw, modes=("uniform", "empirical", "back_recommendation", "empirical_plus_back")):
    mode = draw(st.sampled_from(modes))
    fraction = draw(st.sampled_from([0.0, 0.25, 0.5, 1.0]))
    g = DependenceGraph(mode, fraction)
    nodes = draw(st.lists(names, min_size=1, max_size=6, unique=True))
    for n in nodes:
        g.add_node(n, draw(st.sampled_from(["class", "interface"])))
    for u in nodes:
        for v in nodes:
            if u != v and draw(st.booleans()):
                counts = draw(count_strategy)
                if sum(counts):
                    g.set_counts(u, v, DependenceCounts(*counts))
    return g


@settings(max_examples=100, deadline=None)
@given(graphs(modes=("uniform",)))
def test_uniform_edges_positive_and_summed(g):
    for (u, v), counts in g.edges.items():
        assert g.edge_weight(u, v) == counts.total() > 0


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_zero_back_fraction_matches_forward(g):
    empirical = g.weight_mode.startswith("empirical")
    forward = g.with_weighting("empirical" if empirical else "uniform").weight_matrix()
    zero = g.with_weighting("empirical_plus_back" if empirical else "back_recommendation", 0.0)
    assert np.array_equal(zero.weight_matrix().toarray(), forward.toarray())


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_in_out_duality(g):
    w = g.weight_matrix()
    for u in g.nodes:
        for v, weight in g.in_edges(u).items():
            assert g.out_edges(v)[u] == weight
            assert w.out_edges(v)[u] == pytest.approx(weight, abs=0)
        for v, weight in w.in_edges(u).items():
            assert w.out_edges(v)[u] == weight


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_total_out_weight_by_summation(g):
    w = g.weight_matrix()
    dense = w.toarray()
    for v in g.nodes:
        manual = 0.0
        for u in g.nodes:
            manual += g.edge_weight(v, u)
        assert g.total_out_weight(v) == pytest.approx(manual)
        assert w.total_out_weight(v) == pytest.approx(dense[w.index[v]].sum())


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_back_weight_lower_bound(g):
    if "back" not in g.weight_mode:
        return
    w = g.weight_matrix()
    forward = g.with_weighting("empirical" if g.weight_mode.startswith("empirical") else "uniform")
    for (u, v) in g.edges:
        assert w.get(v, u) >= g.back_fraction * forward.edge_weight(u, v)


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_serialization_round_trip(g):
    text = serialize(g)
    back = deserialize(text)
    assert back == g
    assert serialize(back) == text


# file format

def test_example_round_trip(extracted_example):
    back = deserialize(serialize(extracted_example).encode())
    assert len(back.nodes) == 4
    assert len(back.edges) == 8
    assert back == extracted_example
    assert back.nodes["C"] == "interface"


def test_empty_graph_round_trip():
    g = deserialize("#docrank-graph v1\n")
    assert len(g) == 0
    assert serialize(g) == "#docrank-graph v1\n"


def test_canonical_form_sorts_and_drops_comments():
    text = ("#docrank-graph v1\n# a comment\n"
            "N\tZ\tclass\nN\tA\tinterface\n"
            "E\tZ\tA\t1\t0\t0\t2\n")
    g = deserialize(text)
    assert serialize(g) == "#docrank-graph v1\nN\tA\tinterface\nN\tZ\tclass\nE\tZ\tA\t1\t0\t0\t2\n"


def test_weighting_line_round_trips():
    g = DependenceGraph("empirical_plus_back", 0.25)
    g.add_dependence("A", "B", "mm")
    back = deserialize(serialize(g))
    assert back.weight_mode == "empirical_plus_back" and back.back_fraction == 0.25


@pytest.mark.parametrize("text, line, field", [
    ("N\tA\tclass\n", 1, "header"),
    ("#docrank-graph v1\nN\tA\n", 2, "N"),
    ("#docrank-graph v1\nN\tA\tstruct\n", 2, "kind"),
    ("#docrank-graph v1\nN\tA\tclass\nN\tB\tclass\nE\tA\tB\t0\tx\t0\t0\n", 4, "ca"),
    ("#docrank-graph v1\nN\tA\tclass\nE\tA\tB\t0\t1\t0\t0\n", 3, "target"),
    ("#docrank-graph v1\nN\tA\tclass\nN\tB\tclass\nE\tA\tB\t2\t0\t0\t0\n", 4, "ci"),
    ("#docrank-graph v1\nN\tA\tclass\nN\tB\tclass\nE\tA\tB\t0\t0\t0\t0\n", 4, "E"),
    ("#docrank-graph v1\nX\tA\n", 2, "tag"),
])
def test_malformed_files(text, line, field):
    with pytest.raises(GraphFormatError) as info:
        deserialize(text)
    assert info.value.line == line
    assert info.value.field == field


def test_duplicate_edge_line():
    text = ("#docrank-graph v1\nN\tA\tclass\nN\tB\tclass\n"
            "E\tA\tB\t0\t1\t0\t0\nE\tA\tB\t0\t0\t1\t0\n")
    with pytest.raises(GraphFormatError, match="duplicate edge") as info:
        deserialize(text)
    assert info.value.line == 5
