"""Project graph construction, ordering, and call-tree expansion."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depalign import (
    DependencyGraph,
    build_call_tree,
    build_project_graph,
    enumerate_roots,
    function_table,
    parse_file,
    render_tree_text,
    strongly_connected_components,
    topological_order,
)
from depalign.depgraph import graph_from_dict
from depalign.errors import RootNotFound

from conftest import repo_graph
from oracles import GRAPHS, TREES, to_shape


@pytest.mark.parametrize("repo_id", sorted(GRAPHS))
def test_graph_matches_oracle(repo_id):
    graph = repo_graph(repo_id)
    expected = GRAPHS[repo_id]
    assert set(graph.nodes) == expected["nodes"]
    assert set(graph.edges) == expected["edges"]
    assert set(graph.self_recursive) == expected["self_recursive"]
    assert graph.unresolved_count == expected["unresolved"]
    assert enumerate_roots(graph) == expected["roots"]


@pytest.mark.parametrize("repo_id", sorted(TREES))
def test_trees_match_oracle(repo_id):
    graph = repo_graph(repo_id)
    for root, (shape, depth) in TREES[repo_id].items():
        tree = build_call_tree(graph, root)
        assert to_shape(tree) == shape
        assert tree.depth == depth


def test_unknown_root_raises():
    graph = repo_graph("direct_chain")
    with pytest.raises(RootNotFound):
        build_call_tree(graph, "app.nowhere")


def test_docstring_ref_only_at_top():
    graph = repo_graph("direct_chain")
    tree = build_call_tree(graph, "app.top", docstring_ref="Entry point.")
    assert tree.docstring_ref == "Entry point."
    assert all(c.docstring_ref is None for c in tree.children)


def test_function_table_last_file_wins():
    """'a.b.py' and 'a/b.py' both map to module a.b; later path wins."""
    flat = parse_file("def f():\n    return 1\n", "a.b.py")
    nested = parse_file("def f():\n    return 2\n", "a/b.py")
    table = function_table([nested, flat])
    assert table["a.b.f"].body_text == "def f():\n    return 2\n"


def test_topological_order_diamond():
    assert topological_order(repo_graph("diamond")) == [
        "graph.a",
        "graph.b",
        "graph.c",
        "graph.d",
    ]


def test_topological_order_deep_wide():
    """Ready set is drained smallest-name-first."""
    assert topological_order(repo_graph("deep_wide")) == [
        "pipeline.fan",
        "pipeline.w1",
        "pipeline.stage_a",
        "pipeline.stage_b",
        "pipeline.stage_c",
        "pipeline.w2",
        "pipeline.w3",
        "pipeline.w4",
        "pipeline.w5",
    ]


def test_cycle_flattens_to_sorted_block():
    graph = repo_graph("mutual_recursion")
    assert topological_order(graph) == ["parity.is_even", "parity.is_odd"]
    assert strongly_connected_components(graph) == (
        frozenset({"parity.is_even", "parity.is_odd"}),
    )


def test_render_tree_text():
    graph = repo_graph("mutual_recursion")
    rendered = render_tree_text(build_call_tree(graph, "parity.is_even"))
    assert rendered == (
        "parity.is_even\n"
        "  parity.is_odd\n"
        "    parity.is_even [recursion]"
    )
    solo = build_call_tree(repo_graph("self_recursive"), "fact.fact")
    assert render_tree_text(solo) == "fact.fact [recursion]"


def test_successors_lists_are_sorted():
    succ = repo_graph("deep_wide").successors()
    assert succ["pipeline.fan"] == [
        "pipeline.w1",
        "pipeline.w2",
        "pipeline.w3",
        "pipeline.w4",
        "pipeline.w5",
    ]


def test_graph_dict_round_trip():
    for repo_id in sorted(GRAPHS):
        graph = repo_graph(repo_id)
        assert graph_from_dict(graph.to_dict()) == graph


def test_self_edge_stays_out_of_edge_set():
    graph = repo_graph("self_recursive")
    assert graph.edges == frozenset()
    assert graph.self_recursive == frozenset({"fact.fact"})


_NAMES = [f"n{i}" for i in range(7)]


@st.composite
def _graphs(draw):
    size = draw(st.integers(min_value=2, max_value=7))
    nodes = _NAMES[:size]
    pairs = st.tuples(st.sampled_from(nodes), st.sampled_from(nodes))
    chosen = draw(st.lists(pairs, max_size=14))
    return DependencyGraph(
        nodes=frozenset(nodes),
        edges=frozenset((a, b) for a, b in chosen if a != b),
        self_recursive=frozenset(a for a, b in chosen if a == b),
        unresolved_count=0,
    )


@settings(max_examples=60, deadline=None)
@given(_graphs())
def test_ordering_properties(graph):
    topo = topological_order(graph)
    assert sorted(topo) == sorted(graph.nodes)
    assert topo == topological_order(graph)

    sccs = strongly_connected_components(graph)
    seen = [n for comp in sccs for n in comp]
    assert sorted(seen) == sorted(graph.nodes)

    comp_of = {n: i for i, comp in enumerate(sccs) for n in comp}
    position = {n: i for i, n in enumerate(topo)}
    for caller, callee in graph.edges:
        if comp_of[caller] != comp_of[callee]:
            assert comp_of[caller] < comp_of[callee]
            assert position[caller] < position[callee]


def _check_tree(node, ancestors):
    names = [c.root for c in node.children]
    assert names == sorted(names)
    if node.root in ancestors:
        # a repeat on the path must be a childless marker
        assert node.recursion_marker
        assert node.children == ()
        return 1
    depths = [
        _check_tree(c, ancestors | {node.root}) for c in node.children
    ]
    assert node.depth == 1 + max(depths, default=0)
    return node.depth


@settings(max_examples=60, deadline=None)
@given(_graphs())
def test_tree_expansion_properties(graph):
    for root in enumerate_roots(graph):
        tree = build_call_tree(graph, root)
        assert tree == build_call_tree(graph, root)
        _check_tree(tree, frozenset())
        if root in graph.self_recursive:
            assert tree.recursion_marker
