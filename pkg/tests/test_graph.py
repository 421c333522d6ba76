import pytest

from kbqg.graph import (
    AGG_RESULT,
    ENTITY,
    GraphError,
    LITERAL,
    Triple,
    VARIABLE,
    Vertex,
    build_graph,
    builtin,
    induced_subgraph,
    user,
)


def test_edge_label_needs_exactly_one_side():
    with pytest.raises(GraphError):
        from kbqg.graph import EdgeLabel
        EdgeLabel(builtin="COUNT", name=":p")
    with pytest.raises(GraphError):
        from kbqg.graph import EdgeLabel
        EdgeLabel()
    with pytest.raises(GraphError):
        builtin("NOPE")


def test_variable_must_not_carry_surface():
    with pytest.raises(GraphError):
        Vertex("?x", VARIABLE, "oops")
    with pytest.raises(GraphError):
        Vertex("e1", ENTITY, None)


def test_build_graph_rejects_unknown_vertex():
    with pytest.raises(GraphError):
        build_graph([Vertex("?x", VARIABLE)], [Triple("?x", user(":p"), "?y")])


def test_build_graph_rejects_empty_and_isolated():
    with pytest.raises(GraphError):
        build_graph([Vertex("?x", VARIABLE)], [])
    with pytest.raises(GraphError):
        build_graph([Vertex("?x", VARIABLE), Vertex("?y", VARIABLE),
                     Vertex("?z", VARIABLE)],
                    [Triple("?x", user(":p"), "?y")])


def test_duplicate_triples_are_dropped():
    g = build_graph([Vertex("?x", VARIABLE), Vertex("e", ENTITY, ":E")],
                    [Triple("?x", user(":p"), "e"), Triple("?x", user(":p"), "e")])
    assert g.triple_count == 1


def test_agg_result_kind_is_derived():
    verts = [Vertex("?x", VARIABLE), Vertex("?c", AGG_RESULT)]
    g = build_graph(verts, [Triple("?x", builtin("COUNT"), "?c")], "?c")
    assert g.kind_of("?c") == AGG_RESULT
    # declaring it a plain variable contradicts the COUNT triple
    with pytest.raises(GraphError):
        build_graph([Vertex("?x", VARIABLE), Vertex("?c", VARIABLE)],
                    [Triple("?x", builtin("COUNT"), "?c")])


def test_target_must_be_variable_like():
    verts = [Vertex("?x", VARIABLE), Vertex("e", ENTITY, ":E")]
    trips = [Triple("?x", user(":p"), "e")]
    with pytest.raises(GraphError):
        build_graph(verts, trips, "e")
    with pytest.raises(GraphError):
        build_graph(verts, trips, "?nope")


def test_connectivity():
    g = build_graph(
        [Vertex("?a", VARIABLE), Vertex("?b", VARIABLE), Vertex("?c", VARIABLE),
         Vertex("?d", VARIABLE)],
        [Triple("?a", user(":p"), "?b"), Triple("?c", user(":q"), "?d")])
    assert not g.is_connected()
    g2 = build_graph(
        [Vertex("?a", VARIABLE), Vertex("?b", VARIABLE), Vertex("?c", VARIABLE)],
        [Triple("?a", user(":p"), "?b"), Triple("?b", user(":q"), "?c")])
    assert g2.is_connected()


def test_induced_subgraph_rederives_kinds():
    verts = [Vertex("?x", VARIABLE), Vertex("?c", AGG_RESULT),
             Vertex("e", ENTITY, ":E")]
    trips = [Triple("?x", builtin("COUNT"), "?c"), Triple("?x", user(":p"), "e")]
    g = build_graph(verts, trips, "?c")
    sub = induced_subgraph(g, [trips[1]])
    assert sub.kind_of("?x") == VARIABLE
    assert "?c" not in sub.vertex_by_id
    assert sub.target is None  # target vertex dropped with its triple


def test_order_values_only_for_order_objects():
    verts = [Vertex("?x", VARIABLE), Vertex("?r", VARIABLE),
             Vertex("n", LITERAL, "2"), Vertex("e", ENTITY, ":E")]
    trips = [Triple("?x", user(":p"), "?r"), Triple("?r", builtin("MAXATN"), "n"),
             Triple("?x", user(":q"), "e")]
    g = build_graph(verts, trips, "?x")
    assert g.order_values == {"n": "2"}
    assert g.aggregation_count == 1
