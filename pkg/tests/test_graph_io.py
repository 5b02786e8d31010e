import json

import pytest
from hypothesis import given, settings, strategies as st

from cjarl.errors import (
    AnnotationError,
    DanglingArc,
    DuplicateArc,
    DuplicateVertexId,
    InfeasibleShape,
    MalformedLine,
    ScoreOutOfRange,
    SelfLoop,
    UnknownVertex,
    UnknownVertexInPath,
)
from cjarl.graph_io import (
    DEFAULT_ANNOTATION,
    Complexity,
    Service,
    emit_dot,
    generate_synthetic,
    load_graph_dir,
    parse_graph,
    serialize_graph,
    write_graph_dir,
)
from cjarl.path import AttackPath

from helpers import make_graph

VERTS = '1,"execCode(web,root)","OR"\n2,"RULE 1 (Exploit active session)","AND"\n'
ANN = json.dumps({"vertices": {"2": {"base": 7.5, "exploitability": 3.9, "complexity": "LOW"}}})


def test_parse_minimal():
    g = parse_graph(VERTS, "1,2\n", ANN)
    assert len(g.vertices) == 2 and len(g.edges) == 1
    assert g.vertices[1].label == "execCode(web,root)"
    assert g.vertices[2].annotation.base_score == 7.5
    assert g.vertices[2].annotation.attack_complexity is Complexity.LOW


def test_dangling_arc():
    with pytest.raises(DanglingArc) as info:
        parse_graph(VERTS, "1,99\n", ANN)
    assert (info.value.src, info.value.dst) == (1, 99)


def test_score_out_of_range():
    bad = json.dumps({"vertices": {"2": {"base": 11.0, "exploitability": 3.9, "complexity": "LOW"}}})
    with pytest.raises(ScoreOutOfRange):
        parse_graph(VERTS, "1,2\n", bad)


@pytest.mark.parametrize(
    "verts,arcs,exc",
    [
        (VERTS + '1,"dup","OR"\n', "1,2\n", DuplicateVertexId),
        (VERTS, "1,1\n", SelfLoop),
        (VERTS, "1,2\n1,2\n", DuplicateArc),
        (VERTS, "1;2\n", MalformedLine),
        ('1,"a","XOR"\n', "", MalformedLine),
        ('0,"a","OR"\n', "", MalformedLine),
    ],
)
def test_rejects_bad_input(verts, arcs, exc):
    with pytest.raises(exc):
        parse_graph(verts, arcs, "{}")


def test_malformed_line_number_skips_comments():
    with pytest.raises(MalformedLine) as info:
        parse_graph(VERTS, "# header\n1,2\n\nnot,an,arc\n", ANN)
    assert info.value.line_no == 4


def test_crlf_and_comments():
    g = parse_graph("# v\r\n" + VERTS.replace("\n", "\r\n"), "#a\r\n1,2\r\n", ANN)
    assert len(g.vertices) == 2 and len(g.edges) == 1


def test_default_annotation_only_on_vertices_with_out_edges(caplog):
    g = parse_graph(VERTS + '3,"sink","LEAF"\n', "1,2\n", "{}")
    assert g.vertices[1].annotation == DEFAULT_ANNOTATION
    assert g.vertices[2].annotation is None and g.vertices[3].annotation is None
    assert "lack CVSS annotations" in caplog.text


def test_annotation_errors():
    with pytest.raises(UnknownVertex):
        parse_graph(VERTS, "1,2\n", json.dumps({"crown_jewels": [7]}))
    with pytest.raises(UnknownVertex):
        parse_graph(VERTS, "1,2\n", json.dumps({"vertices": {"9": {"base": 1, "exploitability": 1, "complexity": "LOW"}}}))
    with pytest.raises(AnnotationError):
        parse_graph(VERTS, "1,2\n", json.dumps({"vertices": {"2": {"base": 1, "exploitability": 1, "complexity": "EASY"}}}))
    with pytest.raises(DanglingArc):
        parse_graph(VERTS, "1,2\n", json.dumps({"edges": [{"src": 2, "dst": 1, "firewall": True, "service": "SSH"}]}))


def test_edge_terrain_parsed():
    ann = json.dumps({"edges": [{"src": 1, "dst": 2, "firewall": True, "service": "SSH"}], "crown_jewels": [2],
                      "initial_candidates": [1]})
    g = parse_graph(VERTS, "1,2\n", ann)
    assert g.edges[0].firewall and g.edges[0].service is Service.SSH
    assert g.crown_jewels == {2} and g.candidate_initial_nodes == {1}


def test_edge_count_equals_arc_lines():
    verts = "".join(f'{i},"v{i}","OR"\n' for i in range(1, 7))
    arcs = "# arcs\n1,2\n2,3\n# mid\n3,4\n4,5\n5,6\n1,6\n"
    g = parse_graph(verts, arcs, "{}")
    assert len(g.edges) == sum(1 for line in arcs.splitlines() if line and not line.startswith("#"))


def test_generate_full_scale():
    g = generate_synthetic(1617, 4331, 6, seed=42)
    assert len(g.vertices) == 1617 and len(g.edges) == 4331


def test_generate_deterministic():
    assert generate_synthetic(5, 4, 1, seed=7) == generate_synthetic(5, 4, 1, seed=7)
    assert serialize_graph(generate_synthetic(40, 90, 3, 1)) == serialize_graph(generate_synthetic(40, 90, 3, 1))


@pytest.mark.parametrize("shape", [(5, 3, 1), (10, 5, 1), (3, 2, 4), (4, 7, 1)])
def test_generate_infeasible(shape):
    with pytest.raises(InfeasibleShape):
        generate_synthetic(*shape, seed=0)


def test_generate_structure():
    g = generate_synthetic(120, 300, 4, seed=3)
    bridges = [e for e in g.edges if e.firewall]
    assert bridges and all(e.service is not Service.NONE for e in bridges)
    assert all(e.service is Service.NONE for e in g.edges if not e.firewall)
    # acyclic: repeatedly strip sources
    indeg = {v: len(g.predecessors[v]) for v in g.vertices}
    queue = [v for v, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for n in g.successors[v]:
            indeg[n] -= 1
            if indeg[n] == 0:
                queue.append(n)
    assert seen == len(g.vertices)
    assert len(g.crown_jewels) == 1 and len(g.candidate_initial_nodes) == 5


def test_dense_generation_uses_fallback():
    g = generate_synthetic(8, 28, 2, seed=5)
    assert len(g.edges) == 28


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 40),
    extra=st.integers(0, 60),
    subnets=st.integers(1, 5),
    seed=st.integers(-(2**63), 2**63 - 1),
)
def test_round_trip(n, extra, subnets, seed):
    subnets = min(subnets, n)
    m = min(n - 1 + extra, n * (n - 1) // 2)
    g = generate_synthetic(n, m, subnets, seed)
    assert parse_graph(*serialize_graph(g)) == g


def test_round_trip_through_files(tmp_path):
    g = make_graph([(1, 2), (2, 3)], firewalls={(1, 2): "HTTP"}, crown_jewels=[3], initial=[1])
    g = g.__class__(
        {**g.vertices, 4: g.vertices[1].__class__(4, 'label with "quotes", commas', "LEAF")},
        g.edges, g.crown_jewels, g.candidate_initial_nodes,
    )
    write_graph_dir(g, tmp_path)
    assert load_graph_dir(tmp_path) == g


def test_dot_plain():
    g = make_graph([(1, 2)])
    dot = emit_dot(g, [])
    assert dot.startswith("digraph") and "  1 [" in dot and "  2 [" in dot and "1 -> 2;" in dot


def test_dot_highlight():
    g = make_graph([(1, 2)], crown_jewels=[2], initial=[1])
    dot = emit_dot(g, [AttackPath(1, 2, (1, 2), 10.0)])
    edge_line = next(line for line in dot.splitlines() if "1 -> 2" in line)
    assert "highlight=true" in edge_line and "color=red" in edge_line
    assert 'role="crown_jewel"' in dot and 'role="initial"' in dot


def test_dot_unknown_vertex():
    with pytest.raises(UnknownVertexInPath) as info:
        emit_dot(make_graph([(1, 2)]), [[1, 99]])
    assert info.value.vertex_id == 99
