import numpy as np
import pytest

from htscan import (
    GateKind,
    build_graph,
    flatten,
    from_edges,
    graph_to_json,
    neighbours,
    parse_netlist,
    source_of,
    to_dot,
)
from htscan.benchgen import gen_clean
from htscan.errors import InvalidNetlistError, NodeOutOfRangeError

from conftest import FULL_ADDER_EDGES, random_graph


class TestBuild:
    def test_single_port_no_gates(self):
        g = build_graph(parse_netlist("module m (p);\ninput p;\nendmodule"))
        assert g.n == 1 and g.edges == ()
        assert g.kinds == (GateKind.INPUT_PORT,)

    def test_half_adder_edges(self, half_adder):
        g = build_graph(half_adder)
        assert g.n == 6
        # oracle: brute force over the net connection lists
        # ports a=0 b=1 s=2 c=3; gates x1=4 a1=5
        assert set(g.edges) == {(0, 4), (1, 4), (0, 5), (1, 5), (4, 2), (5, 3)}

    def test_full_adder_hand_enumeration(self, full_adder):
        g = build_graph(full_adder)
        assert g.n == 10
        assert set(g.edges) == FULL_ADDER_EDGES
        assert len(g.edges) == len(FULL_ADDER_EDGES) == 12

    def test_node_count_identity(self):
        for template, size in [("adder", 3), ("counter", 4), ("alu", 2), ("lfsr", 5)]:
            n = gen_clean(template, size, seed=1)
            g = build_graph(n)
            assert g.n == len(n.instances) + len(n.input_ports) + len(n.output_ports)

    def test_deterministic(self, full_adder):
        a, b = build_graph(full_adder), build_graph(full_adder)
        assert a.refs == b.refs and a.edges == b.edges and a.kinds == b.kinds

    def test_invalid_netlist_rejected(self):
        bad = parse_netlist("module m (a, y);\ninput a; output y;\nwire w;\nAND g (y, a, w);\nendmodule")
        with pytest.raises(InvalidNetlistError) as err:
            build_graph(bad)
        assert any(d.code == "FloatingInput" for d in err.value.diagnostics)

    def test_parallel_pins_single_adjacency(self):
        src = "module m (a, y);\ninput a; output y;\nXOR g (y, a, a);\nendmodule"
        g = build_graph(parse_netlist(src))
        # per-pin edges keep multiplicity, adjacency deduplicates
        assert g.edges.count((0, 2)) == 2
        assert g.in_adj[2] == (0,)

    def test_combinational_subgraph_acyclic(self):
        for template, size in [("counter", 4), ("lfsr", 5), ("adder", 3)]:
            g = build_graph(gen_clean(template, size, seed=3))
            # topological sort over edges not leaving a DFF
            succ = {i: [] for i in range(g.n)}
            indeg = dict.fromkeys(range(g.n), 0)
            for s, d in set(g.edges):
                if g.kinds[s] is not GateKind.DFF:
                    succ[s].append(d)
                    indeg[d] += 1
            queue = [i for i in range(g.n) if indeg[i] == 0]
            seen = 0
            while queue:
                u = queue.pop()
                seen += 1
                for v in succ[u]:
                    indeg[v] -= 1
                    if indeg[v] == 0:
                        queue.append(v)
            assert seen == g.n


class TestNeighbours:
    def test_isolated(self):
        g = from_edges([GateKind.AND], [])
        assert neighbours(g, 0, "both") == []

    def test_path_both(self):
        g = from_edges([GateKind.AND] * 3, [(0, 1), (1, 2)])
        assert neighbours(g, 1, "both") == [0, 2]
        assert neighbours(g, 1, "in") == [0]
        assert neighbours(g, 1, "out") == [2]

    def test_full_adder_sum_gate_inputs(self, full_adder):
        g = build_graph(full_adder)
        x2 = g.node_of("x2")
        assert neighbours(g, x2, "in") == sorted([g.node_of("cin"), g.node_of("x1")])

    def test_direction_symmetry(self):
        for seed in range(10):
            g = random_graph(30, 60, seed)
            for a in range(g.n):
                for b in neighbours(g, a, "out"):
                    assert a in neighbours(g, b, "in")

    def test_out_of_range(self):
        g = from_edges([GateKind.AND], [])
        with pytest.raises(NodeOutOfRangeError):
            neighbours(g, 1, "both")


class TestDotAndJson:
    def test_default_colors_and_shape(self, half_adder):
        g = build_graph(half_adder)
        dot = to_dot(g)
        assert dot.startswith("digraph circuit {") and dot.rstrip().endswith("}")
        assert dot.count("->") == len(set(g.edges))
        assert "fillcolor=lightgray" in dot

    def test_category_colors(self):
        g = from_edges([GateKind.AND] * 5, [(i, i + 1) for i in range(4)])
        dot = to_dot(g, {0: "tp", 1: "tn", 2: "fp", 3: "fn", 4: "nn1"})
        for color in ("blue", "red", "pink", "green", "yellow"):
            assert f"fillcolor={color}" in dot

    def test_single_false_negative_is_green(self):
        g = from_edges([GateKind.AND] * 5, [(i, i + 1) for i in range(4)])
        dot = to_dot(g, {2: "fn"})
        assert dot.count("fillcolor=green") == 1

    def test_json_schema(self, half_adder):
        g = build_graph(half_adder)
        doc = graph_to_json(g)
        assert {n["ref"] for n in doc["nodes"]} == {"a", "b", "s", "c", "x1", "a1"}
        assert sorted(map(tuple, doc["edges"])) == sorted(g.edges)
        assert all(set(n) == {"id", "kind", "ref", "line"} for n in doc["nodes"])


class TestSourceOf:
    def test_port_node(self, half_adder):
        g = build_graph(half_adder)
        assert source_of(g, 0) == ("a", 2)

    def test_gate_node(self, half_adder):
        g = build_graph(half_adder)
        assert source_of(g, g.node_of("x1")) == ("x1", 4)

    def test_out_of_range(self, half_adder):
        g = build_graph(half_adder)
        with pytest.raises(NodeOutOfRangeError):
            source_of(g, g.n)

    def test_total_on_valid_ids(self):
        g = build_graph(flatten(gen_clean("alu", 2, seed=0)))
        for i in range(g.n):
            ref, line = source_of(g, i)
            assert isinstance(ref, str) and line >= 0
