"""Circuit graph construction and queries.

Gates and ports become nodes; every driver->sink wire connection becomes a
directed edge. Node numbering is deterministic: input ports in declaration
order, then output ports, then gate instances in textual order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidNetlistError, NodeOutOfRangeError
from .netlist import GateKind, Netlist, validate

#: Fill colors for prediction categories in DOT exports.
CATEGORY_COLORS = {
    "tp": "blue",
    "tn": "red",
    "fp": "pink",
    "fn": "green",
    "nn1": "yellow",
}
_DEFAULT_COLOR = "lightgray"


@dataclass(frozen=True, eq=False)
class CircuitGraph:
    kinds: tuple[GateKind, ...]
    refs: tuple[str, ...]
    lines: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]  # one entry per (driver, sink, pin)
    in_adj: tuple[tuple[int, ...], ...]
    out_adj: tuple[tuple[int, ...], ...]
    und_src: np.ndarray  # deduplicated adjacency, both directions
    und_dst: np.ndarray
    ref_index: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.kinds)

    def node_of(self, ref: str) -> int:
        return self.ref_index[ref]


def _assemble(kinds, refs, lines, edges) -> CircuitGraph:
    n = len(kinds)
    in_sets = [set() for _ in range(n)]
    out_sets = [set() for _ in range(n)]
    for src, dst in edges:
        out_sets[src].add(dst)
        in_sets[dst].add(src)
    in_adj = tuple(tuple(sorted(s)) for s in in_sets)
    out_adj = tuple(tuple(sorted(s)) for s in out_sets)
    if edges:
        uniq = sorted({(s, d) for s, d in edges})
        src = np.fromiter((e[0] for e in uniq), dtype=np.int64, count=len(uniq))
        dst = np.fromiter((e[1] for e in uniq), dtype=np.int64, count=len(uniq))
        und_src = np.concatenate([src, dst])
        und_dst = np.concatenate([dst, src])
    else:
        und_src = np.empty(0, dtype=np.int64)
        und_dst = np.empty(0, dtype=np.int64)
    return CircuitGraph(
        kinds=tuple(kinds),
        refs=tuple(refs),
        lines=tuple(lines),
        edges=tuple(edges),
        in_adj=in_adj,
        out_adj=out_adj,
        und_src=und_src,
        und_dst=und_dst,
        ref_index={r: i for i, r in enumerate(refs)},
    )


def from_edges(kinds, edges, refs=None, lines=None) -> CircuitGraph:
    """Build a graph directly from node kinds and directed edge pairs
    (synthetic graphs for experiments and tests)."""
    n = len(kinds)
    if refs is None:
        refs = tuple(f"n{i}" for i in range(n))
    if lines is None:
        lines = tuple(i + 1 for i in range(n))
    for s, d in edges:
        if not (0 <= s < n and 0 <= d < n):
            raise NodeOutOfRangeError(s if not 0 <= s < n else d, n)
    return _assemble(tuple(kinds), tuple(refs), tuple(lines), tuple(edges))


def build_graph(netlist: Netlist) -> CircuitGraph:
    """Convert a flat, valid netlist into its circuit graph."""
    diags = validate(netlist)
    if diags or not netlist.is_flat:
        if not netlist.is_flat:
            from .netlist import Diagnostic

            diags = [Diagnostic("NotFlat", netlist.name, "netlist contains submodules")] + diags
        raise InvalidNetlistError(diags)

    kinds: list[GateKind] = []
    refs: list[str] = []
    lines: list[int] = []
    node_id: dict[str, int] = {}

    for p in netlist.input_ports:
        node_id[p] = len(kinds)
        kinds.append(GateKind.INPUT_PORT)
        refs.append(p)
        lines.append(netlist.port_lines.get(p, 0))
    for p in netlist.output_ports:
        node_id[p] = len(kinds)
        kinds.append(GateKind.OUTPUT_PORT)
        refs.append(p)
        lines.append(netlist.port_lines.get(p, 0))
    for inst in netlist.instances:
        node_id[inst.id] = len(kinds)
        kinds.append(inst.kind)
        refs.append(inst.id)
        lines.append(inst.source_line)

    driver: dict[str, int] = {p: node_id[p] for p in netlist.input_ports}
    for inst in netlist.instances:
        driver[inst.output] = node_id[inst.id]

    edges: list[tuple[int, int]] = []
    for inst in netlist.instances:
        for net in inst.inputs:
            edges.append((driver[net], node_id[inst.id]))
    for p in netlist.output_ports:
        edges.append((driver[p], node_id[p]))

    return _assemble(kinds, refs, lines, edges)


def neighbours(graph: CircuitGraph, node: int, direction: str = "both") -> list[int]:
    """Distinct adjacent node ids, sorted ascending."""
    if not 0 <= node < graph.n:
        raise NodeOutOfRangeError(node, graph.n)
    if direction == "in":
        return list(graph.in_adj[node])
    if direction == "out":
        return list(graph.out_adj[node])
    if direction == "both":
        return sorted(set(graph.in_adj[node]) | set(graph.out_adj[node]))
    raise ValueError(f"direction must be 'in', 'out' or 'both', got {direction!r}")


def source_of(graph: CircuitGraph, node: int) -> tuple[str, int]:
    """Originating instance/port name and its source line."""
    if not 0 <= node < graph.n:
        raise NodeOutOfRangeError(node, graph.n)
    return graph.refs[node], graph.lines[node]


def to_dot(graph: CircuitGraph, categories: dict | None = None) -> str:
    """DOT rendering with category fill colors (tp=blue, tn=red, fp=pink,
    fn=green, nn1=yellow); uncategorized nodes stay lightgray."""
    categories = categories or {}
    for node in categories:
        if not 0 <= node < graph.n:
            raise NodeOutOfRangeError(node, graph.n)
    out = ["digraph circuit {", "  rankdir=LR;", f'  node [style=filled, fillcolor={_DEFAULT_COLOR}];']
    for i in range(graph.n):
        color = CATEGORY_COLORS.get(str(categories.get(i, "")).lower(), _DEFAULT_COLOR)
        label = f"{graph.refs[i]}\\n{graph.kinds[i].value}"
        out.append(f'  n{i} [label="{label}", fillcolor={color}];')
    seen = set()
    for s, d in graph.edges:
        if (s, d) not in seen:
            seen.add((s, d))
            out.append(f"  n{s} -> n{d};")
    out.append("}")
    return "\n".join(out) + "\n"


def graph_to_json(graph: CircuitGraph) -> dict:
    return {
        "nodes": [
            {"id": i, "kind": graph.kinds[i].value, "ref": graph.refs[i], "line": graph.lines[i]}
            for i in range(graph.n)
        ],
        "edges": [[s, d] for s, d in graph.edges],
    }
