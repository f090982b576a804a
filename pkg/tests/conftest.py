"""Shared fixtures and independent oracles used across the suite."""

import numpy as np
import pytest

from htscan import GateKind, from_edges, parse_netlist

HALF_ADDER_SRC = """module half_adder (a, b, s, c);
  input a, b;
  output s, c;
  XOR x1 (s, a, b);
  AND a1 (c, a, b);
endmodule
"""

FULL_ADDER_SRC = """module full_adder (a, b, cin, sum, cout);
  input a, b, cin;
  output sum, cout;
  wire w1, w2, w3;
  XOR x1 (w1, a, b);
  XOR x2 (sum, w1, cin);
  AND a1 (w2, a, b);
  AND a2 (w3, w1, cin);
  OR o1 (cout, w2, w3);
endmodule
"""

# Hand enumeration over the full adder's nets (the build_graph oracle).
# Node order: ports a=0, b=1, cin=2, sum=3, cout=4; gates x1=5, x2=6,
# a1=7, a2=8, o1=9.
FULL_ADDER_EDGES = {
    (0, 5), (0, 7),  # a -> x1, a1
    (1, 5), (1, 7),  # b -> x1, a1
    (2, 6), (2, 8),  # cin -> x2, a2
    (5, 6), (5, 8),  # w1 -> x2, a2
    (7, 9), (8, 9),  # w2, w3 -> o1
    (6, 3),          # sum net -> sum port
    (9, 4),          # cout net -> cout port
}


@pytest.fixture
def half_adder():
    return parse_netlist(HALF_ADDER_SRC)


@pytest.fixture
def full_adder():
    return parse_netlist(FULL_ADDER_SRC)


def random_graph(n, n_edges, seed, kinds=None):
    """Random simple directed graph as a CircuitGraph (synthetic nodes)."""
    rng = np.random.default_rng(seed)
    all_kinds = list(GateKind)
    edges = set()
    attempts = 0
    while len(edges) < n_edges and attempts < 20 * n_edges:
        a, b = rng.integers(n), rng.integers(n)
        attempts += 1
        if a != b:
            edges.add((int(a), int(b)))
    if kinds is None:
        kinds = [all_kinds[int(rng.integers(len(all_kinds)))] for _ in range(n)]
    return from_edges(kinds, sorted(edges))


def fnv1a64_reference(text):
    """Independent FNV-1a oracle (kept separate from the library's copy)."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def eval_gate(kind, ins):
    """Boolean gate semantics for the simulation oracle."""
    if kind is GateKind.AND:
        return all(ins)
    if kind is GateKind.NAND:
        return not all(ins)
    if kind is GateKind.OR:
        return any(ins)
    if kind is GateKind.NOR:
        return not any(ins)
    if kind is GateKind.XOR:
        return sum(ins) % 2 == 1
    if kind is GateKind.XNOR:
        return sum(ins) % 2 == 0
    if kind is GateKind.NOT:
        return not ins[0]
    if kind is GateKind.BUF:
        return ins[0]
    if kind is GateKind.MUX2:
        return ins[1] if ins[2] else ins[0]
    if kind is GateKind.CONST0:
        return False
    if kind is GateKind.CONST1:
        return True
    raise ValueError(kind)


def eval_combinational(instances, forced):
    """Evaluate gates given forced net values; returns net -> bool."""
    values = dict(forced)
    pending = list(instances)
    progress = True
    while pending and progress:
        progress = False
        remaining = []
        for inst in pending:
            if all(net in values for net in inst.inputs):
                values[inst.output] = eval_gate(inst.kind, [values[n] for n in inst.inputs])
                progress = True
            else:
                remaining.append(inst)
        pending = remaining
    if pending:
        raise RuntimeError(f"unresolvable gates: {[g.id for g in pending]}")
    return values
