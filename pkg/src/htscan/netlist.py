"""Parse, validate, flatten and re-emit structural gate-level netlists.

Supported grammar (one or more modules per file, `//` comments):

    module  ::= "module" NAME [ "(" [ NAME { "," NAME } ] ")" ] ";"
                decl* item* "endmodule"
    decl    ::= ("input" | "output" | "wire") NAME { "," NAME } ";"
    item    ::= gate | subinst
    gate    ::= GATEKIND NAME "(" NET { "," NET } ")" ";"   # first net = output
    subinst ::= NAME NAME "(" "." NAME "(" NET ")" { "," "." NAME "(" NET ")" } ")" ";"

Identifiers are [A-Za-z_][A-Za-z0-9_]* optionally extended with
/-separated segments (the flattening separator). Single-bit nets only;
vector/bus syntax is rejected. CONST0/CONST1 gates take no inputs, so
their net list is just the output net.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from .errors import (
    ArityError,
    HierarchyRecursionError,
    MultipleDriverError,
    NetlistSyntaxError,
    NotFlatError,
    UndeclaredNetError,
    UnknownModuleError,
    UnknownPortError,
)


class GateKind(enum.Enum):
    AND = "AND"
    NAND = "NAND"
    OR = "OR"
    NOR = "NOR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOT = "NOT"
    BUF = "BUF"
    MUX2 = "MUX2"
    DFF = "DFF"
    CONST0 = "CONST0"
    CONST1 = "CONST1"
    INPUT_PORT = "INPUT_PORT"
    OUTPUT_PORT = "OUTPUT_PORT"


#: Kinds that may appear as gate instances in source text.
INSTANTIABLE_KINDS = frozenset(
    k for k in GateKind if k not in (GateKind.INPUT_PORT, GateKind.OUTPUT_PORT)
)
_KIND_BY_NAME = {k.value: k for k in INSTANTIABLE_KINDS}

_MULTI_INPUT = frozenset(
    (GateKind.AND, GateKind.NAND, GateKind.OR, GateKind.NOR, GateKind.XOR, GateKind.XNOR)
)
_SINGLE_INPUT = frozenset((GateKind.NOT, GateKind.BUF, GateKind.DFF))
_CONST = frozenset((GateKind.CONST0, GateKind.CONST1))


def arity_ok(kind: GateKind, n_inputs: int) -> bool:
    if kind in _CONST:
        return n_inputs == 0
    if kind in _SINGLE_INPUT:
        return n_inputs == 1
    if kind is GateKind.MUX2:
        return n_inputs == 3
    if kind in _MULTI_INPUT:
        return n_inputs >= 2
    return False


@dataclass(frozen=True)
class GateInstance:
    id: str
    kind: GateKind
    inputs: tuple[str, ...]
    output: str
    source_line: int = 0


@dataclass(frozen=True)
class SubInstance:
    module: str
    id: str
    connections: tuple[tuple[str, str], ...]  # (child port, parent net)
    source_line: int = 0


@dataclass(frozen=True)
class Diagnostic:
    code: str
    subject: str
    message: str
    line: int = 0

    def __str__(self):
        return f"[{self.code}] {self.subject}: {self.message}"


@dataclass(frozen=True)
class Netlist:
    """A structural netlist; `items` preserves textual declaration order."""

    name: str
    input_ports: tuple[str, ...] = ()
    output_ports: tuple[str, ...] = ()
    wires: tuple[str, ...] = ()
    items: tuple = ()  # GateInstance | SubInstance, in source order
    hierarchy: dict = field(default_factory=dict)  # module name -> Netlist
    port_lines: dict = field(default_factory=dict)  # port name -> decl line

    @property
    def instances(self) -> tuple[GateInstance, ...]:
        return tuple(i for i in self.items if isinstance(i, GateInstance))

    @property
    def subinstances(self) -> tuple[SubInstance, ...]:
        return tuple(i for i in self.items if isinstance(i, SubInstance))

    @property
    def nets(self) -> frozenset[str]:
        return frozenset(self.input_ports) | frozenset(self.output_ports) | frozenset(self.wires)

    @property
    def is_flat(self) -> bool:
        return not self.hierarchy and not self.subinstances


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)"
    r"|(?P<comment>//[^\n]*)"
    r"|(?P<nl>\n)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*(?:/[A-Za-z0-9_]+)*)"
    r"|(?P<punct>[();,.])"
)

_KEYWORDS = frozenset(("module", "endmodule", "input", "output", "wire"))


def _tokenize(text: str):
    tokens = []
    line = 1
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            ch = text[pos]
            if ch in "[]":
                raise NetlistSyntaxError(line, ch, "vector/bus syntax is not supported")
            raise NetlistSyntaxError(line, ch, "unexpected character")
        kind = m.lastgroup
        if kind == "nl":
            line += 1
        elif kind in ("id", "punct"):
            tokens.append((m.group(), line))
        pos = m.end()
    return tokens


class _TokenStream:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return (None, self.tokens[-1][1] if self.tokens else 1)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, text, what=None):
        tok, line = self.next()
        if tok != text:
            raise NetlistSyntaxError(line, tok, f"expected {what or text!r}")
        return line

    def ident(self, what="identifier"):
        tok, line = self.next()
        if tok is None or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_/]*", tok) or tok in _KEYWORDS:
            raise NetlistSyntaxError(line, tok, f"expected {what}")
        return tok, line


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _parse_module(ts: _TokenStream) -> Netlist:
    ts.expect("module")
    name, _ = ts.ident("module name")

    portlist = []
    tok, _ = ts.peek()
    if tok == "(":
        ts.next()
        tok, _ = ts.peek()
        if tok != ")":
            while True:
                p, _ = ts.ident("port name")
                portlist.append(p)
                tok, line = ts.next()
                if tok == ")":
                    break
                if tok != ",":
                    raise NetlistSyntaxError(line, tok, "expected ',' or ')' in port list")
        else:
            ts.next()
    ts.expect(";")

    inputs: list[str] = []
    outputs: list[str] = []
    wires: list[str] = []
    port_lines: dict[str, int] = {}
    declared: set[str] = set()
    items: list = []
    ids_seen: set[str] = set()

    while True:
        tok, line = ts.peek()
        if tok is None:
            raise NetlistSyntaxError(line, tok, "unexpected end of file inside module")
        if tok == "endmodule":
            ts.next()
            break
        if tok in ("input", "output", "wire"):
            decl_kind = tok
            ts.next()
            while True:
                nm, nline = ts.ident("net name")
                if nm in declared:
                    raise NetlistSyntaxError(nline, nm, "net declared twice")
                declared.add(nm)
                if decl_kind == "input":
                    inputs.append(nm)
                    port_lines[nm] = nline
                elif decl_kind == "output":
                    outputs.append(nm)
                    port_lines[nm] = nline
                else:
                    wires.append(nm)
                sep, sline = ts.next()
                if sep == ";":
                    break
                if sep != ",":
                    raise NetlistSyntaxError(sline, sep, "expected ',' or ';' in declaration")
            continue

        # gate or submodule instantiation
        head, head_line = ts.ident("gate kind or module name")
        inst_name, iline = ts.ident("instance name")
        if inst_name in ids_seen:
            raise NetlistSyntaxError(iline, inst_name, "duplicate instance id")
        ids_seen.add(inst_name)
        ts.expect("(")

        if head in _KIND_BY_NAME:
            kind = _KIND_BY_NAME[head]
            nets = []
            while True:
                nm, nline = ts.ident("net name")
                if nm not in declared:
                    raise UndeclaredNetError(nm, nline)
                nets.append(nm)
                sep, sline = ts.next()
                if sep == ")":
                    break
                if sep != ",":
                    raise NetlistSyntaxError(sline, sep, "expected ',' or ')' in connection list")
            ts.expect(";")
            if not arity_ok(kind, len(nets) - 1):
                raise ArityError(inst_name, kind.value, len(nets) - 1, head_line)
            items.append(
                GateInstance(inst_name, kind, tuple(nets[1:]), nets[0], head_line)
            )
        else:
            conns = []
            ports_seen = set()
            while True:
                ts.expect(".")
                port, pline = ts.ident("port name")
                if port in ports_seen:
                    raise NetlistSyntaxError(pline, port, "port connected twice")
                ports_seen.add(port)
                ts.expect("(")
                net, nline = ts.ident("net name")
                if net not in declared:
                    raise UndeclaredNetError(net, nline)
                ts.expect(")")
                conns.append((port, net))
                sep, sline = ts.next()
                if sep == ")":
                    break
                if sep != ",":
                    raise NetlistSyntaxError(sline, sep, "expected ',' or ')' in connection list")
            ts.expect(";")
            items.append(SubInstance(head, inst_name, tuple(conns), head_line))

    if portlist and set(portlist) != set(inputs) | set(outputs):
        raise NetlistSyntaxError(
            port_lines.get(name, 1), name, "module port list does not match input/output declarations"
        )

    return Netlist(
        name=name,
        input_ports=tuple(inputs),
        output_ports=tuple(outputs),
        wires=tuple(wires),
        items=tuple(items),
        port_lines=port_lines,
    )


def _check_drivers(netlist: Netlist, hierarchy: dict):
    """Enforce the single-driver invariant; raises MultipleDriverError."""
    drivers: dict[str, int] = {p: 1 for p in netlist.input_ports}
    for item in netlist.items:
        if isinstance(item, GateInstance):
            drivers[item.output] = drivers.get(item.output, 0) + 1
        else:
            child = hierarchy.get(item.module)
            if child is None:
                continue  # flatten reports UnknownModule later
            child_outputs = set(child.output_ports)
            for port, net in item.connections:
                if port in child_outputs:
                    drivers[net] = drivers.get(net, 0) + 1
    for net, count in drivers.items():
        if count > 1:
            raise MultipleDriverError(net)


def parse_netlist(text: str, filename: str = "<netlist>") -> Netlist:
    """Parse netlist source. The first module is the top; any further
    modules in the file become its hierarchy map."""
    ts = _TokenStream(_tokenize(text))
    modules = []
    while ts.peek()[0] is not None:
        modules.append(_parse_module(ts))
    if not modules:
        raise NetlistSyntaxError(1, None, f"no module found in {filename}")

    hierarchy = {}
    for mod in modules[1:]:
        if mod.name in hierarchy or mod.name == modules[0].name:
            raise NetlistSyntaxError(1, mod.name, "module defined twice")
        hierarchy[mod.name] = mod

    top = modules[0]
    if hierarchy:
        top = Netlist(
            name=top.name,
            input_ports=top.input_ports,
            output_ports=top.output_ports,
            wires=top.wires,
            items=top.items,
            hierarchy=hierarchy,
            port_lines=top.port_lines,
        )
    for mod in modules:
        _check_drivers(mod, hierarchy)
    return top


# ---------------------------------------------------------------------------
# flattening
# ---------------------------------------------------------------------------


def _flatten_module(mod: Netlist, hierarchy: dict, memo: dict, stack: list) -> Netlist:
    if mod.name in memo:
        return memo[mod.name]
    if mod.name in stack:
        raise HierarchyRecursionError(stack[stack.index(mod.name):] + [mod.name])
    if mod.is_flat:
        memo[mod.name] = mod
        return mod

    stack.append(mod.name)
    new_items: list = []
    new_wires = list(mod.wires)
    for item in mod.items:
        if isinstance(item, GateInstance):
            new_items.append(item)
            continue
        child = hierarchy.get(item.module)
        if child is None:
            raise UnknownModuleError(item.module)
        child_flat = _flatten_module(child, hierarchy, memo, stack)

        child_ports = set(child_flat.input_ports) | set(child_flat.output_ports)
        net_map = {}
        for port, net in item.connections:
            if port not in child_ports:
                raise UnknownPortError(item.module, port)
            net_map[port] = net

        def mapped(net, prefix=item.id, table=net_map):
            if net in table:
                return table[net]
            return f"{prefix}/{net}"

        for net in sorted(child_flat.nets):
            if net not in net_map:
                new_wires.append(f"{item.id}/{net}")
        for gi in child_flat.instances:
            new_items.append(
                GateInstance(
                    id=f"{item.id}/{gi.id}",
                    kind=gi.kind,
                    inputs=tuple(mapped(n) for n in gi.inputs),
                    output=mapped(gi.output),
                    source_line=gi.source_line,
                )
            )
    stack.pop()

    flat = Netlist(
        name=mod.name,
        input_ports=mod.input_ports,
        output_ports=mod.output_ports,
        wires=tuple(new_wires),
        items=tuple(new_items),
        port_lines=mod.port_lines,
    )
    memo[mod.name] = flat
    return flat


def flatten(netlist: Netlist) -> Netlist:
    """Inline all submodule instantiations; child ids become `parent/child`."""
    if netlist.is_flat:
        return netlist
    lookup = dict(netlist.hierarchy)
    lookup.setdefault(netlist.name, netlist)  # cycles through the top resolve
    return _flatten_module(netlist, lookup, {}, [])


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def emit_netlist(netlist: Netlist) -> str:
    """Render a flat netlist in the canonical textual form. The result
    re-parses to a netlist structurally equal to the input."""
    if not netlist.is_flat:
        raise NotFlatError(f"module {netlist.name!r} still contains submodules")
    ports = list(netlist.input_ports) + list(netlist.output_ports)
    lines = []
    if ports:
        lines.append(f"module {netlist.name} ({', '.join(ports)});")
    else:
        lines.append(f"module {netlist.name};")
    for p in netlist.input_ports:
        lines.append(f"  input {p};")
    for p in netlist.output_ports:
        lines.append(f"  output {p};")
    for w in netlist.wires:
        lines.append(f"  wire {w};")
    for inst in netlist.instances:
        nets = ", ".join((inst.output,) + inst.inputs)
        lines.append(f"  {inst.kind.value} {inst.id} ({nets});")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def structurally_equal(a: Netlist, b: Netlist) -> bool:
    """Equality modulo source locations and wire declaration order."""
    if (a.name, a.input_ports, a.output_ports) != (b.name, b.input_ports, b.output_ports):
        return False
    if set(a.wires) != set(b.wires):
        return False
    ia, ib = a.instances, b.instances
    if len(ia) != len(ib):
        return False
    for x, y in zip(ia, ib):
        if (x.id, x.kind, x.inputs, x.output) != (y.id, y.kind, y.inputs, y.output):
            return False
    return a.is_flat == b.is_flat


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _pin_directions(item: SubInstance, hierarchy: dict):
    """Yield (net, is_driver) for a submodule instance, or None if unresolvable."""
    child = hierarchy.get(item.module)
    if child is None:
        return None
    outs = set(child.output_ports)
    return [(net, port in outs) for port, net in item.connections]


def validate(netlist: Netlist) -> list[Diagnostic]:
    """Full invariant check. Returns one Diagnostic per violation; an
    empty list means the netlist is valid."""
    diags: list[Diagnostic] = []
    declared = netlist.nets

    ids = set()
    for inst in netlist.instances:
        if inst.id in ids:
            diags.append(Diagnostic("DuplicateId", inst.id, "instance id used twice", inst.source_line))
        ids.add(inst.id)
        if not arity_ok(inst.kind, len(inst.inputs)):
            diags.append(
                Diagnostic(
                    "ArityViolation",
                    inst.id,
                    f"{inst.kind.value} gate with {len(inst.inputs)} inputs",
                    inst.source_line,
                )
            )
        for net in (inst.output,) + inst.inputs:
            if net not in declared:
                diags.append(Diagnostic("UndeclaredNet", net, f"referenced by {inst.id}", inst.source_line))

    # driver / sink bookkeeping
    drivers: dict[str, list[str]] = {}
    sinks: dict[str, list[str]] = {}
    for p in netlist.input_ports:
        drivers.setdefault(p, []).append(f"input port {p}")
    for inst in netlist.instances:
        drivers.setdefault(inst.output, []).append(inst.id)
        for net in inst.inputs:
            sinks.setdefault(net, []).append(inst.id)
    for p in netlist.output_ports:
        sinks.setdefault(p, []).append(f"output port {p}")
    for item in netlist.subinstances:
        resolved = _pin_directions(item, netlist.hierarchy)
        if resolved is None:
            diags.append(Diagnostic("UnknownModule", item.module, f"instantiated by {item.id}", item.source_line))
            continue
        for net, is_driver in resolved:
            (drivers if is_driver else sinks).setdefault(net, []).append(item.id)

    for net, who in sorted(drivers.items()):
        if len(who) > 1:
            diags.append(Diagnostic("MultipleDriver", net, "driven by " + ", ".join(who)))

    for inst in netlist.instances:
        for pin, net in enumerate(inst.inputs):
            if net in declared and not drivers.get(net):
                diags.append(
                    Diagnostic("FloatingInput", inst.id, f"input {pin} reads undriven net {net!r}", inst.source_line)
                )
    for p in netlist.output_ports:
        if not drivers.get(p):
            diags.append(Diagnostic("UndrivenOutput", p, "output port has no driver"))
    for w in netlist.wires:
        if not sinks.get(w) or not drivers.get(w):
            diags.append(Diagnostic("DanglingNet", w, "wire is not both driven and consumed"))

    diags.extend(_combinational_cycles(netlist))
    return diags


def _combinational_cycles(netlist: Netlist) -> list[Diagnostic]:
    """Detect cycles among gates after removing DFF output edges."""
    gate_of_net = {}
    for inst in netlist.instances:
        gate_of_net[inst.output] = inst
    succ: dict[str, list[str]] = {inst.id: [] for inst in netlist.instances}
    for inst in netlist.instances:
        for net in inst.inputs:
            drv = gate_of_net.get(net)
            if drv is not None and drv.kind is not GateKind.DFF:
                succ[drv.id].append(inst.id)

    # Tarjan SCC, iterative
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    diags = []

    for root in succ:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                scc = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    scc.append(w)
                    if w == node:
                        break
                if len(scc) > 1 or node in succ[node]:
                    diags.append(
                        Diagnostic(
                            "CombinationalCycle",
                            scc[-1],
                            "combinational loop through " + ", ".join(sorted(scc)),
                        )
                    )
    return diags
