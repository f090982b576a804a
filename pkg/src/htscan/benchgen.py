"""Synthetic benchmark circuits with Trojan injection and exact labels.

Clean templates (ripple adder, binary counter, 2-op-select ALU slice array,
Fibonacci LFSR) are structural netlists built from the supported gate set.
Trojans follow three trigger taxonomies: a pattern comparator over tapped
nets (input-triggered), a constant-on trigger (always-on), and a free-running
counter with an equality comparator (state-based). The payload is always a
single XOR spliced into one victim sink pin; the labeled gates plus that one
rewired pin are the complete diff against the clean circuit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadSizeError, InsufficientNetsError, VictimNotFoundError
from .netlist import GateInstance, GateKind, Netlist, emit_netlist

TEMPLATES = ("adder", "counter", "alu", "lfsr")
TROJAN_KINDS = ("input_triggered", "always_on", "state_based")


@dataclass(frozen=True)
class TrojanSpec:
    kind: str  # input_triggered | always_on | state_based
    trigger_width: int = 0  # input_triggered: tapped nets
    trigger_pattern: str = ""  # bit string of length trigger_width
    counter_bits: int = 0  # state_based
    seed: int = 0

    def __post_init__(self):
        if self.kind not in TROJAN_KINDS:
            raise ValueError(f"unknown trojan kind {self.kind!r}")
        if self.kind == "input_triggered":
            if self.trigger_width < 1:
                raise ValueError("input_triggered needs trigger_width >= 1")
            if len(self.trigger_pattern) != self.trigger_width or set(self.trigger_pattern) - {"0", "1"}:
                raise ValueError("trigger_pattern must be a bit string of length trigger_width")
        if self.kind == "state_based" and self.counter_bits < 1:
            raise ValueError("state_based needs counter_bits >= 1")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "trigger_width": self.trigger_width,
            "trigger_pattern": self.trigger_pattern,
            "counter_bits": self.counter_bits,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TrojanSpec":
        return cls(
            data["kind"],
            data.get("trigger_width", 0),
            data.get("trigger_pattern", ""),
            data.get("counter_bits", 0),
            data.get("seed", 0),
        )


@dataclass(frozen=True)
class LabeledCircuit:
    netlist: Netlist
    trojan_gate_ids: frozenset[str]
    spec: TrojanSpec | None = None

    def node_labels(self, graph) -> np.ndarray:
        """Per-node 0/1 labels aligned with the graph's node numbering."""
        return np.fromiter(
            (1 if ref in self.trojan_gate_ids else 0 for ref in graph.refs),
            dtype=np.int64,
            count=graph.n,
        )


# ---------------------------------------------------------------------------
# clean templates
# ---------------------------------------------------------------------------


def _adder(size):
    inputs = [f"a{i}" for i in range(size)] + [f"b{i}" for i in range(size)] + ["cin"]
    outputs = [f"s{i}" for i in range(size)] + ["cout"]
    wires, items = [], []
    carry = "cin"
    for i in range(size):
        axb, ab, axbc = f"axb{i}", f"ab{i}", f"axbc{i}"
        wires += [axb, ab, axbc]
        cnext = "cout" if i == size - 1 else f"c{i + 1}"
        if i < size - 1:
            wires.append(cnext)
        items += [
            GateInstance(f"x1_{i}", GateKind.XOR, (f"a{i}", f"b{i}"), axb),
            GateInstance(f"x2_{i}", GateKind.XOR, (axb, carry), f"s{i}"),
            GateInstance(f"a1_{i}", GateKind.AND, (f"a{i}", f"b{i}"), ab),
            GateInstance(f"a2_{i}", GateKind.AND, (axb, carry), axbc),
            GateInstance(f"o1_{i}", GateKind.OR, (ab, axbc), cnext),
        ]
        carry = cnext
    return inputs, outputs, wires, items


def _counter(size):
    outputs = [f"q{i}" for i in range(size)]
    wires = [f"d{i}" for i in range(size)]
    items = [
        GateInstance("ff0", GateKind.DFF, ("d0",), "q0"),
        GateInstance("inv0", GateKind.NOT, ("q0",), "d0"),
    ]
    toggle = "q0"
    for i in range(1, size):
        if i >= 2:
            t = f"t{i}"
            wires.append(t)
            items.append(GateInstance(f"tc{i}", GateKind.AND, (toggle, f"q{i - 1}"), t))
            toggle = t
        items += [
            GateInstance(f"ff{i}", GateKind.DFF, (f"d{i}",), f"q{i}"),
            GateInstance(f"tg{i}", GateKind.XOR, (f"q{i}", toggle), f"d{i}"),
        ]
    return [], outputs, wires, items


def _alu(size):
    inputs = [f"a{i}" for i in range(size)] + [f"b{i}" for i in range(size)] + ["sel0", "sel1"]
    outputs = [f"out{i}" for i in range(size)]
    wires, items = [], []
    for i in range(size):
        wa, wo, wx, wm = f"and{i}", f"or{i}", f"xor{i}", f"m{i}"
        wires += [wa, wo, wx, wm]
        items += [
            GateInstance(f"g_and{i}", GateKind.AND, (f"a{i}", f"b{i}"), wa),
            GateInstance(f"g_or{i}", GateKind.OR, (f"a{i}", f"b{i}"), wo),
            GateInstance(f"g_xor{i}", GateKind.XOR, (f"a{i}", f"b{i}"), wx),
            GateInstance(f"m1_{i}", GateKind.MUX2, (wa, wo, "sel0"), wm),
            GateInstance(f"m2_{i}", GateKind.MUX2, (wm, wx, "sel1"), f"out{i}"),
        ]
    return inputs, outputs, wires, items


def _lfsr(size):
    if size == 1:
        return [], ["q0"], ["d0"], [
            GateInstance("ff0", GateKind.DFF, ("d0",), "q0"),
            GateInstance("inv0", GateKind.NOT, ("q0",), "d0"),
        ]
    outputs = [f"q{i}" for i in range(size)]  # state is observable
    wires = ["fb"]
    items = [GateInstance("ff0", GateKind.DFF, ("fb",), "q0")]
    for i in range(1, size):
        items.append(GateInstance(f"ff{i}", GateKind.DFF, (f"q{i - 1}",), f"q{i}"))
    items.append(GateInstance("xfb", GateKind.XOR, (f"q{size - 1}", f"q{size - 2}"), "fb"))
    return [], outputs, wires, items


_BUILDERS = {"adder": _adder, "counter": _counter, "alu": _alu, "lfsr": _lfsr}


def gen_clean(template: str, size: int, seed: int = 0) -> Netlist:
    """Deterministic clean netlist; the seed shuffles gate declaration
    order (node numbering variety) without changing structure."""
    if template not in _BUILDERS:
        raise ValueError(f"unknown template {template!r}; choose from {TEMPLATES}")
    if size < 1:
        raise BadSizeError(f"size must be >= 1, got {size}")
    inputs, outputs, wires, items = _BUILDERS[template](size)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(items))
    items = [items[i] for i in order]
    return Netlist(
        name=f"{template}{size}",
        input_ports=tuple(inputs),
        output_ports=tuple(outputs),
        wires=tuple(wires),
        items=tuple(items),
    )


# ---------------------------------------------------------------------------
# trojan injection
# ---------------------------------------------------------------------------


def _fresh_prefix(netlist: Netlist) -> str:
    names = set(netlist.nets) | {i.id for i in netlist.instances}
    prefix = "trj"
    while any(n == prefix or n.startswith(prefix + "_") for n in names):
        prefix += "x"
    return prefix


def _comb_downstream_nets(netlist: Netlist, start_gate: GateInstance) -> set[str]:
    """Nets driven combinationally from a gate's output (DFFs break paths)."""
    sinks: dict[str, list[GateInstance]] = {}
    for inst in netlist.instances:
        for net in inst.inputs:
            sinks.setdefault(net, []).append(inst)
    reached = set()
    stack = [start_gate]
    seen_gates = {start_gate.id}
    while stack:
        gate = stack.pop()
        if gate.kind is GateKind.DFF and gate.id != start_gate.id:
            continue
        net = gate.output
        if net in reached:
            continue
        reached.add(net)
        for nxt in sinks.get(net, ()):
            if nxt.id not in seen_gates:
                seen_gates.add(nxt.id)
                stack.append(nxt)
    return reached


def _and_reduce(prefix, signals, wires, gates, start=0):
    """Left-chained 2-input AND tree; returns the reduced net name."""
    acc = signals[0]
    for i, sig in enumerate(signals[1:]):
        out = f"{prefix}_and{start + i}"
        wires.append(out)
        gates.append(GateInstance(f"{prefix}_ga{start + i}", GateKind.AND, (acc, sig), out))
        acc = out
    return acc


def inject_trojan(clean: Netlist, spec: TrojanSpec) -> LabeledCircuit:
    """Splice a trigger + XOR payload into a clean circuit.

    Exactly one existing input pin is rewired to read the payload output;
    every other byte of the clean netlist is preserved. Tap nets are never
    combinationally downstream of the victim's sink gate, so the infected
    circuit stays cycle-free."""
    rng = np.random.default_rng(spec.seed)
    prefix = _fresh_prefix(clean)

    internal = [n for n in sorted(clean.nets) if n not in clean.input_ports]
    internal_set = set(internal)
    victims = []  # (net, item index, pin index)
    for idx, item in enumerate(clean.items):
        if isinstance(item, GateInstance):
            for pin, net in enumerate(item.inputs):
                if net in internal_set:
                    victims.append((net, idx, pin))
    if not victims:
        raise VictimNotFoundError("no internal net with a gate sink to splice into")
    victims.sort()
    victim_net, victim_idx, victim_pin = victims[rng.integers(len(victims))]
    victim_gate = clean.items[victim_idx]

    wires: list[str] = []
    gates: list[GateInstance] = []

    if spec.kind == "input_triggered":
        forbidden = _comb_downstream_nets(clean, victim_gate)
        taps_pool = [n for n in internal if n not in forbidden]
        if len(taps_pool) < spec.trigger_width:
            raise InsufficientNetsError(
                f"need {spec.trigger_width} tap nets, only {len(taps_pool)} usable"
            )
        taps = [taps_pool[i] for i in rng.choice(len(taps_pool), spec.trigger_width, replace=False)]
        signals = []
        for i, (tap, bit) in enumerate(zip(taps, spec.trigger_pattern)):
            if bit == "1":
                signals.append(tap)
            else:
                inv = f"{prefix}_n{i}"
                wires.append(inv)
                gates.append(GateInstance(f"{prefix}_gn{i}", GateKind.NOT, (tap,), inv))
                signals.append(inv)
        trigger = _and_reduce(prefix, signals, wires, gates)
    elif spec.kind == "always_on":
        c1, buf = f"{prefix}_c1", f"{prefix}_buf"
        wires += [c1, buf]
        gates += [
            GateInstance(f"{prefix}_gc", GateKind.CONST1, (), c1),
            GateInstance(f"{prefix}_gb", GateKind.BUF, (c1,), buf),
        ]
        trigger = buf
    else:  # state_based: free-running counter + all-ones comparator
        k = spec.counter_bits
        qs = [f"{prefix}_q{i}" for i in range(k)]
        ds = [f"{prefix}_d{i}" for i in range(k)]
        wires += qs + ds
        gates.append(GateInstance(f"{prefix}_ff0", GateKind.DFF, (ds[0],), qs[0]))
        gates.append(GateInstance(f"{prefix}_gi0", GateKind.NOT, (qs[0],), ds[0]))
        toggle = qs[0]
        for i in range(1, k):
            if i >= 2:
                t = f"{prefix}_t{i}"
                wires.append(t)
                gates.append(GateInstance(f"{prefix}_gt{i}", GateKind.AND, (toggle, qs[i - 1]), t))
                toggle = t
            gates.append(GateInstance(f"{prefix}_ff{i}", GateKind.DFF, (ds[i],), qs[i]))
            gates.append(GateInstance(f"{prefix}_gx{i}", GateKind.XOR, (qs[i], toggle), ds[i]))
        trigger = _and_reduce(f"{prefix}_cmp", qs, wires, gates) if k > 1 else qs[0]

    payload_out = f"{prefix}_v"
    wires.append(payload_out)
    gates.append(GateInstance(f"{prefix}_gp", GateKind.XOR, (victim_net, trigger), payload_out))

    new_inputs = list(victim_gate.inputs)
    new_inputs[victim_pin] = payload_out
    rewired = GateInstance(
        victim_gate.id, victim_gate.kind, tuple(new_inputs), victim_gate.output, victim_gate.source_line
    )
    items = list(clean.items)
    items[victim_idx] = rewired
    items.extend(gates)

    infected = Netlist(
        name=clean.name,
        input_ports=clean.input_ports,
        output_ports=clean.output_ports,
        wires=clean.wires + tuple(wires),
        items=tuple(items),
        port_lines=clean.port_lines,
    )
    return LabeledCircuit(infected, frozenset(g.id for g in gates), spec)


# ---------------------------------------------------------------------------
# suite generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuiteConfig:
    n_clean: int = 100
    n_infected: int = 100
    templates: tuple[str, ...] = TEMPLATES
    sizes: tuple[int, ...] = (2, 3, 4, 6)
    trojan_kinds: tuple[str, ...] = TROJAN_KINDS
    trigger_widths: tuple[int, ...] = (2, 3, 4)
    counter_bits: tuple[int, ...] = (2, 3)

    @classmethod
    def from_json(cls, data: dict) -> "SuiteConfig":
        kw = {}
        for name in ("n_clean", "n_infected"):
            if name in data:
                kw[name] = int(data[name])
        for name in ("templates", "sizes", "trojan_kinds", "trigger_widths", "counter_bits"):
            if name in data:
                kw[name] = tuple(data[name])
        return cls(**kw)


def _draw_spec(cfg: SuiteConfig, rng) -> TrojanSpec:
    kind = cfg.trojan_kinds[rng.integers(len(cfg.trojan_kinds))]
    seed = int(rng.integers(2**32))
    if kind == "input_triggered":
        w = int(cfg.trigger_widths[rng.integers(len(cfg.trigger_widths))])
        pattern = "".join(str(rng.integers(2)) for _ in range(w))
        return TrojanSpec(kind, trigger_width=w, trigger_pattern=pattern, seed=seed)
    if kind == "state_based":
        k = int(cfg.counter_bits[rng.integers(len(cfg.counter_bits))])
        return TrojanSpec(kind, counter_bits=k, seed=seed)
    return TrojanSpec(kind, seed=seed)


def gen_suite(config: SuiteConfig, out_dir, seed: int = 0) -> dict:
    """Write circuits/, labels.json and manifest.json under out_dir.

    Regenerating with the same seed produces byte-identical files."""
    out = Path(out_dir)
    (out / "circuits").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    circuits = []
    labels = {}

    total = config.n_clean + config.n_infected
    for i in range(total):
        clean = i < config.n_clean
        template = config.templates[int(rng.integers(len(config.templates)))]
        size = int(config.sizes[int(rng.integers(len(config.sizes)))])
        gseed = int(rng.integers(2**32))
        netlist = gen_clean(template, size, gseed)
        name = f"{'clean' if clean else 'trojan'}_{i:03d}_{template}{size}"
        entry = {
            "path": f"circuits/{name}.v",
            "name": name,
            "clean": clean,
            "template": template,
            "size": size,
            "seed": gseed,
        }
        if clean:
            labels[name] = []
        else:
            # small hosts may not offer enough tap nets; redraw the spec
            labeled = None
            for _ in range(16):
                spec = _draw_spec(config, rng)
                try:
                    labeled = inject_trojan(netlist, spec)
                    break
                except InsufficientNetsError:
                    continue
            if labeled is None:
                raise InsufficientNetsError(f"could not place a trojan in {name}")
            netlist = labeled.netlist
            labels[name] = sorted(labeled.trojan_gate_ids)
            entry["spec"] = spec.to_json()
        circuits.append(entry)
        (out / "circuits" / f"{name}.v").write_text(emit_netlist(netlist))

    manifest = {"seed": seed, "circuits": circuits}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out / "labels.json").write_text(json.dumps(labels, indent=2, sort_keys=True) + "\n")
    return manifest
