"""Turn per-node predictions into located suspects: flagged set, 1st/2nd
nearest-neighbour regions, pattern matching against a library of known
infected neighbourhoods, netlist mapping, and coverage / time-saved
arithmetic."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadThresholdError,
    EmptyGraphError,
    LevelError,
    NodeOutOfRangeError,
    OutOfRangeError,
)
from .features import wl_node_signature
from .graph import CircuitGraph


@dataclass(frozen=True)
class Region:
    level: int
    nodes: tuple[int, ...]  # sorted ascending
    origin: str = "flagged"

    def __len__(self):
        return len(self.nodes)


def flag_nodes(probs, threshold: float = 0.5) -> Region:
    """Level-0 region of nodes whose Trojan probability >= threshold."""
    if not 0.0 < threshold <= 1.0:
        raise BadThresholdError(f"threshold must be in (0, 1], got {threshold}")
    p = np.atleast_2d(np.asarray(probs, dtype=float))
    flagged = np.flatnonzero(p[:, 1] >= threshold)
    return Region(level=0, nodes=tuple(int(i) for i in flagged))


def _expand_once(graph: CircuitGraph, nodes) -> tuple[int, ...]:
    mask = np.zeros(graph.n, dtype=bool)
    idx = np.fromiter(nodes, dtype=np.int64, count=len(nodes))
    mask[idx] = True
    if graph.und_src.size:
        hit = mask[graph.und_src]
        mask[graph.und_dst[hit]] = True
    return tuple(int(i) for i in np.flatnonzero(mask))


def nn_expand(graph: CircuitGraph, region: Region, target_level: int) -> Region:
    """Grow a region by undirected adjacency hops up to target_level."""
    if target_level not in (1, 2):
        raise LevelError(f"target level must be 1 or 2, got {target_level}")
    if region.level >= target_level:
        raise LevelError(f"region already at level {region.level}")
    for node in region.nodes:
        if not 0 <= node < graph.n:
            raise NodeOutOfRangeError(node, graph.n)
    nodes = region.nodes
    for _ in range(target_level - region.level):
        if nodes:
            nodes = _expand_once(graph, nodes)
    return Region(level=target_level, nodes=nodes, origin=region.origin)


def coverage(graph: CircuitGraph, region: Region) -> float:
    """Share of graph nodes inside the region, in percent."""
    if graph.n == 0:
        raise EmptyGraphError("coverage undefined on an empty graph")
    return 100.0 * len(region.nodes) / graph.n


def time_saved(max_coverage_pct: float) -> float:
    """Inspection effort avoided relative to reviewing the whole netlist."""
    if not 0.0 <= max_coverage_pct <= 100.0:
        raise OutOfRangeError(f"coverage must be within [0, 100], got {max_coverage_pct}")
    return 100.0 - max_coverage_pct


def format_time_saved(max_coverage_pct: float) -> str:
    """Human-readable form, e.g. 5.4 -> '~94%' (whole percent, floor)."""
    return f"~{math.floor(time_saved(max_coverage_pct) + 1e-9)}%"


def map_to_netlist(graph: CircuitGraph, region: Region) -> list[tuple[str, int]]:
    """(instance_ref, source_line) per region node, sorted by line."""
    located = []
    for node in region.nodes:
        if not 0 <= node < graph.n:
            raise NodeOutOfRangeError(node, graph.n)
        located.append((graph.refs[node], graph.lines[node]))
    return sorted(located, key=lambda t: (t[1], t[0]))


# ---------------------------------------------------------------------------
# pattern library / graph intersection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pattern:
    id: str
    signature: Counter  # WL label -> count over the 2-hop neighbourhood
    node_count: int


@dataclass(frozen=True)
class PatternLibrary:
    patterns: tuple[Pattern, ...]
    threshold: float = 0.8

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "patterns": [
                {"id": p.id, "signature": dict(p.signature), "node_count": p.node_count}
                for p in self.patterns
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PatternLibrary":
        pats = tuple(
            Pattern(p["id"], Counter(p["signature"]), p["node_count"])
            for p in data["patterns"]
        )
        return cls(pats, data.get("threshold", 0.8))


def build_pattern_library(entries, threshold: float = 0.8, radius: int = 2) -> PatternLibrary:
    """Record the 2-hop WL signature of each known infected node.

    `entries` is an iterable of (name, graph, trojan_node_ids)."""
    patterns = []
    for name, graph, nodes in entries:
        for node in sorted(nodes):
            sig = wl_node_signature(graph, node, radius=radius)
            patterns.append(Pattern(f"{name}:{graph.refs[node]}", sig, len(sig)))
    return PatternLibrary(tuple(patterns), threshold)


def multiset_jaccard(a: Counter, b: Counter) -> float:
    """Sum-min over sum-max similarity of two label multisets."""
    union = 0
    inter = 0
    for key in set(a) | set(b):
        va, vb = a.get(key, 0), b.get(key, 0)
        inter += min(va, vb)
        union += max(va, vb)
    return inter / union if union else 0.0


@dataclass(frozen=True)
class PatternMatch:
    pattern_id: str  # best-scoring pattern over the matched component
    similarity: float
    seed_nodes: tuple[int, ...]  # matched nodes before expansion
    region: Region  # seed expanded to the 1st-NN level


def graph_intersection(graph: CircuitGraph, library: PatternLibrary) -> list[PatternMatch]:
    """Compare every node's 2-hop WL signature against the library; nodes
    whose best Jaccard similarity reaches the library threshold are grouped
    into connected regions, each reported at the 1st-NN level."""
    if not library.patterns:
        return []
    best: dict[int, tuple[float, str]] = {}
    for node in range(graph.n):
        sig = wl_node_signature(graph, node)
        score, winner = 0.0, None
        for pat in library.patterns:
            sim = multiset_jaccard(sig, pat.signature)
            if sim > score:
                score, winner = sim, pat.id
        if winner is not None and score >= library.threshold:
            best[node] = (score, winner)

    matches = []
    unvisited = set(best)
    while unvisited:
        start = min(unvisited)
        component = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in set(graph.in_adj[u]) | set(graph.out_adj[u]):
                if v in unvisited and v not in component:
                    component.add(v)
                    stack.append(v)
        unvisited -= component
        seed = tuple(sorted(component))
        top_score, top_id = max(best[n] for n in seed)
        region = nn_expand(graph, Region(0, seed, origin=f"pattern:{top_id}"), 1)
        matches.append(PatternMatch(top_id, top_score, seed, region))
    return matches


# ---------------------------------------------------------------------------
# assembled localization result
# ---------------------------------------------------------------------------


@dataclass
class LocalizationResult:
    flagged: Region
    regions: dict  # level -> Region (0, 1, 2)
    matches: list
    locations: list  # (ref, line) of the reported region
    coverage_pct: dict  # "r0"/"r1"/"r2" -> percent
    time_saved_pct: float
    detection_time_s: float = 0.0
    node_categories: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "TROJAN" if self.flagged.nodes else "NON_TROJAN"


def categorize_nodes(graph: CircuitGraph, flagged: Region, truth_nodes, nn1_region: Region | None) -> dict:
    """Four-way truth partition (tp/tn/fp/fn) over all nodes plus the
    1st-NN overlay used for coloring."""
    truth = set(truth_nodes)
    got = set(flagged.nodes)
    cats = {"tp": [], "tn": [], "fp": [], "fn": [], "nn1": []}
    for i in range(graph.n):
        if i in got:
            cats["tp" if i in truth else "fp"].append(i)
        else:
            cats["fn" if i in truth else "tn"].append(i)
    if nn1_region is not None:
        cats["nn1"] = sorted(set(nn1_region.nodes) - got)
    return cats


def dot_categories(categories: dict) -> dict:
    """Node -> color category for to_dot; 1st-NN overlay wins over tn."""
    colors = {}
    for cat in ("tp", "fp", "fn", "tn"):
        for node in categories.get(cat, ()):
            colors[node] = cat
    for node in categories.get("nn1", ()):
        if colors.get(node) == "tn":
            colors[node] = "nn1"
    return colors


def localize(
    graph: CircuitGraph,
    flagged: Region,
    nn_level: int = 2,
    matches: list | None = None,
    truth_nodes=None,
    detection_time_s: float = 0.0,
) -> LocalizationResult:
    """Assemble the full localization report for one circuit."""
    regions = {0: flagged}
    for level in (1, 2):
        prev = regions[level - 1]
        regions[level] = (
            nn_expand(graph, prev, level) if prev.nodes else Region(level, (), prev.origin)
        )
    reported = regions[min(max(nn_level, 0), 2)]
    cov = {f"r{lvl}": coverage(graph, regions[lvl]) for lvl in (0, 1, 2)} if graph.n else {}
    categories = {}
    if truth_nodes is not None:
        categories = categorize_nodes(graph, flagged, truth_nodes, regions[1])
    return LocalizationResult(
        flagged=flagged,
        regions=regions,
        matches=list(matches or []),
        locations=map_to_netlist(graph, reported),
        coverage_pct=cov,
        time_saved_pct=time_saved(cov[f"r{min(max(nn_level, 0), 2)}"]) if cov else 100.0,
        detection_time_s=detection_time_s,
        node_categories=categories,
    )
