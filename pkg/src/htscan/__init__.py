"""Hardware Trojan detection and localization for flattened gate-level
netlists: parsing, circuit graphs, structural features, decision-tree and
GCN detectors, nearest-neighbour localization, and a synthetic labeled
benchmark generator."""

from . import errors
from .benchgen import (
    LabeledCircuit,
    SuiteConfig,
    TrojanSpec,
    gen_clean,
    gen_suite,
    inject_trojan,
)
from .features import (
    NODE_FEATURE_DIM,
    PcaModel,
    fit_pca,
    fnv1a64,
    node_features,
    pca_transform,
    wl_embed,
    wl_node_signature,
)
from .graph import (
    CircuitGraph,
    build_graph,
    from_edges,
    graph_to_json,
    neighbours,
    source_of,
    to_dot,
)
from .locate import (
    LocalizationResult,
    Pattern,
    PatternLibrary,
    PatternMatch,
    Region,
    build_pattern_library,
    coverage,
    flag_nodes,
    format_time_saved,
    graph_intersection,
    localize,
    map_to_netlist,
    multiset_jaccard,
    nn_expand,
    time_saved,
)
from .metrics import Metrics, compute_metrics
from .ml import (
    NON_TROJAN,
    TROJAN,
    Adam,
    DecisionTreeModel,
    GcnModel,
    GraphSample,
    Prediction,
    TrainConfig,
    cross_entropy,
    fit_tree,
    gcn_forward,
    grad_check,
    init_gcn,
    normalized_adjacency,
    softmax,
    train_gcn,
    tree_predict,
)
from .netlist import (
    Diagnostic,
    GateInstance,
    GateKind,
    Netlist,
    SubInstance,
    emit_netlist,
    flatten,
    parse_netlist,
    structurally_equal,
    validate,
)
from .runner import run_eval, run_scan, run_train, scan_circuit

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "CircuitGraph",
    "DecisionTreeModel",
    "Diagnostic",
    "GateInstance",
    "GateKind",
    "GcnModel",
    "GraphSample",
    "LabeledCircuit",
    "LocalizationResult",
    "Metrics",
    "NODE_FEATURE_DIM",
    "NON_TROJAN",
    "Netlist",
    "Pattern",
    "PatternLibrary",
    "PatternMatch",
    "PcaModel",
    "Prediction",
    "Region",
    "SubInstance",
    "SuiteConfig",
    "TROJAN",
    "TrainConfig",
    "TrojanSpec",
    "build_graph",
    "build_pattern_library",
    "compute_metrics",
    "coverage",
    "cross_entropy",
    "emit_netlist",
    "errors",
    "fit_pca",
    "fit_tree",
    "flag_nodes",
    "flatten",
    "fnv1a64",
    "format_time_saved",
    "from_edges",
    "gcn_forward",
    "gen_clean",
    "gen_suite",
    "grad_check",
    "graph_intersection",
    "graph_to_json",
    "init_gcn",
    "inject_trojan",
    "localize",
    "map_to_netlist",
    "multiset_jaccard",
    "neighbours",
    "nn_expand",
    "node_features",
    "normalized_adjacency",
    "parse_netlist",
    "pca_transform",
    "run_eval",
    "run_scan",
    "run_train",
    "scan_circuit",
    "softmax",
    "source_of",
    "structurally_equal",
    "time_saved",
    "to_dot",
    "train_gcn",
    "tree_predict",
    "validate",
    "wl_embed",
    "wl_node_signature",
]
