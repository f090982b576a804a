"""Command line entry point.

Exit codes for `htscan scan`: 0 = no Trojan reported, 1 = operational
error, 2 = at least one circuit reported TROJAN.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import runner
from .benchgen import SuiteConfig, gen_suite
from .errors import HTScanError
from .graph import graph_to_json, to_dot
from .ml import TrainConfig


def _build_parser():
    parser = argparse.ArgumentParser(prog="htscan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic benchmark suite")
    p.add_argument("--suite", required=True, help="suite config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a detector on a suite manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", required=True, choices=runner.MODES)
    p.add_argument("--config", help="training config JSON (TrainConfig fields)")
    p.add_argument("--out", required=True, help="model JSON path")

    p = sub.add_parser("scan", help="scan netlist(s) with a trained model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--netlist", help="a single netlist file")
    src.add_argument("--manifest", help="manifest JSON of circuits")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=runner.MODES, help="must match the model file")
    p.add_argument("--nn-level", type=int, default=2, choices=(0, 1, 2))
    p.add_argument("--patterns", help="pattern library JSON (gg mode)")
    p.add_argument("--truth", help="labels JSON; adds node categories to reports")
    p.add_argument("--out", required=True, help="report output directory")
    p.add_argument("--dot", action="store_true", help="also write colored DOT files")

    p = sub.add_parser("eval", help="aggregate scan reports against truth labels")
    p.add_argument("--reports", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="metrics JSON path")

    p = sub.add_parser("graph", help="export a netlist's circuit graph")
    p.add_argument("--netlist", required=True)
    p.add_argument("--dot", required=True, help="DOT output path")
    p.add_argument("--json", help="optional JSON export path")

    p = sub.add_parser("patterns", help="build a pattern library from labeled circuits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.8)

    return parser


def _cmd_gen(args) -> int:
    config = SuiteConfig.from_json(json.loads(Path(args.suite).read_text()))
    manifest = gen_suite(config, args.out, args.seed)
    print(f"wrote {len(manifest['circuits'])} circuits to {args.out}")
    return 0


def _cmd_train(args) -> int:
    raw = json.loads(Path(args.config).read_text()) if args.config else {}
    extras = {
        "pca_enabled": raw.pop("pca_enabled", True),
        "pca_k": raw.pop("pca_k", 50),
        "wl_iterations": raw.pop("wl_iterations", 3),
        "wl_dim": raw.pop("wl_dim", 256),
        "threshold": raw.pop("threshold", 0.5),
    }
    if "class_weights" in raw and raw["class_weights"] is not None:
        raw["class_weights"] = tuple(raw["class_weights"])
    config = TrainConfig(**raw)
    summary = runner.run_train(args.manifest, args.mode, config, args.out, **extras)
    print(json.dumps(summary.get("graph", {}), indent=2, sort_keys=True))
    print(f"model written to {args.out}")
    return 0


def _cmd_scan(args) -> int:
    targets = [args.netlist] if args.netlist else [args.manifest]
    bundle_mode = runner.load_model(args.model)["mode"]
    if args.mode and args.mode != bundle_mode:
        print(f"error: model {args.model} was trained for mode {bundle_mode!r}, not {args.mode!r}",
              file=sys.stderr)
        return 1
    outcome = runner.run_scan(
        args.model,
        targets,
        args.out,
        nn_level=args.nn_level,
        patterns_path=args.patterns,
        truth_path=args.truth,
        emit_dot=args.dot,
    )
    for err in outcome["errors"]:
        print(f"error: {err}", file=sys.stderr)
    flagged = [r["circuit"] for r in outcome["reports"] if r["verdict"] == "TROJAN"]
    print(f"scanned {len(outcome['reports'])} circuit(s); {len(flagged)} reported TROJAN")
    for name in flagged:
        print(f"  TROJAN: {name}")
    return outcome["exit_code"]


def _cmd_eval(args) -> int:
    doc = runner.run_eval(args.reports, args.truth, args.out)
    print(Path(args.out).with_suffix(".txt").read_text(), end="")
    print(f"metrics written to {args.out}")
    return 0


def _cmd_graph(args) -> int:
    graph = runner.load_circuit(args.netlist)
    Path(args.dot).write_text(to_dot(graph))
    if args.json:
        Path(args.json).write_text(json.dumps(graph_to_json(graph), indent=2) + "\n")
    print(f"{graph.n} nodes, {len(graph.edges)} edges")
    return 0


def _cmd_patterns(args) -> int:
    library = runner.build_patterns(args.manifest, args.out, args.threshold)
    print(f"{len(library.patterns)} patterns written to {args.out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "scan": _cmd_scan,
    "eval": _cmd_eval,
    "graph": _cmd_graph,
    "patterns": _cmd_patterns,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (HTScanError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
