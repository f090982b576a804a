"""End-to-end pipelines behind the CLI: dataset loading, training with an
80/20 split, scanning netlists into report files, and aggregating reports
into Table-style metrics.

Per-circuit wall-clock detection times go to a `timings.json` sidecar so
the report files themselves are byte-stable across reruns of the same
seed."""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .benchgen import TROJAN_KINDS  # noqa: F401  (re-exported for config docs)
from .errors import (
    CircuitMismatchError,
    EmptyDatasetError,
    HTScanError,
    IncompatibleModeError,
)
from .features import PcaModel, fit_pca, node_features, pca_transform, wl_embed
from .graph import CircuitGraph, build_graph, to_dot
from .locate import (
    PatternLibrary,
    Region,
    build_pattern_library,
    dot_categories,
    flag_nodes,
    graph_intersection,
    localize,
    time_saved,
)
from .metrics import Metrics, compute_metrics
from .ml import (
    DecisionTreeModel,
    GcnModel,
    GraphSample,
    TrainConfig,
    fit_tree,
    gcn_forward,
    softmax,
    train_gcn,
    tree_predict,
)
from .netlist import flatten, parse_netlist

MODES = ("tree", "gg", "nn")


def worker_count() -> int:
    env = os.environ.get("HTSCAN_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


@dataclass
class CircuitRecord:
    name: str
    path: Path
    clean: bool
    trojan_ids: tuple[str, ...] | None  # None = no ground truth available


def load_manifest(manifest_path) -> list[CircuitRecord]:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    labels_path = manifest_path.parent / "labels.json"
    labels = json.loads(labels_path.read_text()) if labels_path.exists() else None
    records = []
    for entry in manifest["circuits"]:
        name = entry.get("name") or Path(entry["path"]).stem
        ids = None if labels is None else tuple(labels.get(name, ()))
        records.append(
            CircuitRecord(
                name=name,
                path=manifest_path.parent / entry["path"],
                clean=bool(entry.get("clean", not ids)),
                trojan_ids=ids,
            )
        )
    return records


def load_circuit(path) -> CircuitGraph:
    netlist = flatten(parse_netlist(Path(path).read_text(), str(path)))
    return build_graph(netlist)


def split_records(records, fraction: float, seed: int):
    """Seeded shuffle partition: floor(fraction*n) train, rest test."""
    idx = np.random.default_rng(seed).permutation(len(records))
    n_train = int(fraction * len(records))
    train = [records[i] for i in idx[:n_train]]
    test = [records[i] for i in idx[n_train:]]
    return train, test


def _node_labels(graph: CircuitGraph, trojan_ids) -> np.ndarray:
    ids = set(trojan_ids)
    return np.fromiter((1 if r in ids else 0 for r in graph.refs), dtype=np.int64, count=graph.n)


def _fit_scaler(feature_blocks) -> dict:
    """Per-column standardization constants over the training node rows."""
    stacked = np.vstack(feature_blocks)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std[std < 1e-9] = 1.0
    return {"mean": mean.tolist(), "std": std.tolist()}


def _apply_scaler(scaler, x: np.ndarray) -> np.ndarray:
    if not scaler:
        return x
    return (x - np.asarray(scaler["mean"])) / np.asarray(scaler["std"])


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _write_loss_csv(path, losses):
    lines = ["epoch,loss"] + [f"{i},{loss!r}" for i, loss in enumerate(losses)]
    Path(path).write_text("\n".join(lines) + "\n")


def run_train(manifest_path, mode: str, config: TrainConfig, out_model,
              pca_enabled: bool = True, pca_k: int = 50,
              wl_iterations: int = 3, wl_dim: int = 256,
              threshold: float = 0.5) -> dict:
    """Train the configured detector; writes the model JSON, a loss trace
    CSV (GCN modes) and held-out metrics JSON next to it."""
    if mode not in MODES:
        raise IncompatibleModeError(f"mode must be one of {MODES}, got {mode!r}")
    records = load_manifest(manifest_path)
    if not records:
        raise EmptyDatasetError("manifest lists no circuits")
    train_recs, test_recs = split_records(records, config.train_fraction, config.seed)
    graphs = {r.name: load_circuit(r.path) for r in records}

    out_model = Path(out_model)
    out_model.parent.mkdir(parents=True, exist_ok=True)
    model_doc = {"format": "htscan-model", "mode": mode, "threshold": threshold}
    summary = {
        "mode": mode,
        "n_train": len(train_recs),
        "n_test": len(test_recs),
        "train_circuits": sorted(r.name for r in train_recs),
        "test_circuits": sorted(r.name for r in test_recs),
    }
    losses = []

    if mode == "tree":
        embed = {r.name: wl_embed(graphs[r.name], wl_iterations, wl_dim) for r in records}
        x_train = np.array([embed[r.name] for r in train_recs])
        y_train = np.array([0 if r.clean else 1 for r in train_recs])
        pca = None
        if pca_enabled:
            k = min(pca_k, len(train_recs) - 1, wl_dim)
            pca = fit_pca(x_train, k)
            x_train = pca_transform(pca, x_train)
        tree = fit_tree(x_train, y_train, seed=config.seed)
        model_doc["wl"] = {"iterations": wl_iterations, "dim": wl_dim}
        model_doc["pca"] = pca.to_json() if pca else None
        model_doc["tree"] = tree.to_json()
        model_doc["seed"] = config.seed

        preds = []
        for r in test_recs:
            h = embed[r.name].reshape(1, -1)
            z = pca_transform(pca, h) if pca else h
            preds.append(tree_predict(tree, z.ravel()).y)
        truth = [0 if r.clean else 1 for r in test_recs]
        summary["graph"] = compute_metrics(preds, truth).as_dict()
    else:
        gcn_mode = "graph" if mode == "gg" else "node"
        if mode == "nn" and any(r.trojan_ids is None for r in records):
            raise EmptyDatasetError("node-mode training needs labels.json beside the manifest")
        feats = {r.name: node_features(graphs[r.name]) for r in records}
        scaler = _fit_scaler([feats[r.name] for r in train_recs])
        samples = []
        for r in train_recs:
            g = graphs[r.name]
            x = _apply_scaler(scaler, feats[r.name])
            y = (0 if r.clean else 1) if gcn_mode == "graph" else _node_labels(g, r.trojan_ids)
            samples.append(GraphSample(g, x, y))
        model, losses = train_gcn(samples, gcn_mode, config)
        model_doc["gcn"] = model.to_json()
        model_doc["scaler"] = scaler
        model_doc["seed"] = config.seed
        summary.update(_evaluate_gcn(model, mode, test_recs, graphs, threshold, scaler))

    out_model.write_text(json.dumps(model_doc, indent=2, sort_keys=True) + "\n")
    if losses:
        _write_loss_csv(out_model.with_suffix(".loss.csv"), losses)
    out_model.with_suffix(".metrics.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    return summary


def _evaluate_gcn(model: GcnModel, mode: str, test_recs, graphs, threshold: float, scaler=None) -> dict:
    graph_preds, graph_truth = [], []
    node_total = Metrics(0, 0, 0, 0)
    for r in test_recs:
        g = graphs[r.name]
        x = _apply_scaler(scaler, node_features(g))
        node_logits, graph_logits = gcn_forward(model, g, x)
        if mode == "gg":
            verdict = int(np.argmax(softmax(graph_logits)))
        else:
            probs = softmax(node_logits)
            flagged = flag_nodes(probs, threshold)
            truth_nodes = _node_labels(g, r.trojan_ids)
            pred_nodes = np.zeros(g.n, dtype=np.int64)
            pred_nodes[list(flagged.nodes)] = 1
            node_total = node_total + compute_metrics(pred_nodes, truth_nodes)
            verdict = int(bool(flagged.nodes))
        graph_preds.append(verdict)
        graph_truth.append(0 if r.clean else 1)
    out = {"graph": compute_metrics(graph_preds, graph_truth).as_dict()}
    if mode == "nn" and test_recs:
        out["node"] = node_total.as_dict()
    return out


# ---------------------------------------------------------------------------
# scanning
# ---------------------------------------------------------------------------


def load_model(model_path) -> dict:
    path = Path(model_path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("format") != "htscan-model":
        raise HTScanError(f"{path} is not an htscan model file")
    bundle = {"mode": doc["mode"], "threshold": doc.get("threshold", 0.5)}
    if doc["mode"] == "tree":
        bundle["tree"] = DecisionTreeModel.from_json(doc["tree"])
        bundle["pca"] = PcaModel.from_json(doc["pca"]) if doc.get("pca") else None
        bundle["wl"] = doc.get("wl", {"iterations": 3, "dim": 256})
    else:
        bundle["gcn"] = GcnModel.from_json(doc["gcn"])
        bundle["scaler"] = doc.get("scaler")
    return bundle


def scan_circuit(name: str, path, bundle: dict, nn_level: int,
                 library: PatternLibrary | None = None,
                 truth_ids=None, emit_dot: bool = False) -> tuple[dict, float, str | None]:
    """Scan one netlist file; returns (report dict, detection seconds, dot)."""
    t0 = time.perf_counter()
    graph = load_circuit(path)
    mode = bundle["mode"]
    matches = []
    truth_nodes = None
    if truth_ids is not None:
        truth = _node_labels(graph, truth_ids)
        truth_nodes = [int(i) for i in np.flatnonzero(truth)]

    if mode == "tree":
        wl = bundle["wl"]
        h = wl_embed(graph, wl["iterations"], wl["dim"]).reshape(1, -1)
        z = pca_transform(bundle["pca"], h) if bundle["pca"] else h
        pred = tree_predict(bundle["tree"], z.ravel())
        verdict = "TROJAN" if pred.y == 1 else "NON_TROJAN"
        flagged = Region(0, ())
    elif mode == "gg":
        x = _apply_scaler(bundle.get("scaler"), node_features(graph))
        _, graph_logits = gcn_forward(bundle["gcn"], graph, x)
        verdict = "TROJAN" if int(np.argmax(softmax(graph_logits))) == 1 else "NON_TROJAN"
        if library is not None:
            matches = graph_intersection(graph, library)
        seeds = sorted({n for m in matches for n in m.seed_nodes})
        flagged = Region(0, tuple(seeds), origin="pattern")
    else:
        x = _apply_scaler(bundle.get("scaler"), node_features(graph))
        node_logits, _ = gcn_forward(bundle["gcn"], graph, x)
        flagged = flag_nodes(softmax(node_logits), bundle["threshold"])
        verdict = "TROJAN" if flagged.nodes else "NON_TROJAN"

    result = localize(graph, flagged, nn_level, matches=matches, truth_nodes=truth_nodes)
    elapsed = time.perf_counter() - t0

    report = {
        "circuit": name,
        "mode": mode,
        "nn_level": nn_level,
        "verdict": verdict,
        "n_nodes": graph.n,
        "flags": list(result.flagged.nodes),
        "regions": {f"r{lvl}": list(reg.nodes) for lvl, reg in result.regions.items()},
        "matches": [
            {"pattern": m.pattern_id, "similarity": m.similarity, "nodes": list(m.seed_nodes)}
            for m in result.matches
        ],
        "locations": [{"ref": ref, "line": line} for ref, line in result.locations],
        "coverage_pct": result.coverage_pct,
        "time_saved_pct": result.time_saved_pct,
        "node_categories": result.node_categories or None,
    }
    dot = to_dot(graph, dot_categories(result.node_categories)) if emit_dot else None
    return report, elapsed, dot


def run_scan(model_path, targets, out_dir, nn_level: int = 2,
             patterns_path=None, truth_path=None, emit_dot: bool = False) -> dict:
    """Scan circuits and write one report JSON per circuit plus a
    timings.json sidecar. Returns {"exit_code", "reports", "errors"}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = load_model(model_path)
    library = None
    if patterns_path:
        library = PatternLibrary.from_json(json.loads(Path(patterns_path).read_text()))
    truth = json.loads(Path(truth_path).read_text()) if truth_path else None

    jobs = []  # (name, path, truth ids | None)
    for target in targets:
        target = Path(target)
        if target.suffix == ".json":
            for rec in load_manifest(target):
                ids = rec.trojan_ids if truth is None else truth.get(rec.name)
                jobs.append((rec.name, rec.path, ids))
        else:
            name = target.stem
            jobs.append((name, target, None if truth is None else truth.get(name)))
    jobs.sort(key=lambda j: j[0])

    def work(job):
        name, path, ids = job
        try:
            report, elapsed, dot = scan_circuit(name, path, bundle, nn_level, library, ids, emit_dot)
            return name, report, elapsed, dot, None
        except (HTScanError, OSError) as exc:
            return name, None, 0.0, None, f"{name}: {exc}"

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(work, jobs))

    reports, errors, timings = [], [], {}
    for name, report, elapsed, dot, err in sorted(results, key=lambda r: r[0]):
        if err is not None:
            errors.append(err)
            continue
        reports.append(report)
        timings[name] = elapsed
        (out / f"{name}.report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        if dot is not None:
            (out / f"{name}.dot").write_text(dot)
    (out / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")

    if errors:
        code = 1
    elif any(r["verdict"] == "TROJAN" for r in reports):
        code = 2
    else:
        code = 0
    return {"exit_code": code, "reports": reports, "errors": errors}


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _svg_bar_chart(values: dict, title: str) -> str:
    """Minimal standalone SVG bar chart of per-circuit percentages."""
    width, height, pad = 800, 300, 40
    bars = sorted(values.items())
    if not bars:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"/>'
    bw = max(1.0, (width - 2 * pad) / len(bars))
    peak = max(max(v for _, v in bars), 1e-9)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{pad}" y="20" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
    ]
    for i, (name, val) in enumerate(bars):
        h = (height - 2 * pad) * val / peak
        x = pad + i * bw
        parts.append(
            f'<rect x="{x:.1f}" y="{height - pad - h:.1f}" width="{max(bw - 2, 1):.1f}" '
            f'height="{h:.1f}" fill="steelblue"><title>{name}: {val:.2f}%</title></rect>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def run_eval(reports_dir, truth_path, out_path) -> dict:
    """Aggregate scan reports against truth labels into a metrics document
    mirroring the accuracy / coverage / detection-time table layout."""
    reports_dir = Path(reports_dir)
    reports = []
    for path in sorted(reports_dir.glob("*.report.json")):
        reports.append(json.loads(path.read_text()))
    truth = json.loads(Path(truth_path).read_text())
    missing = [r["circuit"] for r in reports if r["circuit"] not in truth]
    if missing or not reports:
        raise CircuitMismatchError(
            f"reports and truth disagree (missing from truth: {missing})" if missing
            else "no reports found"
        )

    timings_path = reports_dir / "timings.json"
    timings = json.loads(timings_path.read_text()) if timings_path.exists() else {}

    rows = {}
    for rep in reports:
        key = (rep["mode"], rep["nn_level"])
        rows.setdefault(key, []).append(rep)

    table = []
    for (mode, level), reps in sorted(rows.items()):
        preds = [1 if r["verdict"] == "TROJAN" else 0 for r in reps]
        gtruth = [1 if truth[r["circuit"]] else 0 for r in reps]
        gm = compute_metrics(preds, gtruth)
        covs = [r["coverage_pct"].get(f"r{level}", 0.0) for r in reps if r["flags"] or r["regions"][f"r{level}"]]
        avg_cov = float(np.mean(covs)) if covs else 0.0
        max_cov = float(np.max(covs)) if covs else 0.0
        times = [timings[r["circuit"]] for r in reps if r["circuit"] in timings]
        node = Metrics(0, 0, 0, 0)
        have_nodes = all(r.get("node_categories") for r in reps)
        macro_acc = []
        if have_nodes:
            for r in reps:
                cats = r["node_categories"]
                m = Metrics(len(cats["tp"]), len(cats["fp"]), len(cats["tn"]), len(cats["fn"]))
                node = node + m
                macro_acc.append(m.accuracy)
        row = {
            "mode": mode,
            "nn_level": level,
            "n_circuits": len(reps),
            "graph": gm.as_dict(),
            "coverage_avg_pct": avg_cov,
            "coverage_max_pct": max_cov,
            "time_saved": time_saved(max_cov),
            "time_saved_display": f"~{int(np.floor(time_saved(max_cov) + 1e-9))}%",
            "detection_time_avg_s": float(np.mean(times)) if times else None,
        }
        if have_nodes:
            row["node_micro"] = node.as_dict()
            row["node_macro_accuracy"] = float(np.mean(macro_acc))
        table.append(row)

    doc = {"rows": table}
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    headers = ["mode", "nn", "accuracy", "avg cov %", "max cov %", "avg time s", "time saved"]
    lines = ["  ".join(f"{h:>11}" for h in headers)]
    for row in table:
        t = row["detection_time_avg_s"]
        lines.append(
            "  ".join(
                f"{v:>11}"
                for v in (
                    row["mode"],
                    row["nn_level"],
                    f"{row['graph']['accuracy']:.3f}",
                    f"{row['coverage_avg_pct']:.1f}",
                    f"{row['coverage_max_pct']:.1f}",
                    "-" if t is None else f"{t:.3f}",
                    row["time_saved_display"],
                )
            )
        )
    out_path.with_suffix(".txt").write_text("\n".join(lines) + "\n")

    coverage_by_circuit = {
        r["circuit"]: r["coverage_pct"].get(f"r{r['nn_level']}", 0.0)
        for r in reports
        if r["regions"][f"r{r['nn_level']}"]
    }
    out_path.with_suffix(".svg").write_text(
        _svg_bar_chart(coverage_by_circuit, "suspect region coverage per circuit (%)")
    )
    return doc


def build_patterns(manifest_path, out_path, threshold: float = 0.8) -> PatternLibrary:
    """Record the neighbourhood signatures of every labeled Trojan gate in
    a generated suite into a pattern library file."""
    entries = []
    for rec in load_manifest(manifest_path):
        if not rec.trojan_ids:
            continue
        graph = load_circuit(rec.path)
        nodes = [graph.node_of(ref) for ref in rec.trojan_ids]
        entries.append((rec.name, graph, nodes))
    library = build_pattern_library(entries, threshold)
    Path(out_path).write_text(json.dumps(library.to_json(), indent=2, sort_keys=True) + "\n")
    return library
