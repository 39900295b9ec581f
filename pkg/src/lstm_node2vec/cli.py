"""Command-line surface: ingest, embed, inject, eval, sweep-L.

Every run is driven by one master seed and writes a manifest carrying the
effective configuration, input hashes and package version, so results can be
reproduced bit for bit. A JSON config file can provide any flag's value;
explicit flags win over the file.

Exit codes: 0 success, 1 runtime failure (bad paths, malformed data),
2 invalid flags or configuration.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, Error, FormatError
from .evaluation import (
    ClassifierSettings,
    InjectionPlan,
    LabeledEdgeSet,
    inject_stars,
    run_anomaly_task,
    run_link_prediction,
    run_node_classification,
)
from .graphs import EdgeSchema, ingest_edge_list, read_node_labels, snapshot_split
from .pipeline import EmbedConfig, embed_stream, embed_stream_static, load_stream, save_stream

_CONFIG_KEYS = {f.name for f in dataclasses.fields(EmbedConfig)}
_IO_KEYS = {"input", "schema", "snapshots", "time_window", "out", "method", "threads",
            "task", "op", "labels", "n", "k_consec", "m_gap", "start"}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_config_file(path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a flat JSON object")
    unknown = set(data) - _CONFIG_KEYS - _IO_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _effective(args, keys) -> dict:
    """Merge defaults <- config file <- explicit flags (flags win)."""
    file_conf = _load_config_file(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in file_conf:
            merged[key] = file_conf[key]
    return merged


def _build_embed_config(args, parser) -> EmbedConfig:
    merged = _effective(args, _CONFIG_KEYS)
    try:
        return EmbedConfig.from_dict(merged).validate()
    except (ConfigError, TypeError) as exc:
        parser.error(str(exc))


def _policy(args, parser, manifest_provenance=None) -> dict:
    merged = _effective(args, {"snapshots", "time_window"})
    snapshots = merged.get("snapshots")
    time_window = merged.get("time_window")
    if snapshots is None and time_window is None and manifest_provenance:
        stored = manifest_provenance.get("policy") or {}
        snapshots = stored.get("snapshots")
        time_window = stored.get("time_window")
    if (snapshots is None) == (time_window is None):
        parser.error("give exactly one of --snapshots or --time-window")
    if snapshots is not None and snapshots < 1:
        parser.error("--snapshots must be >= 1")
    if time_window is not None and time_window <= 0:
        parser.error("--time-window must be > 0")
    return {"snapshots": snapshots, "time_window": time_window}


def _read_graph(args, parser, policy):
    input_path = Path(args.input)
    schema = EdgeSchema.from_string(args.schema) if args.schema else EdgeSchema()
    with open(input_path, "r", encoding="utf-8") as fh:
        registry, edge_set = ingest_edge_list(fh, schema)
    seq = snapshot_split(edge_set, registry,
                         count=policy["snapshots"], window=policy["time_window"])
    return registry, edge_set, seq


def _add_common(p):
    p.add_argument("--config", help="JSON file of flag defaults; explicit flags win")
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")


def _add_graph_inputs(p, input_required=True):
    p.add_argument("--input", required=input_required, help="edge list file: src dst time [weight]")
    p.add_argument("--schema", default=None,
                   help="column order, e.g. src,dst,time,weight (default) or src,dst,weight,time")
    p.add_argument("--snapshots", type=int, default=None, help="split into this many equal time windows")
    p.add_argument("--time-window", dest="time_window", type=float, default=None,
                   help="split into windows of this width in time units")


def _add_embed_flags(p):
    p.add_argument("--method", choices=["lstm-node2vec", "node2vec", "deepwalk"], default="lstm-node2vec")
    p.add_argument("--dim", dest="d", type=int, default=None, help="embedding dimension (default 128)")
    p.add_argument("--L", dest="L", type=int, default=None, help="temporal window size (default 10)")
    p.add_argument("--k", dest="k", type=int, default=None, help="temporal walks per node (default 10)")
    p.add_argument("--p", dest="p", type=float, default=None, help="return parameter (default 0.25)")
    p.add_argument("--q", dest="q", type=float, default=None, help="in-out parameter (default 1)")
    p.add_argument("--walks-per-node", dest="walks_per_node", type=int, default=None)
    p.add_argument("--walk-length", dest="walk_length", type=int, default=None)
    p.add_argument("--sg-window", dest="window", type=int, default=None, help="skipgram context window")
    p.add_argument("--negatives", dest="negatives", type=int, default=None)
    p.add_argument("--sg-epochs", dest="epochs_sgns", type=int, default=None)
    p.add_argument("--lstm-epochs", dest="epochs_lstm", type=int, default=None)
    p.add_argument("--batch", dest="batch", type=int, default=None)
    p.add_argument("--clip", dest="clip", type=float, default=None)
    p.add_argument("--bias", dest="bias", choices=["uniform", "second_order"], default=None,
                   help="temporal neighbor sampling bias")
    p.add_argument("--encoder-layers", dest="encoder_layers", type=int, default=None, choices=[1, 2])
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (current implementation is sequential)")


def cmd_ingest(args, parser) -> int:
    wants_split = args.snapshots is not None or args.time_window is not None
    policy = _policy(args, parser) if wants_split else None
    input_path = Path(args.input)
    schema = EdgeSchema.from_string(args.schema) if args.schema else EdgeSchema()
    with open(input_path, "r", encoding="utf-8") as fh:
        registry, edge_set = ingest_edge_list(fh, schema)
    summary = {
        "input": str(args.input),
        "nodes": len(registry),
        "edges": len(edge_set),
        "time_range": list(edge_set.time_range),
    }
    if policy:
        seq = snapshot_split(edge_set, registry, count=policy["snapshots"], window=policy["time_window"])
        summary["snapshots"] = [
            {"t": s.index, "records": s.edge_count, "pairs": s.num_pairs, "active_nodes": len(s.node_set)}
            for s in seq.snapshots
        ]
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_embed(args, parser) -> int:
    cfg = _build_embed_config(args, parser)
    policy = _policy(args, parser)
    registry, edge_set, seq = _read_graph(args, parser, policy)
    if args.method == "lstm-node2vec":
        es = embed_stream(seq, cfg)
    else:
        es = embed_stream_static(seq, cfg, method=args.method)
    es.provenance.update({
        "version": __version__,
        "command": "embed",
        "input": str(args.input),
        "input_sha256": _sha256(Path(args.input)),
        "schema": args.schema or "src,dst,time,weight",
        "policy": policy,
        "threads": args.threads or 1,
    })
    save_stream(es, args.out)
    print(f"wrote {len(es.matrices)} embedding matrices (t={es.start}..{es.start + len(es.matrices) - 1}) to {args.out}")
    return 0


def cmd_inject(args, parser) -> int:
    merged = _effective(args, {"n", "k_consec", "m_gap", "start", "seed"})
    n = merged.get("n")
    k_consec = merged.get("k_consec", 3)
    m_gap = merged.get("m_gap", 2)
    start = merged.get("start", 0)
    seed = merged.get("seed", 0)
    if n is None or n < 1:
        parser.error("--n must be >= 1")
    if k_consec < 1 or m_gap < 0 or start < 0:
        parser.error("need --k >= 1, --m >= 0, --start >= 0")
    policy = _policy(args, parser)
    registry, edge_set, seq = _read_graph(args, parser, policy)
    plan = InjectionPlan(n=n, k_consec=k_consec, m_gap=m_gap, seed=seed)
    injected_seq, labeled = inject_stars(seq, plan, start=start)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lo, hi = edge_set.time_range
    span = hi - lo
    t_count = len(seq)
    width = (span / t_count) if policy["snapshots"] else policy["time_window"]
    injected_records = 0
    with open(out / "injected.edges", "w", encoding="utf-8") as fh:
        for e in edge_set.edges:
            fh.write(f"{registry.label_of(e.src)} {registry.label_of(e.dst)} {e.time!r} {e.weight!r}\n")
        for t, snap_labels in enumerate(labeled.labels):
            mid = lo if span == 0 else lo + (t + 0.5) * width
            for (u, v), lab in sorted(snap_labels.items()):
                if lab:
                    fh.write(f"{registry.label_of(u)} {registry.label_of(v)} {mid!r} 1.0\n")
                    injected_records += 1
    label_rows = 0
    with open(out / "labels.tsv", "w", encoding="utf-8") as fh:
        fh.write("# t src dst label\n")
        for t, snap_labels in enumerate(labeled.labels):
            for (u, v), lab in sorted(snap_labels.items()):
                fh.write(f"{t}\t{registry.label_of(u)}\t{registry.label_of(v)}\t{lab}\n")
                label_rows += 1
    manifest = {
        "command": "inject",
        "version": __version__,
        "input": str(args.input),
        "input_sha256": _sha256(Path(args.input)),
        "schema": args.schema or "src,dst,time,weight",
        "policy": policy,
        "plan": {"n": n, "k_consec": k_consec, "m_gap": m_gap, "start": start},
        "seed": seed,
        "injected_edges": injected_records,
        "label_rows": label_rows,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"injected {injected_records} anomalous edges; labels for {label_rows} edges in {out}")
    return 0


def _read_edge_labels(path, registry) -> LabeledEdgeSet:
    per_t: dict[int, dict[tuple[int, int], int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                t_str, src, dst, lab = line.split()
                t = int(t_str)
                u, v = registry.id_of(src), registry.id_of(dst)
                label = int(lab)
            except (ValueError, KeyError) as exc:
                raise FormatError(str(path), lineno, f"bad edge-label line: {exc}") from None
            if u > v:
                u, v = v, u
            per_t.setdefault(t, {})[(u, v)] = label
    t_max = max(per_t) if per_t else -1
    return LabeledEdgeSet([per_t.get(t, {}) for t in range(t_max + 1)])


def cmd_eval(args, parser) -> int:
    es = load_stream(args.emb_dir)
    cls = ClassifierSettings(reg=args.reg, epochs=args.cls_epochs, lr=args.cls_lr)
    seed = args.seed if args.seed is not None else 0
    # content hashes (not paths) so identical runs give byte-identical reports
    inputs = {"version": __version__}
    emb_hash = hashlib.sha256()
    for emb_file in sorted(Path(args.emb_dir).glob("Z_*.emb")):
        emb_hash.update(emb_file.read_bytes())
    inputs["embeddings_sha256"] = emb_hash.hexdigest()
    if args.labels:
        inputs["labels_sha256"] = _sha256(Path(args.labels))
    if args.input:
        inputs["input_sha256"] = _sha256(Path(args.input))
    if args.task == "anomaly":
        if not args.labels:
            parser.error("--labels (edge labels file) is required for the anomaly task")
        labeled = _read_edge_labels(args.labels, es.registry)
        report = run_anomaly_task(es, labeled, op=args.op or "l1", cls=cls)
        metric = report.averages["auc"]
    elif args.task == "link":
        if not args.input:
            parser.error("--input (edge list) is required for the link task")
        policy = _policy(args, parser, es.provenance)
        _, _, seq = _read_graph(args, parser, policy)
        report = run_link_prediction(es, seq, op=args.op or "hadamard", cls=cls, seed=seed)
        metric = report.averages["auc"]
    else:  # node
        if not args.labels:
            parser.error("--labels (node label file) is required for the node task")
        with open(args.labels, "r", encoding="utf-8") as fh:
            labels, _ = read_node_labels(fh, es.registry)
        report = run_node_classification(es, labels, cls=cls)
        metric = report.averages["macro_f1"]
    report.seed = seed
    report.config["inputs"] = inputs
    out_path = Path(args.out) if args.out else Path(args.emb_dir) / "report.json"
    out_path.write_text(report.to_json(), encoding="utf-8")
    print(f"{report.task} average: {metric:.6f}" if metric is not None
          else f"{report.task} average: n/a (no scorable time points)")
    return 0


def cmd_sweep_l(args, parser) -> int:
    raw = [v.strip() for v in args.values.split(",") if v.strip()]
    if not raw:
        parser.error("--values must list at least one L")
    try:
        values = [int(v) for v in raw]
    except ValueError:
        parser.error(f"--values must be integers, got {args.values!r}")
    deduped = list(dict.fromkeys(values))
    if len(deduped) < len(values):
        print("warning: duplicate L values ignored", file=sys.stderr)
    if args.task not in ("node", "link"):
        parser.error("sweep-L supports --task node or link")
    cfg = _build_embed_config(args, parser)
    policy = _policy(args, parser)
    registry, _, seq = _read_graph(args, parser, policy)
    if args.task == "node":
        if not args.labels:
            parser.error("--labels is required for --task node")
        with open(args.labels, "r", encoding="utf-8") as fh:
            labels, _ = read_node_labels(fh, registry)
    cls = ClassifierSettings(reg=args.reg, epochs=args.cls_epochs, lr=args.cls_lr)
    seed = args.seed if args.seed is not None else 0
    rows = []
    for L in deduped:
        cfg_l = dataclasses.replace(cfg, L=L)
        try:
            cfg_l.validate()
        except ConfigError as exc:
            parser.error(str(exc))
        if len(seq) - L + 1 < 2:
            parser.error(f"L={L} leaves fewer than two evaluable snapshots "
                         f"({len(seq)} snapshots total)")
        es = embed_stream(seq, cfg_l)
        if args.task == "node":
            report = run_node_classification(es, labels, cls=cls)
            rows.append((L, report.averages["macro_f1"]))
        else:
            report = run_link_prediction(es, seq, op=args.op or "hadamard", cls=cls, seed=seed)
            rows.append((L, report.averages["auc"]))
    out_path = Path(args.out) if args.out else Path("sweep.csv")
    metric_name = "macro_f1" if args.task == "node" else "auc"
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["L", metric_name])
        for L, value in rows:
            writer.writerow([L, repr(float(value))])
    for L, value in rows:
        print(f"L={L} {metric_name}={value:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lstm-node2vec",
        description="Dynamic network embeddings from temporal walks + LSTM warm-started node2vec",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse an edge list and print a summary")
    _add_graph_inputs(p)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="compute per-snapshot embeddings")
    _add_graph_inputs(p)
    _add_embed_flags(p)
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory for Z_<t>.emb + manifest.json")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("inject", help="inject star anomalies, write edges + labels")
    _add_graph_inputs(p)
    _add_common(p)
    p.add_argument("--n", type=int, default=None, help="edges per star")
    p.add_argument("--k", dest="k_consec", type=int, default=None, help="consecutive snapshots per star (default 3)")
    p.add_argument("--m", dest="m_gap", type=int, default=None, help="gap snapshots between stars (default 2)")
    p.add_argument("--start", type=int, default=None, help="first snapshot eligible for injection (default 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("eval", help="run an evaluation protocol over saved embeddings")
    p.add_argument("--task", choices=["anomaly", "link", "node"], required=True)
    p.add_argument("--emb-dir", required=True, help="directory written by `embed`")
    p.add_argument("--labels", default=None, help="labels file (anomaly: edge labels; node: node labels)")
    p.add_argument("--input", default=None, help="edge list (link task)")
    p.add_argument("--schema", default=None)
    p.add_argument("--snapshots", type=int, default=None)
    p.add_argument("--time-window", dest="time_window", type=float, default=None)
    p.add_argument("--op", choices=["l1", "l2", "hadamard", "average"], default=None,
                   help="edge operator (default: l1 for anomaly, hadamard for link)")
    p.add_argument("--reg", type=float, default=1e-4)
    p.add_argument("--cls-epochs", dest="cls_epochs", type=int, default=300)
    p.add_argument("--cls-lr", dest="cls_lr", type=float, default=0.5)
    p.add_argument("--out", default=None, help="report path (default <emb-dir>/report.json)")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-L", help="embed + evaluate across several window sizes")
    _add_graph_inputs(p)
    _add_embed_flags(p)
    _add_common(p)
    p.add_argument("--values", required=True, help="comma-separated L values, e.g. 3,4,5")
    p.add_argument("--task", choices=["node", "link"], required=True)
    p.add_argument("--labels", default=None, help="node labels file (node task)")
    p.add_argument("--op", choices=["l1", "l2", "hadamard", "average"], default=None)
    p.add_argument("--reg", type=float, default=1e-4)
    p.add_argument("--cls-epochs", dest="cls_epochs", type=int, default=300)
    p.add_argument("--cls-lr", dest="cls_lr", type=float, default=0.5)
    p.add_argument("--out", default=None, help="CSV path (default sweep.csv)")
    p.set_defaults(func=cmd_sweep_l)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (Error, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
