"""Orchestration across the snapshot stream.

For each time point t with a full L-window of history: generate temporal
walks, train the warm-started LSTM autoencoder on them, hand its input-layer
weights to a skipgram model, train that on second-order walks over the current
snapshot, and record the skipgram input table as Z_t. The previous LSTM model
and Z_{t-1} seed time point t, which keeps consecutive embeddings in one
vector space. Static per-snapshot baselines share the same walk+skipgram
machinery without the history model.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import EmbeddingMatrix, read_embeddings, write_embeddings
from .errors import ConfigError, FormatError, TooFewSnapshotsError
from .graphs import NodeRegistry, Snapshot, SnapshotSequence
from .lstm import init_autoencoder, input_embeddings, train, warm_start
from .seeds import child_int, child_rng
from .skipgram import embeddings, init_skipgram, train_sgns
from .walks import node2vec_walks, temporal_walks


@dataclass(frozen=True)
class EmbedConfig:
    """All knobs of the embedding pipeline, with the published defaults."""

    d: int = 128                 # embedding dimension (= LSTM hidden size)
    L: int = 10                  # temporal window: how many snapshots of history
    k: int = 10                  # temporal walks per node
    p: float = 0.25              # return parameter of the second-order bias
    q: float = 1.0               # in-out parameter
    walks_per_node: int = 10     # static walks per node
    walk_length: int = 80        # static walk length (nodes)
    window: int = 10             # skipgram context window
    negatives: int = 5           # noise samples per positive pair
    epochs_sgns: int = 5
    lr_sgns: tuple[float, float] = (0.025, 1e-4)
    epochs_lstm: int = 20
    batch: int = 32
    lr_adam: tuple[float, float, float, float] = (1e-3, 0.9, 0.999, 1e-8)
    clip: float = 5.0
    bias: str = "uniform"        # temporal sampling: "uniform" | "second_order"
    encoder_layers: int = 1
    seed: int = 0

    def validate(self) -> "EmbedConfig":
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.L < 2:
            raise ConfigError("L must be >= 2")
        if self.p <= 0 or self.q <= 0:
            raise ConfigError("p and q must be > 0")
        for name in ("k", "walks_per_node", "walk_length", "window", "negatives",
                     "epochs_sgns", "epochs_lstm", "batch"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.bias not in ("uniform", "second_order"):
            raise ConfigError(f"unknown bias mode {self.bias!r}")
        if self.encoder_layers not in (1, 2):
            raise ConfigError("encoder_layers must be 1 or 2")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lr_sgns"] = list(self.lr_sgns)
        d["lr_adam"] = list(self.lr_adam)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "EmbedConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "lr_sgns" in kwargs:
            kwargs["lr_sgns"] = tuple(kwargs["lr_sgns"])
        if "lr_adam" in kwargs:
            kwargs["lr_adam"] = tuple(kwargs["lr_adam"])
        return cls(**kwargs)


@dataclass
class EmbeddingStream:
    """Aligned per-snapshot embedding matrices for t = start .. start+len-1."""

    registry: NodeRegistry
    start: int
    matrices: list[EmbeddingMatrix]
    config: EmbedConfig
    provenance: dict = field(default_factory=dict)

    def ts(self) -> list[int]:
        return list(range(self.start, self.start + len(self.matrices)))

    def has(self, t: int) -> bool:
        return self.start <= t < self.start + len(self.matrices)

    def z(self, t: int) -> EmbeddingMatrix:
        if not self.has(t):
            raise KeyError(f"no embeddings for snapshot {t} (have {self.start}..{self.start + len(self.matrices) - 1})")
        return self.matrices[t - self.start]


def embed_snapshot_static(s: Snapshot, cfg: EmbedConfig) -> EmbeddingMatrix:
    """Static baseline for one snapshot: second-order walks + skipgram from
    random initialization. p = q = 1 gives the first-order (uniform-walk)
    baseline."""
    cfg.validate()
    if not s.node_set:
        return EmbeddingMatrix(np.empty(0, dtype=np.int64), np.zeros((0, cfg.d)))
    sw = node2vec_walks(s, cfg.p, cfg.q, cfg.walks_per_node, cfg.walk_length,
                        seed=child_int(cfg.seed, "static-walks", s.index))
    sg = init_skipgram(s.active_nodes(), cfg.d, sw, warm=None,
                       seed=child_int(cfg.seed, "static-sg-init", s.index))
    train_sgns(sg, sw, window=cfg.window, negatives=cfg.negatives,
               epochs=cfg.epochs_sgns, lr=cfg.lr_sgns,
               seed=child_int(cfg.seed, "static-sgns", s.index))
    return embeddings(sg)


def embed_stream_static(seq: SnapshotSequence, cfg: EmbedConfig, method: str = "node2vec") -> EmbeddingStream:
    """Per-snapshot static baselines over the same evaluable range as the
    history-aware pipeline (t >= L-1), for like-for-like comparisons."""
    cfg.validate()
    if method == "deepwalk":
        cfg = dataclasses.replace(cfg, p=1.0, q=1.0)
    elif method != "node2vec":
        raise ConfigError(f"unknown static method {method!r}")
    if len(seq) < cfg.L:
        raise TooFewSnapshotsError(f"{len(seq)} snapshots < window L={cfg.L}")
    mats = []
    timings = []
    for t in range(cfg.L - 1, len(seq)):
        t0 = time.perf_counter()
        mats.append(embed_snapshot_static(seq[t], cfg))
        timings.append(time.perf_counter() - t0)
    return EmbeddingStream(seq.registry, cfg.L - 1, mats, cfg,
                           provenance={"method": method, "seed": cfg.seed, "timings": timings})


def embed_stream(seq: SnapshotSequence, cfg: EmbedConfig, observer=None) -> EmbeddingStream:
    """The full history-aware pipeline over every t with a complete window.

    Per time point: (1) temporal walks over snapshots [t-L+1, t] for nodes of
    the current snapshot; (2) an LSTM autoencoder, warm-started from the
    previous time point's model and Z_{t-1}, trained on those walks; (3) a
    skipgram model initialized from the LSTM input-layer table; (4) trained on
    second-order walks over the current snapshot; (5) its input table recorded
    as Z_t. Fully deterministic given the config seed.

    ``observer(t, stage, payload)``, when given, is called at each stage
    ("lstm_initialized", "lstm_trained", "skipgram_initialized", "embedded")
    with live objects; copy anything you keep.
    """
    cfg.validate()
    if len(seq) < cfg.L:
        raise TooFewSnapshotsError(f"{len(seq)} snapshots < window L={cfg.L}")
    notify = observer or (lambda t, stage, payload: None)
    prev_model = None
    prev_z: EmbeddingMatrix | None = None
    mats = []
    timings = []
    for t in range(cfg.L - 1, len(seq)):
        t0 = time.perf_counter()
        active = seq[t].active_nodes()
        if not active:  # empty snapshot: nothing to embed at this time point
            z = EmbeddingMatrix(np.empty(0, dtype=np.int64), np.zeros((0, cfg.d)))
            notify(t, "embedded", {"z": z})
            mats.append(z)
            prev_z = z
            timings.append(time.perf_counter() - t0)
            continue
        tw = temporal_walks(seq, t, cfg.L, cfg.k, seed=child_int(cfg.seed, "twalks", t),
                            bias=cfg.bias, p=cfg.p, q=cfg.q)
        vocab = sorted(set(active) | tw.vocab)
        model = init_autoencoder(vocab, cfg.d, child_rng(cfg.seed, "lstm-init", t),
                                 encoder_layers=cfg.encoder_layers)
        warm_start(model, prev_model, prev_z)
        notify(t, "lstm_initialized", {"model": model, "walks": tw})
        if len(tw):
            train(model, tw, epochs=cfg.epochs_lstm, adam=cfg.lr_adam, batch=cfg.batch,
                  clip=cfg.clip, rng=child_rng(cfg.seed, "lstm-train", t))
        notify(t, "lstm_trained", {"model": model})
        sw = node2vec_walks(seq[t], cfg.p, cfg.q, cfg.walks_per_node, cfg.walk_length,
                            seed=child_int(cfg.seed, "swalks", t))
        sg = init_skipgram(active, cfg.d, sw, warm=input_embeddings(model),
                           seed=child_int(cfg.seed, "sg-init", t))
        notify(t, "skipgram_initialized", {"skipgram": sg, "lstm": model})
        train_sgns(sg, sw, window=cfg.window, negatives=cfg.negatives,
                   epochs=cfg.epochs_sgns, lr=cfg.lr_sgns,
                   seed=child_int(cfg.seed, "sgns", t))
        z = embeddings(sg)
        notify(t, "embedded", {"z": z})
        mats.append(z)
        prev_model = model
        prev_z = z
        timings.append(time.perf_counter() - t0)
    return EmbeddingStream(seq.registry, cfg.L - 1, mats, cfg,
                           provenance={"method": "lstm-node2vec", "seed": cfg.seed, "timings": timings})


# ---------------------------------------------------------------------------
# on-disk layout: Z_<t>.emb per time point plus manifest.json

_MANIFEST_FORMAT = "embedding-stream-v1"


def save_stream(es: EmbeddingStream, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for t, mat in zip(es.ts(), es.matrices):
        write_embeddings(mat, es.registry, out / f"Z_{t}.emb")
    manifest = {
        "format": _MANIFEST_FORMAT,
        "start": es.start,
        "count": len(es.matrices),
        "config": es.config.to_dict(),
        "nodes": es.registry.labels(),
        "provenance": es.provenance,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_stream(in_dir) -> EmbeddingStream:
    path = Path(in_dir)
    manifest_path = path / "manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != _MANIFEST_FORMAT:
        raise FormatError(str(manifest_path), 1, f"unrecognized manifest format {manifest.get('format')!r}")
    registry = NodeRegistry()
    for label in manifest["nodes"]:
        registry.add(label)
    start = int(manifest["start"])
    count = int(manifest["count"])
    mats = [read_embeddings(path / f"Z_{start + i}.emb", registry) for i in range(count)]
    cfg = EmbedConfig.from_dict(manifest["config"])
    return EmbeddingStream(registry, start, mats, cfg, provenance=manifest.get("provenance", {}))
