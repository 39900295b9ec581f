"""Downstream evaluation: star-anomaly edge classification, link prediction,
and node classification, with an internal logistic-regression classifier.

All three protocols walk the evaluable time range and train strictly on
information available before the test snapshot. Metric computation (pairwise
AUC with ties at half, macro/micro F1) is implemented here and pinned against
brute-force oracles in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .embedding import EmbeddingMatrix
from .errors import (
    DimensionMismatchError,
    InsufficientNonNeighborsError,
    LengthMismatchError,
    NotEnoughNegativesError,
    SingleClassError,
    TooFewSnapshotsError,
)
from .graphs import Snapshot, SnapshotSequence
from .pipeline import EmbeddingStream
from .seeds import child_rng

EDGE_OPS = ("l1", "l2", "hadamard", "average")

NORMAL = 0
ANOMALOUS = 1


# ---------------------------------------------------------------------------
# anomaly injection

@dataclass(frozen=True)
class InjectionPlan:
    """Star bursts: n new edges from one target, repeated over k_consec
    consecutive snapshots, then m_gap snapshots untouched, and so on."""

    n: int
    k_consec: int
    m_gap: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.k_consec < 1 or self.m_gap < 0:
            raise ValueError("need n >= 1, k_consec >= 1, m_gap >= 0")


@dataclass
class LabeledEdgeSet:
    """Per snapshot: every undirected edge (u < v) mapped to NORMAL/ANOMALOUS."""

    labels: list[dict[tuple[int, int], int]]

    def edges_of(self, t: int) -> list[tuple[tuple[int, int], int]]:
        return sorted(self.labels[t].items())

    def anomalous_count(self) -> int:
        return sum(sum(1 for lab in snap.values() if lab == ANOMALOUS) for snap in self.labels)


def inject_stars(seq: SnapshotSequence, plan: InjectionPlan, start: int = 0):
    """Inject star anomalies from snapshot ``start`` on -> (new stream, labels).

    Each star picks a target uniformly among nodes active at the group's first
    snapshot and n distinct active nodes with no edge to the target in any
    affected snapshot; the same n edges (weight 1) are added to k_consec
    consecutive snapshots. Groups only start where they fit entirely. Every
    pre-existing edge is labeled normal, every injected one anomalous.
    """
    rng = child_rng(plan.seed, "inject-stars")
    t_count = len(seq)
    pair_maps = [{(u, v): w for u, v, w in s.edges()} for s in seq.snapshots]
    labels = [{pair: NORMAL for pair in pm} for pm in pair_maps]
    extra_records = [0] * t_count

    i = start
    while i + plan.k_consec <= t_count:
        active = seq[i].active_nodes()
        if len(active) < plan.n + 1:
            raise InsufficientNonNeighborsError(
                f"snapshot {i}: {len(active)} active nodes cannot host a star of {plan.n} edges"
            )
        target = int(rng.choice(np.asarray(active, dtype=np.int64)))
        excluded = {target}
        for j in range(i, i + plan.k_consec):
            excluded.update(seq[j].neighbor_ids(target))
        candidates = np.asarray([v for v in active if v not in excluded], dtype=np.int64)
        if len(candidates) < plan.n:
            raise InsufficientNonNeighborsError(
                f"snapshot {i}: only {len(candidates)} non-neighbors of node {target}, need {plan.n}"
            )
        spokes = rng.choice(candidates, size=plan.n, replace=False)
        for j in range(i, i + plan.k_consec):
            for s in spokes:
                u, v = (target, int(s)) if target < int(s) else (int(s), target)
                pair_maps[j][(u, v)] = pair_maps[j].get((u, v), 0.0) + 1.0
                labels[j][(u, v)] = ANOMALOUS
                extra_records[j] += 1
        i += plan.k_consec + plan.m_gap

    snaps = tuple(
        Snapshot(t, pair_maps[t], seq[t].edge_count + extra_records[t]) for t in range(t_count)
    )
    return SnapshotSequence(snaps, seq.registry), LabeledEdgeSet(labels)


# ---------------------------------------------------------------------------
# edge features

def edge_embed(z: EmbeddingMatrix, edge: tuple[int, int], op: str = "l1") -> np.ndarray:
    """Combine the two endpoint vectors into one edge feature vector."""
    u, v = edge
    fu = z.vector(u)
    fv = z.vector(v)
    if op == "l1":
        return fu - fv
    if op == "l2":
        return (fu - fv) ** 2
    if op == "hadamard":
        return fu * fv
    if op == "average":
        return (fu + fv) / 2.0
    raise ValueError(f"unknown edge operator {op!r} (choose from {EDGE_OPS})")


def edge_features(z: EmbeddingMatrix, edges, op: str = "l1") -> np.ndarray:
    """Vectorized edge_embed over a list of (u, v) pairs."""
    pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    fu = z.vectors[z.rows_of(pairs[:, 0])]
    fv = z.vectors[z.rows_of(pairs[:, 1])]
    if op == "l1":
        return fu - fv
    if op == "l2":
        return (fu - fv) ** 2
    if op == "hadamard":
        return fu * fv
    if op == "average":
        return (fu + fv) / 2.0
    raise ValueError(f"unknown edge operator {op!r} (choose from {EDGE_OPS})")


# ---------------------------------------------------------------------------
# logistic regression and metrics

@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    reg: float


@dataclass(frozen=True)
class ClassifierSettings:
    reg: float = 1e-4
    epochs: int = 300
    lr: float = 0.5
    standardize: bool = True  # scale features by training mean/std


def train_logreg(features, labels, reg: float = 1e-4, epochs: int = 300, lr: float = 0.5) -> LogRegModel:
    """Full-batch gradient descent on L2-regularized logistic loss.

    Deterministic: parameters start at zero, no sampling anywhere. The bias
    is not regularized.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or len(x) != len(y):
        raise DimensionMismatchError("features must be 2-D with one row per label")
    if len(np.unique(y)) < 2:
        raise SingleClassError("training data must contain both classes")
    n = len(y)
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(epochs):
        err = expit(x @ w + b) - y
        gw = x.T @ err / n + reg * w
        gb = float(err.mean())
        w -= lr * gw
        b -= lr * gb
    return LogRegModel(weights=w, bias=b, reg=reg)


def predict_scores(model: LogRegModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != len(model.weights):
        raise DimensionMismatchError(
            f"features have dim {x.shape[1] if x.ndim == 2 else '?'}, model expects {len(model.weights)}"
        )
    scores = expit(x @ model.weights + model.bias)
    # keep the open interval (0, 1) where expit saturates in float64
    return np.clip(scores, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def auc(scores, labels) -> float:
    """Mann-Whitney statistic: P(random positive scores above random negative),
    ties counted one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if len(s) != len(y):
        raise LengthMismatchError(f"{len(s)} scores vs {len(y)} labels")
    npos = int(np.sum(y == 1))
    nneg = int(np.sum(y == 0))
    if npos == 0 or nneg == 0:
        raise SingleClassError("AUC needs at least one positive and one negative")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # 1-based average rank
        i = j + 1
    rank_sum = float(ranks[np.asarray(y) == 1].sum())
    return (rank_sum - npos * (npos + 1) / 2.0) / (npos * nneg)


def f1_scores(pred, true) -> tuple[float, float]:
    """(macro F1, micro F1). Classes absent from both vectors are ignored;
    a class with zero precision and recall contributes F1 = 0 to the macro."""
    p = np.asarray(pred)
    t = np.asarray(true)
    if len(p) != len(t):
        raise LengthMismatchError(f"{len(p)} predictions vs {len(t)} labels")
    if len(p) == 0:
        raise ValueError("empty input")
    classes = np.unique(np.concatenate([p, t]))
    f1s = []
    tp_all = fp_all = fn_all = 0
    for c in classes:
        tp = int(np.sum((p == c) & (t == c)))
        fp = int(np.sum((p == c) & (t != c)))
        fn = int(np.sum((p != c) & (t == c)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
        tp_all += tp
        fp_all += fp
        fn_all += fn
    precision = tp_all / (tp_all + fp_all) if tp_all + fp_all else 0.0
    recall = tp_all / (tp_all + fn_all) if tp_all + fn_all else 0.0
    micro = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return sum(f1s) / len(f1s), micro


# ---------------------------------------------------------------------------
# negative edge sampling

_ENUMERATE_LIMIT = 200_000  # pair count below which non-edges are enumerated


def _sample_nonedges(s: Snapshot, nodes, count: int, rng: np.random.Generator):
    nodes = sorted(nodes)
    a = len(nodes)
    if a < 2:
        raise NotEnoughNegativesError("fewer than two eligible nodes")
    total_pairs = a * (a - 1) // 2
    if total_pairs <= _ENUMERATE_LIMIT:
        nonedges = [
            (u, v)
            for i, u in enumerate(nodes)
            for v in nodes[i + 1:]
            if not s.has_edge(u, v)
        ]
        if len(nonedges) < count:
            raise NotEnoughNegativesError(f"only {len(nonedges)} non-edges available, need {count}")
        idx = rng.choice(len(nonedges), size=count, replace=False)
        return [nonedges[i] for i in idx]
    picked: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    arr = np.asarray(nodes, dtype=np.int64)
    attempts = 0
    max_attempts = 200 * count + 10_000
    while len(picked) < count:
        attempts += 1
        if attempts > max_attempts:
            raise NotEnoughNegativesError(f"rejection sampling stalled after {attempts} attempts")
        i, j = rng.integers(0, a, size=2)
        if i == j:
            continue
        u, v = int(arr[i]), int(arr[j])
        if u > v:
            u, v = v, u
        if (u, v) in seen or s.has_edge(u, v):
            continue
        seen.add((u, v))
        picked.append((u, v))
    return picked


def sample_negative_edges(s: Snapshot, count: int, rng: np.random.Generator):
    """``count`` distinct node pairs, uniform among active non-adjacent pairs."""
    return _sample_nonedges(s, s.active_nodes(), count, rng)


# ---------------------------------------------------------------------------
# protocol runners

@dataclass
class EvalReport:
    task: str
    points: list[dict]
    averages: dict[str, float | None]  # None when no point could be scored
    config: dict = field(default_factory=dict)
    seed: int | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _fit_and_score(xtr, ytr, xte, cls: ClassifierSettings) -> np.ndarray:
    if cls.standardize:
        mu = xtr.mean(axis=0)
        sd = xtr.std(axis=0)
        sd = np.where(sd == 0.0, 1.0, sd)
        xtr = (xtr - mu) / sd
        xte = (xte - mu) / sd
    model = train_logreg(xtr, ytr, reg=cls.reg, epochs=cls.epochs, lr=cls.lr)
    return predict_scores(model, xte)


def run_anomaly_task(
    es: EmbeddingStream,
    labeled: LabeledEdgeSet,
    op: str = "l1",
    cls: ClassifierSettings = ClassifierSettings(),
) -> EvalReport:
    """Edge classification over time: test each evaluable snapshot's edges
    against a classifier trained on all earlier evaluable snapshots, each edge
    embedded with its own snapshot's table. The first evaluable point has no
    training data and is recorded as skipped, as is any point whose training
    or test set is single-class."""
    ts = [t for t in es.ts() if t < len(labeled.labels)]
    points: list[dict] = []
    aucs: list[float] = []
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    for t in ts:
        items = labeled.edges_of(t)
        feats = edge_features(es.z(t), [pair for pair, _ in items], op)
        labs = np.asarray([lab for _, lab in items], dtype=np.int64)
        if not xs:
            points.append({"t": t, "skipped": "no training data"})
        else:
            xtr = np.vstack(xs)
            ytr = np.concatenate(ys)
            if len(np.unique(ytr)) < 2:
                points.append({"t": t, "skipped": "single-class training set"})
            elif len(np.unique(labs)) < 2:
                points.append({"t": t, "skipped": "single-class test set"})
            else:
                scores = _fit_and_score(xtr, ytr, feats, cls)
                value = auc(scores, labs)
                points.append({"t": t, "auc": value})
                aucs.append(value)
        xs.append(feats)
        ys.append(labs)
    return EvalReport(
        task="anomaly",
        points=points,
        averages={"auc": float(np.mean(aucs)) if aucs else None},
        config={"op": op, "classifier": asdict(cls)},
    )


def run_link_prediction(
    es: EmbeddingStream,
    seq: SnapshotSequence,
    op: str = "hadamard",
    cls: ClassifierSettings = ClassifierSettings(),
    seed: int = 0,
) -> EvalReport:
    """Predict each evaluable snapshot's edges from all earlier evaluable
    snapshots. Training pairs are each snapshot's edges plus an equal count of
    uniformly sampled non-edges, embedded with that snapshot's table; test
    pairs at t are embedded with Z_{t-1} so the features predate the target
    graph. Test edges with an endpoint unseen at t-1 are excluded (they have
    no feature vector that predates them)."""
    ts = es.ts()
    if len(ts) < 2:
        raise TooFewSnapshotsError("link prediction needs at least two evaluable snapshots")
    train_x: list[np.ndarray] = []
    train_y: list[np.ndarray] = []
    points: list[dict] = []
    aucs: list[float] = []
    for pos, t in enumerate(ts):
        if pos > 0:
            zprev = es.z(t - 1)
            test_pos = [(u, v) for u, v, _ in seq[t].edges() if u in zprev and v in zprev]
            if not train_x:
                points.append({"t": t, "skipped": "no training data"})
            elif not test_pos:
                points.append({"t": t, "skipped": "no test edges with known endpoints"})
            else:
                eligible = [v for v in seq[t].active_nodes() if v in zprev]
                try:
                    test_neg = _sample_nonedges(seq[t], eligible, len(test_pos),
                                                child_rng(seed, "lp-test-neg", t))
                except NotEnoughNegativesError:
                    points.append({"t": t, "skipped": "not enough negative test pairs"})
                    test_neg = None
                if test_neg is not None:
                    xte = np.vstack([
                        edge_features(zprev, test_pos, op),
                        edge_features(zprev, test_neg, op),
                    ])
                    yte = np.concatenate([np.ones(len(test_pos)), np.zeros(len(test_neg))])
                    scores = _fit_and_score(np.vstack(train_x), np.concatenate(train_y), xte, cls)
                    value = auc(scores, yte)
                    points.append({"t": t, "auc": value,
                                   "positives": len(test_pos), "negatives": len(test_neg)})
                    aucs.append(value)
        # fold snapshot t into the training pool for later time points;
        # training negatives match positives 1:1, capped by what exists
        pos_edges = [(u, v) for u, v, _ in seq[t].edges()]
        if pos_edges:
            a = len(seq[t].node_set)
            available = a * (a - 1) // 2 - seq[t].num_pairs
            n_neg = min(len(pos_edges), available)
            zt = es.z(t)
            feats = [edge_features(zt, pos_edges, op)]
            ys = [np.ones(len(pos_edges))]
            if n_neg > 0:
                neg_edges = sample_negative_edges(seq[t], n_neg, child_rng(seed, "lp-train-neg", t))
                feats.append(edge_features(zt, neg_edges, op))
                ys.append(np.zeros(n_neg))
            train_x.append(np.vstack(feats))
            train_y.append(np.concatenate(ys))
    return EvalReport(
        task="link_prediction",
        points=points,
        averages={"auc": float(np.mean(aucs)) if aucs else None},
        config={"op": op, "classifier": asdict(cls)},
        seed=seed,
    )


def run_node_classification(
    es: EmbeddingStream,
    labels: dict[int, int],
    cls: ClassifierSettings = ClassifierSettings(),
) -> EvalReport:
    """Classify each evaluable snapshot's labeled nodes with one-vs-rest
    logistic regression trained on the previous snapshot's embeddings. Nodes
    that only appear at t are still scored, with their Z_t features."""
    ts = es.ts()
    if len(ts) < 2:
        raise TooFewSnapshotsError("node classification needs at least two evaluable snapshots")
    all_embedded = set()
    for t in ts:
        all_embedded.update(int(v) for v in es.z(t).node_ids)
    observed_classes = {labels[v] for v in all_embedded if v in labels}
    if len(observed_classes) < 2:
        raise SingleClassError("node labels cover fewer than two classes among embedded nodes")
    points: list[dict] = []
    macros: list[float] = []
    micros: list[float] = []
    for t in ts[1:]:
        zprev = es.z(t - 1)
        zt = es.z(t)
        train_nodes = [int(v) for v in zprev.node_ids if int(v) in labels]
        test_nodes = [int(v) for v in zt.node_ids if int(v) in labels]
        ytr = np.asarray([labels[v] for v in train_nodes])
        if len(train_nodes) == 0 or len(test_nodes) == 0 or len(np.unique(ytr)) < 2:
            points.append({"t": t, "skipped": "single-class or empty training set"})
            continue
        xtr = zprev.vectors[zprev.rows_of(train_nodes)]
        xte = zt.vectors[zt.rows_of(test_nodes)]
        classes = sorted(set(int(c) for c in ytr))
        scores = np.stack(
            [_fit_and_score(xtr, (ytr == c).astype(np.float64), xte, cls) for c in classes],
            axis=1,
        )
        pred = np.asarray(classes)[scores.argmax(axis=1)]
        ytrue = np.asarray([labels[v] for v in test_nodes])
        macro, micro = f1_scores(pred, ytrue)
        points.append({"t": t, "macro_f1": macro, "micro_f1": micro})
        macros.append(macro)
        micros.append(micro)
    return EvalReport(
        task="node_classification",
        points=points,
        averages={
            "macro_f1": float(np.mean(macros)) if macros else None,
            "micro_f1": float(np.mean(micros)) if micros else None,
        },
        config={"classifier": asdict(cls)},
    )
