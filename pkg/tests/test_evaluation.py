import numpy as np
import pytest

from lstm_node2vec.embedding import EmbeddingMatrix
from lstm_node2vec.errors import (
    DimensionMismatchError,
    InsufficientNonNeighborsError,
    LengthMismatchError,
    MissingNodeError,
    NotEnoughNegativesError,
    SingleClassError,
)
from lstm_node2vec.evaluation import (
    ANOMALOUS,
    InjectionPlan,
    LabeledEdgeSet,
    auc,
    edge_embed,
    f1_scores,
    inject_stars,
    predict_scores,
    run_anomaly_task,
    run_link_prediction,
    run_node_classification,
    sample_negative_edges,
    train_logreg,
)
from lstm_node2vec.pipeline import EmbedConfig, EmbeddingStream
from lstm_node2vec.graphs import NodeRegistry

from synth import build_snapshot, stream_of_pairs


# ---------------------------------------------------------------------------
# metric oracles

def auc_brute_force(scores, labels):
    """Pairwise enumeration: P(pos > neg) with ties at one half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else (0.5 if p == n else 0.0)
    return total / (len(pos) * len(neg))


def f1_brute_force(pred, true):
    classes = sorted(set(pred) | set(true))
    per_class = []
    tp_all = fp_all = fn_all = 0
    for c in classes:
        tp = sum(1 for p, t in zip(pred, true) if p == c and t == c)
        fp = sum(1 for p, t in zip(pred, true) if p == c and t != c)
        fn = sum(1 for p, t in zip(pred, true) if p != c and t == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        per_class.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
        tp_all, fp_all, fn_all = tp_all + tp, fp_all + fp, fn_all + fn
    prec = tp_all / (tp_all + fp_all) if tp_all + fp_all else 0.0
    rec = tp_all / (tp_all + fn_all) if tp_all + fn_all else 0.0
    micro = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return sum(per_class) / len(per_class), micro


def test_auc_perfect_ranking():
    assert auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0


def test_auc_frozen_example():
    # positives {0.9, 0.3} vs negatives {0.2, 0.8}: 3 of 4 pairs ordered
    assert auc([0.9, 0.2, 0.8, 0.3], [1, 0, 0, 1]) == 0.75
    assert auc_brute_force([0.9, 0.2, 0.8, 0.3], [1, 0, 0, 1]) == 0.75


def test_auc_all_ties():
    assert auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5


def test_auc_single_class():
    with pytest.raises(SingleClassError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(LengthMismatchError):
        auc([0.1], [1, 0])


def test_auc_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(2, 13))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = np.round(rng.random(n), 2)  # coarse grid to exercise ties
        assert auc(scores, labels) == pytest.approx(auc_brute_force(scores, labels), abs=1e-12)


def test_f1_perfect_and_single_class():
    assert f1_scores([1, 0, 2], [1, 0, 2]) == (1.0, 1.0)
    assert f1_scores([1, 1, 1], [1, 1, 1]) == (1.0, 1.0)


def test_f1_all_one_class_predictions():
    # two balanced classes, everything predicted as class 0
    macro, micro = f1_scores([0, 0, 0, 0], [0, 0, 1, 1])
    assert macro == pytest.approx(1 / 3)
    assert micro == pytest.approx(0.5)


def test_f1_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(1)
    for _ in range(300):
        n = int(rng.integers(1, 11))
        pred = rng.integers(0, 3, size=n).tolist()
        true = rng.integers(0, 3, size=n).tolist()
        got = f1_scores(pred, true)
        want = f1_brute_force(pred, true)
        assert got[0] == pytest.approx(want[0], abs=1e-12)
        assert got[1] == pytest.approx(want[1], abs=1e-12)


def test_f1_length_mismatch():
    with pytest.raises(LengthMismatchError):
        f1_scores([0, 1], [0])


# ---------------------------------------------------------------------------
# logistic regression

def test_logreg_separable():
    model = train_logreg([[-1.0], [1.0]], [0, 1], epochs=200, lr=0.5)
    scores = predict_scores(model, [[-1.0], [1.0]])
    assert scores[1] > scores[0]


def test_logreg_zero_epochs_predicts_half():
    model = train_logreg([[1.0], [2.0]], [0, 1], epochs=0)
    assert np.allclose(predict_scores(model, [[5.0], [-3.0]]), 0.5)


def test_logreg_first_gradient_closed_form():
    # at w = 0, b = 0 the gradient is mean((sigma(0) - y) x) + reg*w = mean((0.5 - y) x)
    x = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    y = np.array([0.0, 1.0, 1.0])
    lr = 0.3
    model = train_logreg(x, y, reg=0.0, epochs=1, lr=lr)
    expected_w = -lr * (x.T @ (0.5 - y)) / len(y)
    expected_b = -lr * float(np.mean(0.5 - y))
    assert np.allclose(model.weights, expected_w)
    assert model.bias == pytest.approx(expected_b)


def test_logreg_single_class():
    with pytest.raises(SingleClassError):
        train_logreg([[1.0], [2.0]], [1, 1])


def test_predict_scores_contract():
    model = train_logreg([[-1.0], [1.0]], [0, 1], epochs=50)
    with pytest.raises(DimensionMismatchError):
        predict_scores(model, [[1.0, 2.0]])
    scores = predict_scores(model, [[-100.0], [0.0], [100.0]])
    assert np.all(scores > 0.0) and np.all(scores < 1.0)
    assert scores[0] < scores[1] < scores[2]


# ---------------------------------------------------------------------------
# edge operators

def test_edge_ops():
    z = EmbeddingMatrix(np.array([0, 1]), np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.array_equal(edge_embed(z, (0, 1), "l1"), [-2.0, -2.0])
    assert np.array_equal(edge_embed(z, (0, 1), "l2"), [4.0, 4.0])
    assert np.array_equal(edge_embed(z, (0, 1), "hadamard"), [3.0, 8.0])
    assert np.array_equal(edge_embed(z, (0, 1), "average"), [2.0, 3.0])
    assert np.array_equal(edge_embed(z, (0, 0), "l1"), [0.0, 0.0])
    with pytest.raises(MissingNodeError):
        edge_embed(z, (0, 7), "l1")
    with pytest.raises(ValueError):
        edge_embed(z, (0, 1), "l3")


# ---------------------------------------------------------------------------
# star injection

def ring_pairs(n, offset=0):
    return {(min(i + offset, offset + (i + 1) % n), max(i + offset, offset + (i + 1) % n)): 1.0
            for i in range(n)}


def test_inject_star_degree_and_counts():
    t_count = 10
    seq = stream_of_pairs([ring_pairs(30) for _ in range(t_count)])
    plan = InjectionPlan(n=5, k_consec=3, m_gap=2, seed=1)
    injected, labeled = inject_stars(seq, plan, start=0)
    # groups at {0,1,2} and {5,6,7}
    affected = [0, 1, 2, 5, 6, 7]
    for t in range(t_count):
        n_anom = sum(1 for lab in labeled.labels[t].values() if lab == ANOMALOUS)
        assert n_anom == (5 if t in affected else 0), t
    assert labeled.anomalous_count() == 2 * 5 * 3
    # each group's star raises its target's degree by exactly n
    for group_start in (0, 5):
        stars = [pair for pair, lab in labeled.labels[group_start].items() if lab == ANOMALOUS]
        targets = set.intersection(*[set(p) for p in stars])
        assert len(targets) == 1
        target = targets.pop()
        for t in range(group_start, group_start + 3):
            assert injected[t].degree(target) == seq[t].degree(target) + 5


def test_injected_edges_never_duplicate_originals():
    seq = stream_of_pairs([ring_pairs(25) for _ in range(6)])
    plan = InjectionPlan(n=4, k_consec=2, m_gap=1, seed=3)
    injected, labeled = inject_stars(seq, plan)
    for t in range(6):
        original = {(u, v) for u, v, _ in seq[t].edges()}
        anomalous = {pair for pair, lab in labeled.labels[t].items() if lab == ANOMALOUS}
        assert not (original & anomalous)
        assert {(u, v) for u, v, _ in injected[t].edges()} == original | anomalous


def test_inject_insufficient_non_neighbors():
    # complete graph: nobody has non-neighbors
    from synth import clique_pairs

    seq = stream_of_pairs([clique_pairs(range(5))])
    with pytest.raises(InsufficientNonNeighborsError):
        inject_stars(seq, InjectionPlan(n=2, k_consec=1, m_gap=0, seed=0))


def test_inject_deterministic():
    seq = stream_of_pairs([ring_pairs(20) for _ in range(5)])
    plan = InjectionPlan(n=3, k_consec=2, m_gap=0, seed=9)
    a = inject_stars(seq, plan)[1]
    b = inject_stars(seq, plan)[1]
    assert a.labels == b.labels


def test_injection_plan_validation():
    with pytest.raises(ValueError):
        InjectionPlan(n=0, k_consec=1, m_gap=0)


# ---------------------------------------------------------------------------
# negative sampling

def test_negative_sampling_complete_graph():
    from synth import clique_pairs

    s = build_snapshot(clique_pairs(range(3)))
    with pytest.raises(NotEnoughNegativesError):
        sample_negative_edges(s, 1, np.random.default_rng(0))


def test_negative_sampling_unique_non_edge():
    s = build_snapshot({(0, 1): 1.0, (1, 2): 1.0})
    got = sample_negative_edges(s, 1, np.random.default_rng(0))
    assert got == [(0, 2)]


def test_negative_samples_never_in_adjacency():
    s = build_snapshot(ring_pairs(40))
    rng = np.random.default_rng(4)
    pairs = sample_negative_edges(s, 100, rng)
    assert len(set(pairs)) == 100
    for u, v in pairs:
        assert not s.has_edge(u, v)
        assert u in s.node_set and v in s.node_set


# ---------------------------------------------------------------------------
# protocol runners over hand-built embedding streams

def clustered_stream(t_count, n=40, sep=4.0, d=8, noise=0.3, seed=0, start=0):
    """Embeddings with two clusters: first half near 0, second half near sep."""
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(t_count):
        vecs = rng.normal(scale=noise, size=(n, d))
        vecs[n // 2:, 0] += sep
        mats.append(EmbeddingMatrix(np.arange(n), vecs))
    registry = NodeRegistry()
    for i in range(n):
        registry.add(f"n{i}")
    return EmbeddingStream(registry, start, mats, EmbedConfig(), provenance={})


def separated_anomaly_fixture(t_count=5, n=40, seed=0):
    """Normal edges join same-cluster nodes, anomalous edges cross clusters,
    so l1 features are separated by construction."""
    rng = np.random.default_rng(seed)
    es = clustered_stream(t_count, n=n, seed=seed)
    half = n // 2
    labels = []
    for _ in range(t_count):
        snap_labels = {}
        for _ in range(60):
            u, v = sorted(rng.choice(half, size=2, replace=False))
            snap_labels[(int(u), int(v))] = 0
            u, v = sorted(half + rng.choice(half, size=2, replace=False))
            snap_labels[(int(u), int(v))] = 0
        for _ in range(20):
            u = int(rng.integers(0, half))
            v = int(rng.integers(half, n))
            snap_labels[(u, v)] = 1
        labels.append(snap_labels)
    return es, LabeledEdgeSet(labels)


def test_anomaly_task_separated_features():
    es, labeled = separated_anomaly_fixture()
    report = run_anomaly_task(es, labeled, op="l1")
    assert report.points[0].get("skipped") == "no training data"
    scored = [p for p in report.points if "auc" in p]
    assert len(scored) == len(report.points) - 1
    assert report.averages["auc"] >= 0.95
    assert report.averages["auc"] == pytest.approx(np.mean([p["auc"] for p in scored]))


def test_anomaly_task_shuffled_labels_near_chance():
    vals = []
    for seed in range(5):
        es, labeled = separated_anomaly_fixture(seed=seed)
        rng = np.random.default_rng(1000 + seed)
        for snap in labeled.labels:
            values = np.array(list(snap.values()))
            rng.shuffle(values)
            for key, lab in zip(list(snap.keys()), values):
                snap[key] = int(lab)
        report = run_anomaly_task(es, labeled, op="l1")
        vals.append(report.averages["auc"])
    assert 0.45 <= float(np.mean(vals)) <= 0.55


def two_clique_seq(t_count, clique=8):
    from synth import clique_pairs

    pairs = clique_pairs(range(clique))
    pairs.update(clique_pairs(range(clique, 2 * clique)))
    pairs[(0, clique)] = 1.0
    return stream_of_pairs([dict(pairs) for _ in range(t_count)])


def test_link_prediction_separated_embeddings():
    t_count = 5
    seq = two_clique_seq(t_count)
    es = clustered_stream(t_count, n=16, sep=3.0, noise=0.2, seed=2)
    report = run_link_prediction(es, seq, op="hadamard", seed=0)
    scored = [p for p in report.points if "auc" in p]
    assert scored, report.points
    assert report.averages["auc"] >= 0.8


def test_link_prediction_random_embeddings_near_chance():
    t_count = 5
    seq = two_clique_seq(t_count)
    vals = []
    for seed in range(5):
        es = clustered_stream(t_count, n=16, sep=0.0, noise=1.0, seed=50 + seed)
        report = run_link_prediction(es, seq, op="hadamard", seed=seed)
        vals.append(report.averages["auc"])
    assert 0.4 <= float(np.mean(vals)) <= 0.6


def test_link_prediction_ratio_is_one_to_one():
    t_count = 3
    seq = two_clique_seq(t_count)
    es = clustered_stream(t_count, n=16, sep=2.0, seed=3)
    report = run_link_prediction(es, seq, op="l2", seed=1)
    scored = [p for p in report.points if "auc" in p]
    assert scored  # first evaluable point already has training data
    for point in scored:
        assert point["positives"] == point["negatives"] > 0


def test_runners_deterministic_given_seed():
    t_count = 4
    seq = two_clique_seq(t_count)
    es = clustered_stream(t_count, n=16, sep=2.0, seed=4)
    a = run_link_prediction(es, seq, op="hadamard", seed=9)
    b = run_link_prediction(es, seq, op="hadamard", seed=9)
    assert a.points == b.points
    es2, labeled = separated_anomaly_fixture(t_count=3, seed=2)
    r1 = run_anomaly_task(es2, labeled, op="l1")
    r2 = run_anomaly_task(es2, labeled, op="l1")
    assert r1.points == r2.points


def test_node_classification_community_recovery():
    es = clustered_stream(4, n=40, sep=4.0, seed=4)
    labels = {i: (0 if i < 20 else 1) for i in range(40)}
    report = run_node_classification(es, labels)
    assert report.averages["macro_f1"] >= 0.8
    assert report.averages["micro_f1"] >= 0.8


def test_node_classification_random_labels_near_chance():
    vals = []
    for seed in range(5):
        es = clustered_stream(4, n=40, sep=4.0, seed=5 + seed)
        rng = np.random.default_rng(200 + seed)
        labels = {i: int(rng.integers(0, 2)) for i in range(40)}
        if len(set(labels.values())) < 2:
            labels[0] = 1 - labels[0]
        report = run_node_classification(es, labels)
        vals.append(report.averages["macro_f1"])
    assert 0.4 <= float(np.mean(vals)) <= 0.6


def test_node_classification_scores_nodes_absent_from_previous_snapshot():
    # node 40 exists only in the second matrix; it must still be scored
    rng = np.random.default_rng(6)
    m0 = EmbeddingMatrix(np.arange(40), rng.normal(size=(40, 4)))
    vecs1 = rng.normal(size=(41, 4))
    vecs1[:20, 0] -= 3
    vecs1[20:, 0] += 3
    m0.vectors[:20, 0] -= 3
    m0.vectors[20:, 0] += 3
    m1 = EmbeddingMatrix(np.arange(41), vecs1)
    registry = NodeRegistry()
    for i in range(41):
        registry.add(f"n{i}")
    es = EmbeddingStream(registry, 0, [m0, m1], EmbedConfig())
    labels = {i: (0 if i < 20 else 1) for i in range(41)}
    report = run_node_classification(es, labels)
    assert not report.points[0].get("skipped")


def test_node_classification_single_class_error():
    es = clustered_stream(3, n=10, seed=7)
    with pytest.raises(SingleClassError):
        run_node_classification(es, {i: 0 for i in range(10)})


def test_report_json_round_trip():
    import json

    es, labeled = separated_anomaly_fixture(t_count=3)
    report = run_anomaly_task(es, labeled, op="l1")
    data = json.loads(report.to_json())
    assert data["task"] == "anomaly"
    assert len(data["points"]) == 3
    assert "auc" in data["averages"]
