"""Skipgram with negative sampling over walk corpora.

Training maximizes sigma(f(u).g(c)) for every (center, context) pair within a
window along each walk, against ``negatives`` noise contexts drawn from the
unigram^0.75 distribution, by sequential per-pair SGD with a linearly decaying
learning rate; the canonical word2vec recipe. The inner loop is compiled with
numba; its interpreted twin (``_sgns_epoch.py_func``) runs the identical code
path and is used in tests to pin the kernel's semantics.

In-table rows warm-started from an external embedding table are copied
bitwise, which is how the history model hands its representation over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

from .embedding import EmbeddingMatrix
from .errors import EmptyCorpusError, OutOfVocabError, ShapeMismatchError
from .seeds import child_int
from .walks import build_alias_table

# scores are clamped before exp() so the interpreted and compiled paths agree
# (math.exp overflow raises in Python but yields inf in compiled code);
# sigmoid(30) is within 1e-13 of 1 so the clamp is numerically invisible.
_SCORE_CLAMP = 30.0


@dataclass
class SkipgramModel:
    node_ids: np.ndarray    # global ids, sorted
    in_vecs: np.ndarray     # (V, d) the representation being learned
    out_vecs: np.ndarray    # (V, d) context table
    noise_dist: np.ndarray  # (V,) unigram^0.75, sums to 1
    noise_rows: np.ndarray  # rows with positive noise mass
    noise_prob: np.ndarray  # alias table over noise_rows
    noise_alias: np.ndarray

    @property
    def dim(self) -> int:
        return self.in_vecs.shape[1]

    @property
    def vocab_size(self) -> int:
        return len(self.node_ids)

    def rows(self, node_ids) -> np.ndarray:
        ids = np.asarray(node_ids, dtype=np.int64)
        idx = np.searchsorted(self.node_ids, ids)
        clipped = np.minimum(idx, self.vocab_size - 1)
        bad = self.node_ids[clipped] != ids
        if np.any(bad):
            raise OutOfVocabError(f"ids not in skipgram vocabulary: {ids[bad][:5].tolist()}")
        return idx


def init_skipgram(vocab, dim: int, corpus, warm: EmbeddingMatrix | None = None, seed: int = 0) -> SkipgramModel:
    """Build a model: warm rows copied bitwise, the rest uniform in
    [-0.5/d, 0.5/d]; context table all zeros; noise distribution from corpus
    token counts raised to 0.75 and normalized.

    ``vocab`` is either a vocabulary size (ids 0..n-1) or an iterable of
    global node ids.
    """
    if isinstance(vocab, (int, np.integer)):
        node_ids = np.arange(int(vocab), dtype=np.int64)
    else:
        node_ids = np.asarray(sorted({int(i) for i in vocab}), dtype=np.int64)
    v = len(node_ids)
    if v == 0:
        raise ValueError("empty vocabulary")
    rng = np.random.default_rng(seed)
    bound = 0.5 / dim
    in_vecs = rng.uniform(-bound, bound, size=(v, dim))
    if warm is not None:
        if warm.dim != dim:
            raise ShapeMismatchError(f"warm table dim {warm.dim} != requested dim {dim}")
        shared = np.intersect1d(node_ids, warm.node_ids)
        if len(shared):
            idx = np.searchsorted(node_ids, shared)
            in_vecs[idx] = warm.vectors[warm.rows_of(shared)]
    out_vecs = np.zeros((v, dim))

    counts = np.zeros(v)
    lookup = {int(nid): i for i, nid in enumerate(node_ids)}
    for walk in corpus:
        nodes = walk.nodes if hasattr(walk, "nodes") else walk
        for nid in nodes:
            row = lookup.get(int(nid))
            if row is None:
                raise OutOfVocabError(f"corpus token {nid} not in vocabulary")
            counts[row] += 1.0
    if counts.sum() == 0:
        noise = np.full(v, 1.0 / v)  # degenerate corpus: fall back to uniform
    else:
        noise = counts**0.75
        noise /= noise.sum()
    support = np.flatnonzero(noise > 0).astype(np.int64)
    table = build_alias_table(noise[support])
    return SkipgramModel(
        node_ids=node_ids,
        in_vecs=in_vecs,
        out_vecs=out_vecs,
        noise_dist=noise,
        noise_rows=support,
        noise_prob=table.prob,
        noise_alias=table.alias,
    )


def embeddings(model: SkipgramModel) -> EmbeddingMatrix:
    """The learned representation table, f(u), as a copy."""
    return EmbeddingMatrix(model.node_ids.copy(), model.in_vecs.copy())


def sample_noise(model: SkipgramModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized draws from the noise distribution (local row indices)."""
    n = len(model.noise_rows)
    slots = np.minimum((rng.random(size) * n).astype(np.int64), n - 1)
    accept = rng.random(size) < model.noise_prob[slots]
    picked = np.where(accept, slots, model.noise_alias[slots])
    return model.noise_rows[picked]


@njit(cache=True)
def _sgns_epoch(tokens, offsets, in_vecs, out_vecs, window, negatives,
                noise_rows, alias_prob, alias_alias,
                lr_start, lr_end, total_updates, update_index, seed):
    """One pass of sequential per-pair SGD over the flattened corpus.

    Returns (sum of pair losses, pair count, next update index). Updates
    in_vecs/out_vecs in place. Context vectors are updated with the center
    vector as-of the start of the pair; the center vector update is applied
    once per pair after all its negatives (word2vec order).
    """
    np.random.seed(seed)
    d = in_vecs.shape[1]
    neu = np.zeros(d)
    n_support = noise_rows.shape[0]
    denom = float(total_updates - 1) if total_updates > 1 else 1.0
    loss_sum = 0.0
    pair_count = 0
    upd = update_index
    for w in range(offsets.shape[0] - 1):
        lo = offsets[w]
        length = offsets[w + 1] - lo
        for i in range(length):
            u = tokens[lo + i]
            jlo = i - window
            if jlo < 0:
                jlo = 0
            jhi = i + window
            if jhi > length - 1:
                jhi = length - 1
            for j in range(jlo, jhi + 1):
                if j == i:
                    continue
                c = tokens[lo + j]
                alpha = lr_start + (lr_end - lr_start) * (upd / denom)
                for k in range(d):
                    neu[k] = 0.0
                # positive context
                s = 0.0
                for k in range(d):
                    s += in_vecs[u, k] * out_vecs[c, k]
                if s > _SCORE_CLAMP:
                    s = _SCORE_CLAMP
                elif s < -_SCORE_CLAMP:
                    s = -_SCORE_CLAMP
                if s > 0.0:
                    loss_sum += math.log1p(math.exp(-s))
                else:
                    loss_sum += -s + math.log1p(math.exp(s))
                g = 1.0 / (1.0 + math.exp(-s)) - 1.0
                for k in range(d):
                    neu[k] += g * out_vecs[c, k]
                for k in range(d):
                    out_vecs[c, k] -= alpha * g * in_vecs[u, k]
                # noise contexts; draws equal to the positive are resampled
                for _ in range(negatives):
                    target = -1
                    for _ in range(100):
                        r1 = np.random.random()
                        slot = int(r1 * n_support)
                        if slot >= n_support:
                            slot = n_support - 1
                        r2 = np.random.random()
                        if r2 < alias_prob[slot]:
                            cand = noise_rows[slot]
                        else:
                            cand = noise_rows[alias_alias[slot]]
                        if cand != c:
                            target = cand
                            break
                    if target < 0:
                        continue
                    s = 0.0
                    for k in range(d):
                        s += in_vecs[u, k] * out_vecs[target, k]
                    if s > _SCORE_CLAMP:
                        s = _SCORE_CLAMP
                    elif s < -_SCORE_CLAMP:
                        s = -_SCORE_CLAMP
                    if s > 0.0:
                        loss_sum += s + math.log1p(math.exp(-s))
                    else:
                        loss_sum += math.log1p(math.exp(s))
                    g = 1.0 / (1.0 + math.exp(-s))
                    for k in range(d):
                        neu[k] += g * out_vecs[target, k]
                    for k in range(d):
                        out_vecs[target, k] -= alpha * g * in_vecs[u, k]
                for k in range(d):
                    in_vecs[u, k] -= alpha * neu[k]
                pair_count += 1
                upd += 1
    return loss_sum, pair_count, upd


def _pair_count(length: int, window: int) -> int:
    total = 0
    for i in range(length):
        total += min(i + window, length - 1) - max(i - window, 0)
    return total


def pair_loss_and_grads(fu, gc, gnegs):
    """Loss and gradients for one (center, context, negatives) tuple.

    Reference for the kernel's per-pair math; used by the finite-difference
    gradient test.
    """
    fu = np.asarray(fu, dtype=np.float64)
    gc = np.asarray(gc, dtype=np.float64)
    gnegs = np.asarray(gnegs, dtype=np.float64)
    s = np.clip(fu @ gc, -_SCORE_CLAMP, _SCORE_CLAMP)
    loss = float(np.log1p(np.exp(-abs(s))) + max(-s, 0.0))
    g = 1.0 / (1.0 + np.exp(-s)) - 1.0
    dfu = g * gc
    dgc = g * fu
    dgnegs = np.zeros_like(gnegs)
    for r in range(len(gnegs)):
        sn = np.clip(fu @ gnegs[r], -_SCORE_CLAMP, _SCORE_CLAMP)
        loss += float(np.log1p(np.exp(-abs(sn))) + max(sn, 0.0))
        gn = 1.0 / (1.0 + np.exp(-sn))
        dfu = dfu + gn * gnegs[r]
        dgnegs[r] = gn * fu
    return loss, dfu, dgc, dgnegs


def train_sgns(
    model: SkipgramModel,
    corpus,
    window: int = 10,
    negatives: int = 5,
    epochs: int = 5,
    lr: tuple[float, float] = (0.025, 1e-4),
    seed: int = 0,
    _interpreted: bool = False,
) -> tuple[SkipgramModel, list[float]]:
    """Train in place -> (model, per-epoch mean pair loss).

    The learning rate decays linearly from lr[0] at the first (center,
    context) update to lr[1] at the last across all epochs. Walks are
    processed in corpus order; every draw derives from ``seed``.
    ``_interpreted`` routes through the uncompiled twin (tests only).
    """
    if window < 1 or negatives < 1 or epochs < 1:
        raise ValueError("window, negatives, epochs must all be >= 1")
    walks = [w.nodes if hasattr(w, "nodes") else tuple(w) for w in corpus]
    if not walks:
        raise EmptyCorpusError("no walks to train on")
    rows = [model.rows(w) for w in walks]
    tokens = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    tokens = tokens.astype(np.int64)
    offsets = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum([len(r) for r in rows], out=offsets[1:])
    per_epoch = sum(_pair_count(len(r), window) for r in rows)
    total_updates = per_epoch * epochs
    fn = _sgns_epoch.py_func if (_interpreted and hasattr(_sgns_epoch, "py_func")) else _sgns_epoch
    losses = []
    upd = 0
    for ep in range(epochs):
        loss_sum, pairs, upd = fn(
            tokens, offsets, model.in_vecs, model.out_vecs,
            int(window), int(negatives),
            model.noise_rows, model.noise_prob, model.noise_alias,
            float(lr[0]), float(lr[1]), total_updates, upd,
            child_int(seed, "sgns-epoch", ep),
        )
        assert pairs == per_epoch, "pair-count precomputation out of sync with the kernel"
        losses.append(loss_sum / pairs if pairs else 0.0)
    return model, losses
