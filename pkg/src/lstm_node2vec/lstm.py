"""LSTM autoencoder over node-id sequences, trained to reproduce its input.

The encoder consumes the embedding of each walk element left to right and
compresses the walk into its final (hidden, cell) state; the decoder starts
from that state and, with teacher forcing, emits a softmax over the vocabulary
at every position. After training, the input embedding table holds the node
representations. Everything is plain numpy: forward pass, backpropagation
through time, Adam, and gradient checking live here.

Gate equations, per step, over z = [h_prev, x]:

    i = sigmoid(Wi z + bi)        input gate
    f = sigmoid(Wf z + bf)        forget gate
    o = sigmoid(Wo z + bo)        output gate
    g = tanh(Wc z + bc)           candidate cell
    c = f * c_prev + i * g
    h = o * tanh(c)
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .embedding import EmbeddingMatrix
from .errors import (
    DimensionMismatchError,
    EmptyCorpusError,
    OutOfVocabError,
    ShapeMismatchError,
)

_GATE_NAMES = ("wf", "wi", "wo", "wc", "bf", "bi", "bo", "bc")


@dataclass
class LstmParams:
    """One LSTM layer: four gate weight matrices over [h_prev, x], four biases."""

    wf: np.ndarray
    wi: np.ndarray
    wo: np.ndarray
    wc: np.ndarray
    bf: np.ndarray
    bi: np.ndarray
    bo: np.ndarray
    bc: np.ndarray

    @property
    def hidden(self) -> int:
        return self.wf.shape[0]

    @property
    def in_dim(self) -> int:
        return self.wf.shape[1] - self.wf.shape[0]

    def copy(self) -> "LstmParams":
        return LstmParams(**{n: getattr(self, n).copy() for n in _GATE_NAMES})


def _init_params(hidden: int, in_dim: int, rng: np.random.Generator) -> LstmParams:
    bound = 1.0 / np.sqrt(hidden + in_dim)
    ws = {n: rng.uniform(-bound, bound, size=(hidden, hidden + in_dim)) for n in ("wf", "wi", "wo", "wc")}
    bs = {n: np.zeros(hidden) for n in ("bf", "bi", "bo", "bc")}
    bs["bf"] = np.ones(hidden)  # forget bias at 1 aids gradient flow early on
    return LstmParams(**ws, **bs)


class LstmAutoencoder:
    """Encoder/decoder parameter set over a fixed node vocabulary.

    ``node_ids`` are global graph ids (sorted); internally rows 0..V-1 map to
    them and row V is a reserved start-of-sequence token that is never part of
    the exported embeddings. Hidden size equals the embedding dimension so the
    compressed state and the embeddings live in the same space.
    """

    def __init__(self, node_ids, dim: int, input_embed, encoder, decoder, out_w, out_b):
        self.node_ids = np.asarray(node_ids, dtype=np.int64)
        if len(self.node_ids) > 1 and not np.all(np.diff(self.node_ids) > 0):
            raise ValueError("node_ids must be sorted ascending and unique")
        self.dim = dim
        self.input_embed = input_embed  # (V+1, dim); last row = start token
        self.encoder = encoder          # list[LstmParams], 1 or 2 layers
        self.decoder = decoder          # LstmParams
        self.out_w = out_w              # (V, dim)
        self.out_b = out_b              # (V,)

    @property
    def vocab_size(self) -> int:
        return len(self.node_ids)

    @property
    def hidden(self) -> int:
        return self.dim

    @property
    def start_row(self) -> int:
        return self.vocab_size

    def rows(self, node_ids) -> np.ndarray:
        """Map global node ids to local rows; OutOfVocabError on unknown ids."""
        ids = np.asarray(node_ids, dtype=np.int64)
        idx = np.searchsorted(self.node_ids, ids)
        clipped = np.minimum(idx, self.vocab_size - 1)
        bad = self.node_ids[clipped] != ids
        if np.any(bad):
            raise OutOfVocabError(f"ids not in model vocabulary: {ids[bad][:5].tolist()}")
        return idx

    def param_items(self):
        """(name, array) pairs in a fixed canonical order."""
        yield "embed", self.input_embed
        for li, p in enumerate(self.encoder):
            for n in _GATE_NAMES:
                yield f"enc{li}.{n}", getattr(p, n)
        for n in _GATE_NAMES:
            yield f"dec.{n}", getattr(self.decoder, n)
        yield "out_w", self.out_w
        yield "out_b", self.out_b

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.param_items()}


def init_autoencoder(node_ids, dim: int, rng: np.random.Generator, encoder_layers: int = 1) -> LstmAutoencoder:
    """Fresh model: embeddings uniform in [-0.5/d, 0.5/d], gate weights
    uniform in +-1/sqrt(hidden+in), forget biases 1, other biases and the
    output projection zero. Draw order is fixed (embeddings, then encoder
    layers, then decoder) so identical rng state gives identical parameters.
    """
    if encoder_layers not in (1, 2):
        raise ValueError("encoder_layers must be 1 or 2")
    node_ids = np.asarray(sorted({int(i) for i in np.asarray(node_ids, dtype=np.int64).ravel()}), dtype=np.int64)
    v = len(node_ids)
    if v == 0:
        raise ValueError("empty vocabulary")
    bound = 0.5 / dim
    input_embed = rng.uniform(-bound, bound, size=(v + 1, dim))
    encoder = [_init_params(dim, dim, rng) for _ in range(encoder_layers)]
    decoder = _init_params(dim, dim, rng)
    out_w = np.zeros((v, dim))
    out_b = np.zeros(v)
    return LstmAutoencoder(node_ids, dim, input_embed, encoder, decoder, out_w, out_b)


# ---------------------------------------------------------------------------
# forward / backward core (batched over same-length walks)

def _step(p: LstmParams, h_prev, c_prev, x):
    z = np.concatenate([h_prev, x], axis=1)
    i = expit(z @ p.wi.T + p.bi)
    f = expit(z @ p.wf.T + p.bf)
    o = expit(z @ p.wo.T + p.bo)
    g = np.tanh(z @ p.wc.T + p.bc)
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = (z, i, f, o, g, c_prev, tanh_c)
    return h, c, cache


def lstm_step(p: LstmParams, h_prev: np.ndarray, c_prev: np.ndarray, x: np.ndarray):
    """Single-vector step through the six gate equations -> (h, c)."""
    if h_prev.shape != (p.hidden,) or c_prev.shape != (p.hidden,) or x.shape != (p.in_dim,):
        raise DimensionMismatchError(
            f"expected h,c of shape ({p.hidden},) and x of shape ({p.in_dim},); "
            f"got {h_prev.shape}, {c_prev.shape}, {x.shape}"
        )
    h, c, _ = _step(p, h_prev[None, :], c_prev[None, :], x[None, :])
    return h[0], c[0]


def _run_layer(p: LstmParams, xs: list[np.ndarray]):
    """Run one layer over a step list of (B, in_dim) inputs from zero state."""
    b = xs[0].shape[0]
    h = np.zeros((b, p.hidden))
    c = np.zeros((b, p.hidden))
    caches = []
    hs = []
    for x in xs:
        h, c, cache = _step(p, h, c, x)
        caches.append(cache)
        hs.append(h)
    return hs, c, caches


def _bptt_layer(p, caches, dh_steps, dh_last, dc_last, grads, prefix, omit_carry=False):
    """Backward through one layer.

    ``dh_steps`` is a per-step list of gradients flowing into h_t from above
    (or None), ``dh_last``/``dc_last`` flow into the final state. Accumulates
    parameter gradients into ``grads`` under ``prefix`` and returns
    (per-step input gradients, d initial h, d initial c). ``omit_carry`` drops
    the cell-state carry term; it exists only so tests can show the gradient
    checker catches broken BPTT.
    """
    hidden = p.hidden
    n = len(caches)
    b = caches[0][0].shape[0]
    dh_carry = np.zeros((b, hidden))
    dc_carry = np.zeros((b, hidden))
    if dh_last is not None:
        dh_carry = dh_carry + dh_last
    if dc_last is not None:
        dc_carry = dc_carry + dc_last
    dxs: list[np.ndarray | None] = [None] * n
    for step in reversed(range(n)):
        z, i, f, o, g, c_prev, tanh_c = caches[step]
        dh = dh_carry
        if dh_steps is not None and dh_steps[step] is not None:
            dh = dh + dh_steps[step]
        dc = dc_carry + dh * o * (1.0 - tanh_c**2)
        do_raw = dh * tanh_c * o * (1.0 - o)
        di_raw = dc * g * i * (1.0 - i)
        df_raw = dc * c_prev * f * (1.0 - f)
        dg_raw = dc * i * (1.0 - g**2)
        grads[prefix + "wf"] += df_raw.T @ z
        grads[prefix + "wi"] += di_raw.T @ z
        grads[prefix + "wo"] += do_raw.T @ z
        grads[prefix + "wc"] += dg_raw.T @ z
        grads[prefix + "bf"] += df_raw.sum(axis=0)
        grads[prefix + "bi"] += di_raw.sum(axis=0)
        grads[prefix + "bo"] += do_raw.sum(axis=0)
        grads[prefix + "bc"] += dg_raw.sum(axis=0)
        dz = df_raw @ p.wf + di_raw @ p.wi + do_raw @ p.wo + dg_raw @ p.wc
        dh_carry = dz[:, :hidden]
        dxs[step] = dz[:, hidden:]
        dc_carry = np.zeros_like(dc) if omit_carry else dc * f
    return dxs, dh_carry, dc_carry


def _softmax_nll(logits, targets):
    m = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - m)
    z = ex.sum(axis=1, keepdims=True)
    probs = ex / z
    nll = -(logits[np.arange(len(targets)), targets] - m[:, 0] - np.log(z[:, 0]))
    return probs, nll


def _forward_group(model: LstmAutoencoder, rows: np.ndarray):
    """Autoencode a (B, n) batch of same-length walks given as local rows."""
    b, n = rows.shape
    xs = [model.input_embed[rows[:, t]] for t in range(n)]
    enc_caches = []
    final_c = None
    for p in model.encoder:
        xs, final_c, caches = _run_layer(p, xs)
        enc_caches.append(caches)
    h = xs[-1]  # top-layer final hidden state
    c = final_c

    dec_rows = np.concatenate([np.full((b, 1), model.start_row, dtype=np.int64), rows[:, :-1]], axis=1)
    dec_caches = []
    dec_h = []
    logits_steps = []
    probs_steps = []
    nll = np.zeros((b, n))
    for t in range(n):
        x = model.input_embed[dec_rows[:, t]]
        h, c, cache = _step(model.decoder, h, c, x)
        dec_caches.append(cache)
        dec_h.append(h)
        logits = h @ model.out_w.T + model.out_b
        probs, nll_t = _softmax_nll(logits, rows[:, t])
        logits_steps.append(logits)
        probs_steps.append(probs)
        nll[:, t] = nll_t
    return {
        "rows": rows,
        "dec_rows": dec_rows,
        "enc_caches": enc_caches,
        "dec_caches": dec_caches,
        "dec_h": dec_h,
        "logits": logits_steps,
        "probs": probs_steps,
        "walk_losses": nll.mean(axis=1),
    }


def _backward_group(model: LstmAutoencoder, fwd, grads, walk_weight: float, omit_carry=False):
    """Accumulate d(walk_weight * sum of per-walk mean CE)/d(params)."""
    rows = fwd["rows"]
    b, n = rows.shape
    dec_dh = []
    for t in range(n):
        dlogits = fwd["probs"][t].copy()
        dlogits[np.arange(b), rows[:, t]] -= 1.0
        dlogits *= walk_weight / n
        grads["out_w"] += dlogits.T @ fwd["dec_h"][t]
        grads["out_b"] += dlogits.sum(axis=0)
        dec_dh.append(dlogits @ model.out_w)
    dec_dx, dh0, dc0 = _bptt_layer(
        model.decoder, fwd["dec_caches"], dec_dh, None, None, grads, "dec.", omit_carry
    )
    for t in range(n):
        np.add.at(grads["embed"], fwd["dec_rows"][:, t], dec_dx[t])
    # the decoder's initial state is the top encoder layer's final state
    dh_from_above = None
    dh_last, dc_last = dh0, dc0
    for li in reversed(range(len(model.encoder))):
        dxs, _, _ = _bptt_layer(
            model.encoder[li], fwd["enc_caches"][li], dh_from_above, dh_last, dc_last,
            grads, f"enc{li}.", omit_carry,
        )
        dh_from_above = dxs
        dh_last, dc_last = None, None
    for t in range(n):
        np.add.at(grads["embed"], rows[:, t], dh_from_above[t])


# ---------------------------------------------------------------------------
# public operations

def forward_autoencode(model: LstmAutoencoder, walk):
    """Run one walk (global ids, length >= 2) -> (per-position logits, mean CE)."""
    walk = list(walk)
    if len(walk) < 2:
        raise ValueError("autoencoding needs walks of length >= 2")
    rows = model.rows(walk)[None, :]
    fwd = _forward_group(model, rows)
    logits = np.stack([step[0] for step in fwd["logits"]])
    return logits, float(fwd["walk_losses"][0])


def autoencode_loss(model: LstmAutoencoder, walk) -> float:
    return forward_autoencode(model, walk)[1]


def reconstruct(model: LstmAutoencoder, walk) -> list[int]:
    """Argmax decoding under teacher forcing, as global node ids."""
    logits, _ = forward_autoencode(model, walk)
    return [int(model.node_ids[r]) for r in logits.argmax(axis=1)]


def walk_grads(model: LstmAutoencoder, walk, omit_carry=False) -> dict[str, np.ndarray]:
    """Analytic gradient of the mean autoencoding CE of a single walk."""
    rows = model.rows(list(walk))[None, :]
    fwd = _forward_group(model, rows)
    grads = model.zero_grads()
    _backward_group(model, fwd, grads, 1.0, omit_carry)
    return grads


class _Adam:
    def __init__(self, names_shapes, lr, beta1, beta2, eps):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {n: np.zeros(s) for n, s in names_shapes}
        self.v = {n: np.zeros(s) for n, s in names_shapes}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def clip_global_norm(grads: dict[str, np.ndarray], clip: float) -> float:
    """Scale all gradients jointly so their global L2 norm is at most clip."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if clip > 0 and total > clip:
        factor = clip / total
        for g in grads.values():
            g *= factor
    return total


def train(
    model: LstmAutoencoder,
    corpus,
    epochs: int = 20,
    adam: tuple[float, float, float, float] = (1e-3, 0.9, 0.999, 1e-8),
    batch: int = 32,
    clip: float = 5.0,
    rng: np.random.Generator | int = 0,
):
    """Adam on BPTT gradients of the autoencoding loss -> (model, loss trace).

    ``corpus`` is a WalkSet or any iterable of walks (global-id sequences);
    walks shorter than 2 are ignored. Walk order is shuffled each epoch with
    ``rng``. Gradients are averaged over the batch (per-walk mean CE) and
    clipped at global norm ``clip`` before each update. The returned trace
    holds each epoch's mean per-walk loss, evaluated as the epoch progresses.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    seqs = [tuple(w.nodes) if hasattr(w, "nodes") else tuple(w) for w in corpus]
    seqs = [s for s in seqs if len(s) >= 2]
    if not seqs:
        raise EmptyCorpusError("no walks of length >= 2 to train on")
    rows_per_walk = [model.rows(s) for s in seqs]
    lr, b1, b2, eps = adam
    params = dict(model.param_items())
    opt = _Adam([(n, a.shape) for n, a in params.items()], lr, b1, b2, eps)
    losses = []
    n_walks = len(seqs)
    for _ in range(epochs):
        perm = rng.permutation(n_walks)
        loss_sum = 0.0
        for lo in range(0, n_walks, batch):
            idx = perm[lo:lo + batch]
            grads = model.zero_grads()
            walk_weight = 1.0 / len(idx)
            by_len: dict[int, list[int]] = {}
            for i in idx:
                by_len.setdefault(len(seqs[i]), []).append(i)
            for _, members in sorted(by_len.items()):
                group_rows = np.stack([rows_per_walk[i] for i in members])
                fwd = _forward_group(model, group_rows)
                loss_sum += float(fwd["walk_losses"].sum())
                _backward_group(model, fwd, grads, walk_weight)
            clip_global_norm(grads, clip)
            opt.step(params, grads)
        losses.append(loss_sum / n_walks)
    return model, losses


def input_embeddings(model: LstmAutoencoder) -> EmbeddingMatrix:
    """The input-layer weight table (copy), one row per vocabulary node."""
    return EmbeddingMatrix(model.node_ids.copy(), model.input_embed[: model.vocab_size].copy())


def warm_start(
    model: LstmAutoencoder,
    prev: LstmAutoencoder | None = None,
    z_prev: EmbeddingMatrix | None = None,
) -> LstmAutoencoder:
    """Initialize from history: embedding rows from ``z_prev`` for nodes it
    covers, gate/output parameters from ``prev`` where present (output rows
    matched by global node id). Untouched rows keep their fresh
    initialization. Returns the same model, modified in place."""
    if z_prev is not None:
        if z_prev.dim != model.dim:
            raise ShapeMismatchError(f"z_prev dim {z_prev.dim} != model dim {model.dim}")
        shared = np.intersect1d(model.node_ids, z_prev.node_ids)
        if len(shared):
            model.input_embed[model.rows(shared)] = z_prev.vectors[z_prev.rows_of(shared)]
    if prev is not None:
        if prev.dim != model.dim or len(prev.encoder) != len(model.encoder):
            raise ShapeMismatchError("previous model has incompatible dimensions or layer count")
        model.encoder = [p.copy() for p in prev.encoder]
        model.decoder = prev.decoder.copy()
        model.input_embed[model.start_row] = prev.input_embed[prev.start_row]
        shared = np.intersect1d(model.node_ids, prev.node_ids)
        if len(shared):
            mine, theirs = model.rows(shared), prev.rows(shared)
            model.out_w[mine] = prev.out_w[theirs]
            model.out_b[mine] = prev.out_b[theirs]
    return model


def gradient_check(model: LstmAutoencoder, walk, eps: float = 1e-5, coords_per_group: int = 20,
                   probe_rng: np.random.Generator | int = 0, omit_carry=False) -> float:
    """Max relative error between BPTT and central finite differences.

    Samples at least ``coords_per_group`` coordinates per parameter group and
    evaluates the loss twice per coordinate (no reuse of the unperturbed
    loss). The relative error divides by max(|analytic| + |numeric|, 1e-4):
    central differences at eps=1e-5 carry ~1e-11 absolute noise, so
    coordinates whose true gradient sits near zero are judged on that absolute
    scale instead of their own magnitude. ``omit_carry`` corrupts the analytic
    gradient on purpose, to verify the check would catch a broken backward
    pass.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if isinstance(probe_rng, (int, np.integer)):
        probe_rng = np.random.default_rng(int(probe_rng))
    walk = list(walk)
    analytic = walk_grads(model, walk, omit_carry=omit_carry)
    worst = 0.0
    for name, arr in model.param_items():
        flat = arr.reshape(-1)
        k = min(coords_per_group, flat.size)
        coords = probe_rng.choice(flat.size, size=k, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            up = autoencode_loss(model, walk)
            flat[c] = orig - eps
            down = autoencode_loss(model, walk)
            flat[c] = orig
            numeric = (up - down) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[c])
            denom = max(abs(a) + abs(numeric), 1e-4)
            worst = max(worst, abs(a - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# checkpoint format: a single .npz holding dims, the global-id vocabulary and
# every parameter tensor (row-major), plus a JSON metadata record.

def save_model(model: LstmAutoencoder, path) -> None:
    meta = {
        "format": "lstm-autoencoder-v1",
        "dim": model.dim,
        "vocab_size": model.vocab_size,
        "encoder_layers": len(model.encoder),
    }
    arrays = {"node_ids": model.node_ids, "meta": np.bytes_(json.dumps(meta, sort_keys=True))}
    for name, arr in model.param_items():
        arrays[name.replace(".", "_")] = arr
    np.savez(path, **arrays)


def load_model(path) -> LstmAutoencoder:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format") != "lstm-autoencoder-v1":
            raise ShapeMismatchError(f"unrecognized checkpoint format in {path}")
        dim = int(meta["dim"])
        layers = int(meta["encoder_layers"])
        encoder = [
            LstmParams(**{n: data[f"enc{li}_{n}"] for n in _GATE_NAMES}) for li in range(layers)
        ]
        decoder = LstmParams(**{n: data[f"dec_{n}"] for n in _GATE_NAMES})
        return LstmAutoencoder(
            data["node_ids"], dim, data["embed"], encoder, decoder, data["out_w"], data["out_b"]
        )
