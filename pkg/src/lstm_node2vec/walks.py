"""Random walk generation: alias sampling, biased static walks, temporal walks.

Static walks follow the second-order scheme where the next step from ``v``
(having arrived from ``t_prev``) picks neighbor ``u`` with unnormalized weight
``w(v,u) * bias(t_prev,u)``: bias 1/p when u == t_prev, 1 when u is adjacent
to t_prev, 1/q otherwise. Temporal walks sample, for an anchor node, one of
its neighbors in each snapshot of an L-window, in increasing time order.

Every (node, walk index) pair draws from its own RNG derived from the master
seed, so the generated corpus is independent of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyWeightsError, NonPositiveWeightError, WindowTooLargeError
from .graphs import NodeRegistry, Snapshot, SnapshotSequence
from .seeds import child_rng

# Above this many directed (prev, cur) entries, per-edge alias tables are not
# retained between walks; distribution is identical, only speed differs.
EDGE_CACHE_LIMIT = 1_000_000


@dataclass(frozen=True)
class AliasTable:
    """O(1) sampler for a fixed categorical distribution (Vose construction)."""

    prob: np.ndarray   # float64 in [0, 1]
    alias: np.ndarray  # int64

    @property
    def size(self) -> int:
        return len(self.prob)

    def induced_distribution(self) -> np.ndarray:
        """Exact distribution the sampler realizes, by expectation over draws."""
        n = self.size
        dist = np.zeros(n)
        for i in range(n):
            dist[i] += self.prob[i] / n
            dist[self.alias[i]] += (1.0 - self.prob[i]) / n
        return dist


def build_alias_table(weights) -> AliasTable:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0:
        raise EmptyWeightsError("cannot build an alias table from no weights")
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise NonPositiveWeightError("alias weights must all be positive finite reals")
    n = weights.size
    scaled = weights * (n / weights.sum())
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        if scaled[l] < 1.0:
            small.append(l)
        else:
            large.append(l)
    # leftovers are 1.0 up to rounding
    for i in small:
        prob[i] = 1.0
    for i in large:
        prob[i] = 1.0
    return AliasTable(prob=prob, alias=alias)


def alias_sample(table: AliasTable, rng: np.random.Generator) -> int:
    """One draw: one uniform for the slot, one for the accept threshold."""
    n = table.size
    slot = int(rng.random() * n)
    if slot == n:  # guard the measure-zero edge of the unit interval
        slot = n - 1
    if rng.random() < table.prob[slot]:
        return slot
    return int(table.alias[slot])


def alias_sample_many(table: AliasTable, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized draws; same two-uniform scheme per sample as alias_sample."""
    n = table.size
    slots = np.minimum((rng.random(size) * n).astype(np.int64), n - 1)
    accept = rng.random(size) < table.prob[slots]
    return np.where(accept, slots, table.alias[slots])


@dataclass(frozen=True)
class Walk:
    nodes: tuple[int, ...]
    kind: str                        # "static" | "temporal"
    anchor: int | None = None        # temporal walks: the node whose history this is
    times: tuple[int, ...] | None = None  # temporal walks: contributing snapshot indices

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass
class WalkSet:
    walks: list[Walk] = field(default_factory=list)

    @property
    def vocab(self) -> set[int]:
        ids: set[int] = set()
        for w in self.walks:
            ids.update(w.nodes)
        return ids

    def __len__(self) -> int:
        return len(self.walks)

    def __iter__(self):
        return iter(self.walks)


def _neighbor_arrays(s: Snapshot, v: int) -> tuple[np.ndarray, np.ndarray]:
    nbrs = s.neighbors(v)
    ids = np.fromiter((n for n, _ in nbrs), dtype=np.int64, count=len(nbrs))
    ws = np.fromiter((w for _, w in nbrs), dtype=np.float64, count=len(nbrs))
    return ids, ws


def transition_weights(s: Snapshot, prev: int, cur: int, p: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized second-order step weights out of ``cur`` given ``prev``."""
    ids, ws = _neighbor_arrays(s, cur)
    prev_nbrs = s.neighbor_ids(prev)
    bias = np.empty(len(ids))
    for i, u in enumerate(ids):
        if u == prev:
            bias[i] = 1.0 / p
        elif u in prev_nbrs:
            bias[i] = 1.0
        else:
            bias[i] = 1.0 / q
    return ids, ws * bias


class Node2vecSampler:
    """Reusable per-snapshot walk sampler with cached alias tables."""

    def __init__(self, s: Snapshot, p: float, q: float):
        if p <= 0 or q <= 0:
            raise ValueError("p and q must be > 0")
        self.snapshot = s
        self.p = p
        self.q = q
        self._node_tables: dict[int, tuple[np.ndarray, AliasTable]] = {}
        self._edge_tables: dict[tuple[int, int], tuple[np.ndarray, AliasTable]] = {}
        directed_entries = 2 * s.num_pairs
        self._cache_edges = directed_entries <= EDGE_CACHE_LIMIT

    def _node_table(self, v: int):
        entry = self._node_tables.get(v)
        if entry is None:
            ids, ws = _neighbor_arrays(self.snapshot, v)
            entry = (ids, build_alias_table(ws))
            self._node_tables[v] = entry
        return entry

    def _edge_table(self, prev: int, cur: int):
        key = (prev, cur)
        entry = self._edge_tables.get(key)
        if entry is None:
            ids, ws = transition_weights(self.snapshot, prev, cur, self.p, self.q)
            entry = (ids, build_alias_table(ws))
            if self._cache_edges:
                self._edge_tables[key] = entry
        return entry

    def walk_from(self, start: int, walk_length: int, rng: np.random.Generator) -> list[int]:
        walk = [start]
        while len(walk) < walk_length:
            cur = walk[-1]
            if self.snapshot.degree(cur) == 0:
                break
            if len(walk) == 1:
                ids, table = self._node_table(cur)
            else:
                ids, table = self._edge_table(walk[-2], cur)
            walk.append(int(ids[alias_sample(table, rng)]))
        return walk


def node2vec_walks(
    s: Snapshot,
    p: float,
    q: float,
    walks_per_node: int,
    walk_length: int,
    seed: int,
) -> WalkSet:
    """Second-order biased walks: ``walks_per_node`` from every active node.

    The first step is edge-weight proportional; later steps reweight by the
    return/in-out parameters. A walk stops early at a neighborless node, so
    lengths fall in [1, walk_length]. p = q = 1 degenerates to first-order
    weight-proportional walks.
    """
    if walk_length < 1 or walks_per_node < 1:
        raise ValueError("walk_length and walks_per_node must be >= 1")
    sampler = Node2vecSampler(s, p, q)
    out = WalkSet()
    for v in s.active_nodes():
        for j in range(walks_per_node):
            rng = child_rng(seed, "static", v, j)
            nodes = sampler.walk_from(v, walk_length, rng)
            out.walks.append(Walk(nodes=tuple(nodes), kind="static"))
    return out


def temporal_walks(
    seq: SnapshotSequence,
    t: int,
    L: int,
    k: int,
    seed: int,
    bias: str = "uniform",
    p: float = 1.0,
    q: float = 1.0,
) -> WalkSet:
    """Temporal neighbor walks for every node active at snapshot ``t``.

    The window covers snapshots t-L+1 .. t. For each anchor node v and each
    of k walks, one neighbor of v is sampled in every window snapshot where v
    is active, visiting snapshots in increasing time order; windows where v is
    absent contribute nothing. Walks shorter than 2 samples are discarded, so
    emitted lengths fall in [2, L].

    bias="uniform" samples neighbors proportionally to edge weight per
    snapshot. bias="second_order" additionally reweights by the return/in-out
    bias relative to the previously sampled neighbor, measured in the current
    snapshot, falling back to uniform when that node is absent there.
    """
    if bias not in ("uniform", "second_order"):
        raise ValueError(f"unknown bias mode {bias!r}")
    if L < 1:
        raise ValueError("L must be >= 1")
    if L > t + 1:
        raise WindowTooLargeError(f"window L={L} exceeds available history at t={t} ({t + 1} snapshots)")
    window = range(t - L + 1, t + 1)
    snaps = [seq[i] for i in window]

    # per (window position, anchor) weight-proportional tables, shared by all k walks
    uniform_tables: dict[tuple[int, int], tuple[np.ndarray, AliasTable]] = {}

    def uniform_table(pos: int, v: int):
        key = (pos, v)
        entry = uniform_tables.get(key)
        if entry is None:
            ids, ws = _neighbor_arrays(snaps[pos], v)
            entry = (ids, build_alias_table(ws))
            uniform_tables[key] = entry
        return entry

    out = WalkSet()
    for v in seq[t].active_nodes():
        for j in range(k):
            rng = child_rng(seed, "temporal", v, j)
            nodes: list[int] = []
            times: list[int] = []
            prev: int | None = None
            for pos, s in enumerate(snaps):
                if s.degree(v) == 0:
                    continue
                if bias == "second_order" and prev is not None and prev in s.node_set:
                    ids, ws = transition_weights(s, prev, v, p, q)
                    table = build_alias_table(ws)
                else:
                    ids, table = uniform_table(pos, v)
                prev = int(ids[alias_sample(table, rng)])
                nodes.append(prev)
                times.append(window[pos])
            if len(nodes) >= 2:
                out.walks.append(Walk(nodes=tuple(nodes), kind="temporal", anchor=v, times=tuple(times)))
    return out


def write_walks(ws: WalkSet, registry: NodeRegistry, path) -> None:
    """Dump one walk per line: kind tag ``T``/``S`` then external labels."""
    with open(path, "w", encoding="utf-8") as fh:
        for w in ws:
            tag = "T" if w.kind == "temporal" else "S"
            fh.write(tag + " " + " ".join(registry.label_of(n) for n in w.nodes) + "\n")
