"""Timestamped edge streams and their discrete graph snapshots.

An input edge list (``src dst timestamp [weight]`` per line) is parsed into a
:class:`TemporalEdgeSet` over a shared :class:`NodeRegistry`, then sliced into
a :class:`SnapshotSequence` of undirected, weight-aggregated snapshots. All
structures are immutable once built and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import (
    DegenerateRangeError,
    EmptyInputError,
    MalformedLineError,
)


class NodeRegistry:
    """Bijective map between external node labels and dense internal ids.

    Ids are assigned in registration order, exactly 0..N-1.
    """

    def __init__(self):
        self._ids: dict[str, int] = {}
        self._labels: list[str] = []

    def add(self, label: str) -> int:
        """Return the id for ``label``, registering it if unseen."""
        nid = self._ids.get(label)
        if nid is None:
            nid = len(self._labels)
            self._ids[label] = nid
            self._labels.append(label)
        return nid

    def id_of(self, label: str) -> int:
        return self._ids[label]

    def label_of(self, node_id: int) -> str:
        return self._labels[node_id]

    def labels(self) -> list[str]:
        """All labels in registration (= id) order."""
        return list(self._labels)

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    def __len__(self) -> int:
        return len(self._labels)


class Edge(NamedTuple):
    src: int
    dst: int
    time: float
    weight: float


@dataclass(frozen=True)
class EdgeSchema:
    """Column positions in a whitespace-separated edge list.

    ``weight`` names an optional column: lines shorter than it fall back to
    weight 1.0. Extra trailing columns are ignored.
    """

    src: int = 0
    dst: int = 1
    time: int = 2
    weight: int | None = 3

    @classmethod
    def from_string(cls, text: str) -> "EdgeSchema":
        """Parse e.g. ``"src,dst,time"`` or ``"src,dst,weight,time"``."""
        names = [t.strip() for t in text.split(",") if t.strip()]
        allowed = {"src", "dst", "time", "weight"}
        pos: dict[str, int] = {}
        for i, name in enumerate(names):
            if name not in allowed:
                raise ValueError(f"unknown column name {name!r} (allowed: src,dst,time,weight)")
            if name in pos:
                raise ValueError(f"duplicate column name {name!r}")
            pos[name] = i
        for required in ("src", "dst", "time"):
            if required not in pos:
                raise ValueError(f"schema must name a {required!r} column")
        return cls(src=pos["src"], dst=pos["dst"], time=pos["time"], weight=pos.get("weight"))


@dataclass(frozen=True)
class TemporalEdgeSet:
    """Raw dynamic-network input: internal-id edges with timestamps."""

    edges: tuple[Edge, ...]
    time_range: tuple[float, float]

    @classmethod
    def from_edges(cls, edges: Iterable[Edge]) -> "TemporalEdgeSet":
        edges = tuple(edges)
        if not edges:
            raise EmptyInputError("no edges")
        lo = min(e.time for e in edges)
        hi = max(e.time for e in edges)
        return cls(edges=edges, time_range=(lo, hi))

    def __len__(self) -> int:
        return len(self.edges)


def ingest_edge_list(
    lines: Iterable[str],
    schema: EdgeSchema | None = None,
    registry: NodeRegistry | None = None,
) -> tuple[NodeRegistry, TemporalEdgeSet]:
    """Parse an edge-list text stream.

    Blank lines and ``#`` comments are skipped. Self-loops are dropped (they
    carry no neighborhood information). Raises :class:`MalformedLineError`
    with the 1-based line number on bad arity or non-numeric fields, and
    :class:`EmptyInputError` when no valid edge remains.
    """
    schema = schema or EdgeSchema()
    registry = registry if registry is not None else NodeRegistry()
    need = max(schema.src, schema.dst, schema.time) + 1
    edges: list[Edge] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split()
        if len(cols) < need:
            raise MalformedLineError(lineno, f"expected at least {need} columns, got {len(cols)}")
        try:
            ts = float(cols[schema.time])
        except ValueError:
            raise MalformedLineError(lineno, f"non-numeric timestamp {cols[schema.time]!r}") from None
        if schema.weight is not None and len(cols) > schema.weight:
            try:
                w = float(cols[schema.weight])
            except ValueError:
                raise MalformedLineError(lineno, f"non-numeric weight {cols[schema.weight]!r}") from None
        else:
            w = 1.0
        if not math.isfinite(ts):
            raise MalformedLineError(lineno, f"non-finite timestamp {ts!r}")
        if not math.isfinite(w) or w <= 0:
            raise MalformedLineError(lineno, f"weight must be a positive real, got {w!r}")
        if cols[schema.src] == cols[schema.dst]:
            continue  # self-loop
        u = registry.add(cols[schema.src])
        v = registry.add(cols[schema.dst])
        edges.append(Edge(u, v, ts, w))
    if not edges:
        raise EmptyInputError("edge list contains no valid edges")
    return registry, TemporalEdgeSet.from_edges(edges)


class Snapshot:
    """One time window of the stream as an undirected weighted graph.

    ``adjacency`` maps each active node to its neighbor list, sorted by
    neighbor id, with weights aggregated over all records between the pair
    that fell into this window. ``edge_count`` counts raw input records
    (before symmetrization); ``num_pairs`` counts distinct undirected edges.
    """

    def __init__(self, index: int, pair_weights: dict[tuple[int, int], float], edge_count: int):
        self.index = index
        self.edge_count = edge_count
        adjacency: dict[int, list[tuple[int, float]]] = {}
        for (u, v), w in pair_weights.items():
            adjacency.setdefault(u, []).append((v, w))
            adjacency.setdefault(v, []).append((u, w))
        for nbrs in adjacency.values():
            nbrs.sort()
        self.adjacency = {u: adjacency[u] for u in sorted(adjacency)}
        self.node_set = frozenset(self.adjacency)
        self.num_pairs = len(pair_weights)
        self._nbr_sets: dict[int, frozenset] = {}

    def neighbors(self, v: int) -> list[tuple[int, float]]:
        """Aggregated neighbor list of ``v`` (ascending id); empty if inactive."""
        return self.adjacency.get(v, [])

    def neighbor_ids(self, v: int) -> frozenset:
        ids = self._nbr_sets.get(v)
        if ids is None:
            ids = frozenset(n for n, _ in self.adjacency.get(v, ()))
            self._nbr_sets[v] = ids
        return ids

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.neighbor_ids(u)

    def degree(self, v: int) -> int:
        return len(self.adjacency.get(v, ()))

    def edges(self):
        """Distinct undirected edges as (u, v, weight) with u < v, sorted."""
        for u, nbrs in self.adjacency.items():
            for v, w in nbrs:
                if u < v:
                    yield u, v, w

    def active_nodes(self) -> list[int]:
        """Sorted list of nodes with at least one incident edge."""
        return list(self.adjacency)


@dataclass(frozen=True)
class SnapshotSequence:
    snapshots: tuple[Snapshot, ...]
    registry: NodeRegistry

    def __len__(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, i: int) -> Snapshot:
        return self.snapshots[i]


def snapshot_split(
    edge_set: TemporalEdgeSet,
    registry: NodeRegistry,
    count: int | None = None,
    window: float | None = None,
) -> SnapshotSequence:
    """Slice the edge set into equal-width time windows.

    Exactly one of ``count`` (number of snapshots) or ``window`` (width in
    time units) must be given. Windows are half-open, the last one closed, so
    every record lands in exactly one snapshot. Per-pair weights within a
    window are summed and the adjacency symmetrized.
    """
    if (count is None) == (window is None):
        raise ValueError("give exactly one of count= or window=")
    lo, hi = edge_set.time_range
    span = hi - lo
    if count is not None:
        if count < 1:
            raise ValueError("count must be >= 1")
        if span == 0 and count > 1:
            raise DegenerateRangeError(f"all timestamps equal ({lo}); cannot split into {count} windows")
        n_windows = count
        width = span / count if span > 0 else 1.0
    else:
        if window <= 0:
            raise ValueError("window must be > 0")
        width = float(window)
        n_windows = int(span // width) + 1

    buckets: list[dict[tuple[int, int], float]] = [dict() for _ in range(n_windows)]
    counts = [0] * n_windows
    for e in edge_set.edges:
        idx = int((e.time - lo) / width)
        if idx >= n_windows:
            idx = n_windows - 1
        key = (e.src, e.dst) if e.src < e.dst else (e.dst, e.src)
        buckets[idx][key] = buckets[idx].get(key, 0.0) + e.weight
        counts[idx] += 1

    snaps = tuple(Snapshot(i, buckets[i], counts[i]) for i in range(n_windows))
    return SnapshotSequence(snapshots=snaps, registry=registry)


def read_node_labels(lines: Iterable[str], registry: NodeRegistry) -> tuple[dict[int, int], list[str]]:
    """Read a two-column ``node_label class_label`` file.

    Returns (node id -> class index, class names sorted). Lines naming nodes
    absent from the registry are skipped: unlabeled or unseen nodes are simply
    excluded from classification tasks.
    """
    raw: dict[int, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split()
        if len(cols) < 2:
            raise MalformedLineError(lineno, f"expected 2 columns, got {len(cols)}")
        if cols[0] in registry:
            raw[registry.id_of(cols[0])] = cols[1]
    class_names = sorted(set(raw.values()))
    index = {name: i for i, name in enumerate(class_names)}
    return {nid: index[c] for nid, c in sorted(raw.items())}, class_names
