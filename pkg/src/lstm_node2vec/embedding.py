"""Node embedding tables keyed by global node id, plus the text file format.

Files follow the word2vec text convention: a ``N d`` header line, then one
``label v1 ... vd`` line per node. Values are written with Python's shortest
round-trip float representation, so save/load is lossless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, MissingNodeError
from .graphs import NodeRegistry


@dataclass
class EmbeddingMatrix:
    """A ``len(node_ids) x d`` table; row i represents node node_ids[i]."""

    node_ids: np.ndarray  # int64, sorted ascending, unique
    vectors: np.ndarray   # float64, shape (len(node_ids), d)

    def __post_init__(self):
        self.node_ids = np.asarray(self.node_ids, dtype=np.int64)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or len(self.node_ids) != self.vectors.shape[0]:
            raise ValueError("node_ids and vectors disagree on row count")
        if len(self.node_ids) > 1 and not np.all(np.diff(self.node_ids) > 0):
            raise ValueError("node_ids must be sorted ascending and unique")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.node_ids)

    def __contains__(self, node_id: int) -> bool:
        i = np.searchsorted(self.node_ids, node_id)
        return i < len(self.node_ids) and self.node_ids[i] == node_id

    def row_of(self, node_id: int) -> int:
        i = int(np.searchsorted(self.node_ids, node_id))
        if i >= len(self.node_ids) or self.node_ids[i] != node_id:
            raise MissingNodeError(f"node {node_id} has no embedding row")
        return i

    def vector(self, node_id: int) -> np.ndarray:
        return self.vectors[self.row_of(node_id)]

    def rows_of(self, node_ids) -> np.ndarray:
        """Vectorized row lookup; raises MissingNodeError on any unknown id."""
        ids = np.asarray(node_ids, dtype=np.int64)
        idx = np.searchsorted(self.node_ids, ids)
        idx_clipped = np.minimum(idx, len(self.node_ids) - 1)
        bad = self.node_ids[idx_clipped] != ids
        if np.any(bad):
            raise MissingNodeError(f"nodes without embedding rows: {ids[bad][:5].tolist()}...")
        return idx

    def copy(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.node_ids.copy(), self.vectors.copy())


def write_embeddings(emb: EmbeddingMatrix, registry: NodeRegistry, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(emb)} {emb.dim}\n")
        for nid, row in zip(emb.node_ids, emb.vectors):
            values = " ".join(repr(float(x)) for x in row)
            fh.write(f"{registry.label_of(int(nid))} {values}\n")


def read_embeddings(path, registry: NodeRegistry) -> EmbeddingMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise FormatError(path, 1, f"expected 'N d' header, got {header.strip()!r}")
        try:
            n, d = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(path, 1, f"non-integer header {header.strip()!r}") from None
        ids = np.empty(n, dtype=np.int64)
        vecs = np.empty((n, d), dtype=np.float64)
        for i in range(n):
            line = fh.readline()
            lineno = i + 2
            if not line:
                raise FormatError(path, lineno, f"truncated: expected {n} rows, found {i}")
            cols = line.split()
            if len(cols) != d + 1:
                raise FormatError(path, lineno, f"expected {d + 1} columns, got {len(cols)}")
            if cols[0] not in registry:
                raise FormatError(path, lineno, f"unknown node label {cols[0]!r}")
            ids[i] = registry.id_of(cols[0])
            try:
                vecs[i] = [float(x) for x in cols[1:]]
            except ValueError:
                raise FormatError(path, lineno, "non-numeric embedding value") from None
    order = np.argsort(ids)
    return EmbeddingMatrix(ids[order], vecs[order])
