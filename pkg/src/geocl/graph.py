"""Spatially embedded undirected graphs with self-loops.

A :class:`SpatialGraph` is immutable once built. Vertices are dense integers
``0..n-1``; every vertex carries a 3D position (micrometres) and an optional
label. Edges are unordered pairs stored with ``i <= j``; ``i == j`` is a
self-loop, which counts once toward the degree of its vertex.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

#: Above this vertex count the full distance matrix is never materialised.
DISTANCE_CACHE_CAP = 4096


class GraphError(ValueError):
    """Invalid graph construction or vertex reference."""


@dataclass(frozen=True, eq=False)
class SpatialGraph:
    positions: np.ndarray
    edges: np.ndarray
    labels: tuple[str, ...] | None = None
    _validated: bool = field(default=False, repr=False)

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise GraphError(f"positions must have shape (n, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise GraphError("positions must be finite")
        n = pos.shape[0]

        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise GraphError("edge endpoint out of range")
        e = np.sort(e, axis=1)
        if not self._validated:
            order = np.lexsort((e[:, 1], e[:, 0]))
            e = e[order]
            if len(e) > 1 and np.any(np.all(e[1:] == e[:-1], axis=1)):
                raise GraphError("duplicate edge")
        e = np.ascontiguousarray(e)

        labels = self.labels
        if labels is not None:
            labels = tuple(str(s) for s in labels)
            if len(labels) != n:
                raise GraphError("labels length must equal vertex count")

        pos.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_edge_list(cls, positions, edges: Iterable[tuple[int, int]], labels=None):
        e = np.array(list(edges), dtype=np.int64).reshape(-1, 2)
        return cls(np.asarray(positions, dtype=np.float64).reshape(-1, 3), e, labels)

    @classmethod
    def _trusted(cls, positions, edges, labels):
        # edges already canonical (sorted rows, lexsorted, unique)
        return cls(positions, edges, labels, _validated=True)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def loop_mask(self) -> np.ndarray:
        return self.edges[:, 0] == self.edges[:, 1]

    @property
    def num_loops(self) -> int:
        return int(self.loop_mask.sum())

    @cached_property
    def has_loop(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        out[self.edges[self.loop_mask, 0]] = True
        return out

    @cached_property
    def simple_adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 CSR adjacency with self-loops dropped, sorted indices."""
        e = self.edges[~self.loop_mask]
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows), dtype=np.int64)
        a = sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        a.sort_indices()
        return a

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 CSR adjacency with ``A[i, i] = 1`` for a self-loop."""
        a = self.simple_adjacency + sp.diags(self.has_loop.astype(np.int64), format="csr")
        a = sp.csr_matrix(a)
        a.sort_indices()
        return a

    def __repr__(self):
        return f"SpatialGraph(n={self.n}, edges={self.num_edges}, loops={self.num_loops})"


def _check_vertex(g: SpatialGraph, i: int) -> None:
    if not 0 <= int(i) < g.n:
        raise GraphError(f"vertex {i} out of range for n={g.n}")


def euclidean_distance(g: SpatialGraph, i: int, j: int) -> float:
    _check_vertex(g, i)
    _check_vertex(g, j)
    return float(np.linalg.norm(g.positions[i] - g.positions[j]))


def distance_matrix(g: SpatialGraph, cap: int = DISTANCE_CACHE_CAP) -> np.ndarray:
    """Full symmetric pairwise distance matrix, refused above ``cap`` vertices."""
    if g.n > cap:
        raise GraphError(f"n={g.n} exceeds distance cache cap {cap}; stream with distance_rows")
    return _pairwise(g.positions, g.positions)


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def distance_rows(g: SpatialGraph, block: int = 512) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(start, D[start:start+block, :])`` row blocks of the distance matrix."""
    for start in range(0, g.n, block):
        yield start, _pairwise(g.positions[start:start + block], g.positions)


def upper_pair_distances(g: SpatialGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Indices and distances of all unordered pairs ``i <= j``, diagonal included."""
    iu, ju = np.triu_indices(g.n)
    diff = g.positions[iu] - g.positions[ju]
    return iu, ju, np.sqrt(np.einsum("ij,ij->i", diff, diff))


def edge_lengths(g: SpatialGraph) -> np.ndarray:
    diff = g.positions[g.edges[:, 0]] - g.positions[g.edges[:, 1]]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def mean_pairwise_distance(g: SpatialGraph) -> float:
    """Mean distance over unordered pairs of distinct vertices."""
    if g.n < 2:
        return 0.0
    total = 0.0
    for start, rows in distance_rows(g):
        idx = np.arange(rows.shape[0])[:, None] + start
        total += rows[np.arange(g.n)[None, :] > idx].sum()
    return total / (g.n * (g.n - 1) / 2)


def edge_density(g: SpatialGraph) -> float:
    """``2|E| / ((n+1) n)``: fraction of the n(n+1)/2 possible edges present."""
    n = g.n
    if n == 0:
        return 0.0
    return 2.0 * g.num_edges / ((n + 1) * n)


def degrees(g: SpatialGraph) -> np.ndarray:
    """Degree per vertex; a self-loop contributes exactly 1."""
    e = g.edges
    loops = g.loop_mask
    deg = np.bincount(e[:, 0], minlength=g.n) + np.bincount(e[~loops, 1], minlength=g.n)
    return deg.astype(np.int64)


def induced_subgraph(g: SpatialGraph, keep: Iterable[int]) -> tuple[SpatialGraph, dict[int, int]]:
    """Subgraph on ``keep`` plus the old-to-new vertex mapping.

    New ids follow ascending old ids.
    """
    keep_idx = np.unique(np.asarray(list(keep), dtype=np.int64))
    if keep_idx.size == 0:
        raise GraphError("cannot induce a subgraph on an empty vertex set")
    if keep_idx[0] < 0 or keep_idx[-1] >= g.n:
        raise GraphError("keep set contains out-of-range vertices")
    new_id = np.full(g.n, -1, dtype=np.int64)
    new_id[keep_idx] = np.arange(keep_idx.size)
    mapped = new_id[g.edges]
    e = mapped[np.all(mapped >= 0, axis=1)]
    labels = None if g.labels is None else tuple(g.labels[k] for k in keep_idx)
    # monotone relabelling keeps rows sorted and lexicographic order intact
    sub = SpatialGraph._trusted(g.positions[keep_idx], e, labels)
    return sub, {int(o): int(k) for k, o in enumerate(keep_idx)}


def top_degree_vertices(g: SpatialGraph, k: int) -> np.ndarray:
    """The ``k`` highest-degree vertices; ties go to the lower id."""
    deg = degrees(g)
    order = np.lexsort((np.arange(g.n), -deg))
    return order[:k]


def trim_top_degree(g: SpatialGraph, k: int) -> SpatialGraph:
    if not 0 <= k < g.n:
        raise GraphError(f"cannot remove {k} of {g.n} vertices")
    if k == 0:
        return g
    drop = set(top_degree_vertices(g, k).tolist())
    sub, _ = induced_subgraph(g, [v for v in range(g.n) if v not in drop])
    return sub


def relabel(g: SpatialGraph, perm: Sequence[int]) -> SpatialGraph:
    """Graph with vertex ``v`` renamed ``perm[v]``."""
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    labels = None if g.labels is None else tuple(g.labels[v] for v in inv)
    return SpatialGraph(g.positions[inv], perm[g.edges], labels)


# -- CSV exchange format -------------------------------------------------------

def write_graph_csv(g: SpatialGraph, vertex_path, edge_path) -> None:
    with open(vertex_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y", "z", "label"])
        for v in range(g.n):
            x, y, z = g.positions[v]
            w.writerow([v, repr(float(x)), repr(float(y)), repr(float(z)),
                        "" if g.labels is None else g.labels[v]])
    with open(edge_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        w.writerows(g.edges.tolist())


def read_graph_csv(vertex_path, edge_path) -> SpatialGraph:
    """Load the vertex/edge CSV pair; ids must be dense ``0..n-1``."""
    rows = []
    with open(vertex_path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((int(row["id"]), float(row["x"]), float(row["y"]), float(row["z"]),
                             row.get("label") or ""))
            except (TypeError, ValueError, KeyError) as exc:
                raise GraphError(f"{vertex_path}:{lineno}: malformed vertex row ({exc})") from None
    rows.sort()
    if [r[0] for r in rows] != list(range(len(rows))):
        raise GraphError(f"{vertex_path}: vertex ids must be dense 0..n-1")
    positions = np.array([r[1:4] for r in rows], dtype=np.float64).reshape(-1, 3)
    labels = tuple(r[4] for r in rows)
    if not any(labels):
        labels = None

    edges = []
    with open(edge_path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                edges.append((int(row["src"]), int(row["dst"])))
            except (TypeError, ValueError, KeyError) as exc:
                raise GraphError(f"{edge_path}:{lineno}: malformed edge row ({exc})") from None
    return SpatialGraph(positions, np.array(edges, dtype=np.int64).reshape(-1, 2), labels)


def graph_paths(prefix: str | Path) -> tuple[Path, Path]:
    """Conventional ``<prefix>.vertices.csv`` / ``<prefix>.edges.csv`` pair."""
    prefix = Path(prefix)
    return (prefix.with_name(prefix.name + ".vertices.csv"),
            prefix.with_name(prefix.name + ".edges.csv"))
