"""Synapse-level connectome records and the reference graphs built from them."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .graph import GraphError, SpatialGraph, induced_subgraph, trim_top_degree

SYNAPSE_COLUMNS = ("pre_id", "post_id", "pre_x", "pre_y", "pre_z",
                   "post_x", "post_y", "post_z", "named_pre", "named_post")

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n", ""}


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class SynapseRecord:
    pre_neuron: str
    post_neuron: str
    pre_pos: tuple[float, float, float]
    post_pos: tuple[float, float, float]


@dataclass(frozen=True)
class ConnectomeDataset:
    records: tuple[SynapseRecord, ...]
    named_ids: frozenset[str]

    def neuron_ids(self) -> list[str]:
        """Distinct neuron ids in first-appearance order."""
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.pre_neuron)
            seen.setdefault(r.post_neuron)
        return list(seen)


def _parse_bool(text: str, lineno: int, column: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise DataError(f"line {lineno}: column {column!r} is not boolean: {text!r}")


def parse_synapses(stream: TextIO | str) -> ConnectomeDataset:
    """Read the canonical synapse CSV.

    ``stream`` may be an open text stream or the CSV text itself.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty synapse file (missing header)") from None
    missing = [c for c in SYNAPSE_COLUMNS if c not in header]
    if missing:
        raise DataError(f"header missing columns: {', '.join(missing)}")
    col = {name: header.index(name) for name in SYNAPSE_COLUMNS}

    records = []
    named: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        pre, post = row[col["pre_id"]].strip(), row[col["post_id"]].strip()
        if not pre or not post:
            raise DataError(f"line {lineno}: empty neuron id")
        try:
            coords = [float(row[col[c]]) for c in SYNAPSE_COLUMNS[2:8]]
        except ValueError as exc:
            raise DataError(f"line {lineno}: non-numeric coordinate ({exc})") from None
        if not all(np.isfinite(coords)):
            raise DataError(f"line {lineno}: non-finite coordinate")
        records.append(SynapseRecord(pre, post, tuple(coords[:3]), tuple(coords[3:])))
        if _parse_bool(row[col["named_pre"]], lineno, "named_pre"):
            named.add(pre)
        if _parse_bool(row[col["named_post"]], lineno, "named_post"):
            named.add(post)
    return ConnectomeDataset(tuple(records), frozenset(named))


def read_synapses(path) -> ConnectomeDataset:
    with open(path, newline="") as fh:
        return parse_synapses(fh)


def write_synapses(ds: ConnectomeDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SYNAPSE_COLUMNS)
        for r in ds.records:
            w.writerow([r.pre_neuron, r.post_neuron, *map(repr, r.pre_pos), *map(repr, r.post_pos),
                        int(r.pre_neuron in ds.named_ids), int(r.post_neuron in ds.named_ids)])


def centroid_positions(ds: ConnectomeDataset) -> dict[str, tuple[float, float, float]]:
    """Mean of every synaptic endpoint belonging to each neuron.

    A neuron contributes its pre-synaptic coordinate for records it sends and its
    post-synaptic coordinate for records it receives; an autapse contributes both.
    """
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for r in ds.records:
        for nid, pos in ((r.pre_neuron, r.pre_pos), (r.post_neuron, r.post_pos)):
            if nid in sums:
                sums[nid] += pos
                counts[nid] += 1
            else:
                sums[nid] = np.array(pos, dtype=np.float64)
                counts[nid] = 1
    for nid in ds.named_ids:
        if nid not in counts:
            raise DataError(f"neuron {nid!r} has no synapse endpoints")
    return {nid: tuple((sums[nid] / counts[nid]).tolist()) for nid in ds.neuron_ids()}


def build_connectome_graph(ds: ConnectomeDataset) -> SpatialGraph:
    """Undirected simple graph with self-loops; directions and multiplicities dropped.

    Vertices are numbered in first-appearance order of neuron ids.
    """
    centroids = centroid_positions(ds)
    ids = ds.neuron_ids()
    index = {nid: k for k, nid in enumerate(ids)}
    pairs = {tuple(sorted((index[r.pre_neuron], index[r.post_neuron]))) for r in ds.records}
    positions = np.array([centroids[nid] for nid in ids], dtype=np.float64).reshape(-1, 3)
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return SpatialGraph(positions, edges, tuple(ids))


def named_vertices(g: SpatialGraph, named_ids) -> list[int]:
    if g.labels is None:
        return []
    return [v for v, name in enumerate(g.labels) if name in named_ids]


def reference_graphs(ds: ConnectomeDataset, full_trim: int = 1,
                     named_trim: int = 2) -> dict[str, SpatialGraph]:
    """``full`` (top-``full_trim`` removed) and ``named`` (named subgraph, top-``named_trim`` removed)."""
    full = build_connectome_graph(ds)
    keep = named_vertices(full, ds.named_ids)
    if not keep:
        raise DataError("dataset has no named neurons; named reference graph is empty")
    try:
        named, _ = induced_subgraph(full, keep)
        return {
            "full": trim_top_degree(full, full_trim),
            "named": trim_top_degree(named, named_trim),
        }
    except GraphError as exc:
        raise DataError(str(exc)) from None
