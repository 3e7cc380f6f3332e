"""Synthetic synapse tables for demos and tests, and the bundled toy dataset."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .ingest import ConnectomeDataset, SynapseRecord, read_synapses

TOY_FILE = "toy_synapses.csv"


def toy_dataset_path() -> Path:
    return Path(str(resources.files("geocl") / "data" / TOY_FILE))


def load_toy_dataset() -> ConnectomeDataset:
    return read_synapses(toy_dataset_path())


def synthesize_connectome(n: int = 50, seed: int = 7, extent=(2000.0, 2000.0, 500.0),
                          decay: float = 400.0, mean_degree: float = 8.0,
                          named_fraction: float = 0.6, jitter: float = 20.0) -> ConnectomeDataset:
    """Synapse records from a distance-decaying, degree-heterogeneous random graph.

    Neurons sit uniformly in a box; each neuron gets a Pareto-tailed weight and
    a pair is joined with probability ``min(1, c w_i w_j exp(-d/decay))``, with
    ``c`` tuned to the requested mean degree. Each joined pair becomes one to
    three synapses in random directions whose endpoints are jittered around the
    neuron positions. Autapses appear with probability proportional to weight.
    """
    rng = np.random.default_rng(seed)
    pos = rng.random((n, 3)) * np.asarray(extent)
    w = 1.0 + rng.pareto(2.5, n)
    iu, ju = np.triu_indices(n, k=1)
    d = np.linalg.norm(pos[iu] - pos[ju], axis=1)
    base = w[iu] * w[ju] * np.exp(-d / decay)
    lo, hi = 1e-9, 1e9
    for _ in range(200):
        c = np.sqrt(lo * hi)
        if 2 * np.minimum(c * base, 1.0).sum() / n > mean_degree:
            hi = c
        else:
            lo = c
    hit = rng.random(iu.size) < np.minimum(c * base, 1.0)
    pairs = list(zip(iu[hit].tolist(), ju[hit].tolist()))
    loop_p = np.minimum(0.1 * w / w.mean(), 1.0)
    pairs += [(v, v) for v in np.nonzero(rng.random(n) < loop_p)[0].tolist()]

    ids = [f"n{v:04d}" for v in range(n)]
    named = set(ids[v] for v in np.nonzero(rng.random(n) < named_fraction)[0])
    records = []
    used = set()
    for a, b in pairs:
        for _ in range(int(rng.integers(1, 4))):
            pre, post = (a, b) if rng.random() < 0.5 else (b, a)
            records.append(SynapseRecord(
                ids[pre], ids[post],
                tuple((pos[pre] + rng.normal(0, jitter, 3)).round(3).tolist()),
                tuple((pos[post] + rng.normal(0, jitter, 3)).round(3).tolist())))
            used.update((ids[pre], ids[post]))
    return ConnectomeDataset(tuple(records), frozenset(named & used))
