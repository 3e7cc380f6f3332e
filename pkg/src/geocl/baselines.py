"""Comparison models: classical Chung-Lu and inverse-power distance decay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .generator import MASK64
from .graph import SpatialGraph, distance_rows


@dataclass(frozen=True)
class InversePowerCurve:
    """``k * x**(-beta_exp)``."""

    k: float
    beta_exp: float

    def __post_init__(self):
        if not (self.k > 0 and self.beta_exp > 0):
            raise ValueError("inverse power curve needs k > 0 and beta_exp > 0")

    def value(self, x):
        return self.k * np.asarray(x, dtype=np.float64) ** (-self.beta_exp)

    def probability(self, x):
        return np.clip(self.value(x), 0.0, 1.0)


def chung_lu_probabilities(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        return np.zeros((w.size, w.size))
    return np.minimum(np.outer(w, w) / total, 1.0)


def chung_lu_expected_edges(weights) -> float:
    p = chung_lu_probabilities(weights)
    return float(np.triu(p).sum())


def chung_lu_generate(weights, seed: int, positions=None) -> SpatialGraph:
    """Classical Chung-Lu graph: each pair ``i <= j`` independently with ``min(w_i w_j / sum w, 1)``.

    Self-pairs included. ``positions`` (n x 3) are copied onto the result for
    downstream spatial statistics; they play no part in the sampling.
    """
    w = np.asarray(weights, dtype=np.float64)
    n = w.size
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    rng = np.random.default_rng(seed & MASK64)
    iu, ju = np.triu_indices(n)
    u = rng.random(iu.size)
    total = w.sum()
    if total > 0:
        hit = u < np.minimum(w[iu] * w[ju] / total, 1.0)
        edges = np.column_stack([iu[hit], ju[hit]])
    else:
        edges = np.empty((0, 2), dtype=np.int64)
    pos = np.zeros((n, 3)) if positions is None else np.asarray(positions, dtype=np.float64)
    return SpatialGraph._trusted(pos, edges.astype(np.int64), None)


@dataclass(frozen=True)
class ConnectionProfile:
    """Empirical edge probability of distinct-vertex pairs per distance bin."""

    edges: np.ndarray
    pairs: np.ndarray
    links: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def probability(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.pairs > 0, self.links / np.maximum(self.pairs, 1), np.nan)


def connection_profile(g: SpatialGraph, bins: int = 50, bin_edges=None) -> ConnectionProfile:
    """Pairs and adjacent pairs per bin; default ``bins`` equal-width bins over ``(0, max d]``.

    Bins are half-open ``(lo, hi]``; pairs at distance 0 are excluded.
    """
    if bin_edges is None:
        dmax = max((float(rows.max()) for _, rows in distance_rows(g)), default=0.0)
        if dmax <= 0:
            raise ValueError("no positive pair distances")
        bin_edges = np.linspace(0.0, dmax, bins + 1)
    bin_edges = np.asarray(bin_edges, dtype=np.float64)
    nb = bin_edges.size - 1
    pairs = np.zeros(nb, dtype=np.int64)
    for start, rows in distance_rows(g):
        mask = np.arange(g.n)[None, :] > (np.arange(rows.shape[0])[:, None] + start)
        pairs += _bin_counts(rows[mask], bin_edges)
    e = g.edges[~g.loop_mask]
    d = np.linalg.norm(g.positions[e[:, 0]] - g.positions[e[:, 1]], axis=1)
    links = _bin_counts(d, bin_edges)
    return ConnectionProfile(bin_edges, pairs, links)


def _bin_counts(d: np.ndarray, edges: np.ndarray) -> np.ndarray:
    d = d[(d > edges[0]) & (d <= edges[-1])]
    idx = np.searchsorted(edges, d, side="left") - 1
    return np.bincount(idx, minlength=edges.size - 1)[: edges.size - 1]


def fit_inverse_power(g: SpatialGraph, bins: int = 50) -> InversePowerCurve:
    return fit_inverse_power_profile(connection_profile(g, bins))


def fit_inverse_power_profile(profile: ConnectionProfile) -> InversePowerCurve:
    """Pair-count weighted least squares of ``log p = log k - beta log x`` over bin centres."""
    p = profile.probability
    ok = (profile.pairs > 0) & (profile.links > 0)
    if ok.sum() < 2:
        raise ValueError("need at least two distance bins with observed edges")
    x = np.log(profile.centers[ok])
    y = np.log(p[ok])
    w = profile.pairs[ok].astype(np.float64)
    xm = np.average(x, weights=w)
    ym = np.average(y, weights=w)
    slope = np.sum(w * (x - xm) * (y - ym)) / np.sum(w * (x - xm) ** 2)
    log_k = ym - slope * xm
    return InversePowerCurve(float(np.exp(log_k)), float(-slope))


def short_range_probabilities(g: SpatialGraph, breaks=(0.0, 200.0)) -> dict:
    """Self-loop rate ``loops / n`` and ``P(i ~ j | a < d <= b)`` for consecutive breaks.

    Intervals with no pairs map to ``None``.
    """
    breaks = np.asarray(breaks, dtype=np.float64)
    if np.any(np.diff(breaks) <= 0):
        raise ValueError("breaks must be strictly increasing")
    prof = connection_profile(g, bin_edges=breaks)
    out = {"self_loop": g.num_loops / g.n if g.n else None, "intervals": []}
    for k in range(breaks.size - 1):
        p = prof.links[k] / prof.pairs[k] if prof.pairs[k] else None
        out["intervals"].append({"lo": float(breaks[k]), "hi": float(breaks[k + 1]),
                                 "pairs": int(prof.pairs[k]), "edges": int(prof.links[k]),
                                 "probability": None if p is None else float(p)})
    return out
