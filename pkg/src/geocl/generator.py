"""Sampling graphs from the geometric Chung-Lu connection function.

An edge between ``i`` and ``j`` at distance ``d`` appears independently with
probability ``min(rho_i rho_j / sum(rho), 1) * ratio(d) / epsilon``, clamped to
``[0, 1]``, where ``ratio`` is the fitted ``F1'/F2'``. Reference positions stay
fixed and the intensities are shuffled over them once per replicate.

Every replicate draws from its own generator seeded by :func:`child_seed`, so
replicate ``r`` is the same graph whichever worker builds it, and pairs are
always consumed in row-major upper-triangle order regardless of block size.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .estimation import DistanceLaw, LogisticCurve, ModelFit
from .graph import DISTANCE_CACHE_CAP, SpatialGraph

MASK64 = (1 << 64) - 1
# SplitMix64 constants; replicate seeds depend on them and must never change.
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def child_seed(seed: int, replicate: int) -> int:
    """64-bit seed of replicate ``replicate``: ``splitmix64(splitmix64(seed) ^ replicate)``."""
    return splitmix64(splitmix64(seed & MASK64) ^ (replicate & MASK64))


def worker_count(requested: int | None = None) -> int:
    """Worker cap: explicit request, else ``GEOCL_THREADS``, else 1."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("GEOCL_THREADS")
    return max(1, int(env)) if env else 1


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    replicates: int = 1
    permute_intensities: bool = True
    clamp_probabilities: bool = True
    block_rows: int = 256

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.clamp_probabilities:
            raise ValueError("probabilities are always clamped to [0, 1]")
        if self.block_rows < 1:
            raise ValueError("block_rows must be positive")


def connection_probability(fit: ModelFit, rho_i, rho_j, d):
    """Edge probability for intensities ``rho_i, rho_j`` at distance ``d``."""
    rho_i = np.asarray(rho_i, dtype=np.float64)
    rho_j = np.asarray(rho_j, dtype=np.float64)
    if fit.sum_rho <= 0:
        return np.zeros(np.broadcast(rho_i, rho_j, np.asarray(d)).shape)
    cl = np.minimum(rho_i * rho_j / fit.sum_rho, 1.0)
    p = np.clip(cl * fit.ratio(d) / fit.epsilon, 0.0, 1.0)
    return p[()] if p.ndim == 0 else p


class PairTable:
    """Upper-triangle pairs of fixed positions with their distance factor ``ratio(d)/epsilon``.

    Blocks of rows are cached when ``n`` is within the distance cap and
    recomputed on demand above it.
    """

    def __init__(self, positions: np.ndarray, law: DistanceLaw, block_rows: int = 256,
                 cap: int = DISTANCE_CACHE_CAP):
        self.positions = np.asarray(positions, dtype=np.float64)
        self.law = law
        self.block_rows = block_rows
        self.cache = self.n <= cap

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def _make_block(self, start: int):
        stop = min(start + self.block_rows, self.n)
        rows, cols = [], []
        for i in range(start, stop):
            cols.append(np.arange(i, self.n))
            rows.append(np.full(self.n - i, i))
        iu = np.concatenate(rows)
        ju = np.concatenate(cols)
        diff = self.positions[iu] - self.positions[ju]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        q = self.law.ratio(d) / self.law.epsilon
        return iu, ju, q

    @cached_property
    def _blocks(self):
        return [self._make_block(s) for s in range(0, self.n, self.block_rows)]

    def blocks(self):
        if self.cache:
            yield from self._blocks
        else:
            for s in range(0, self.n, self.block_rows):
                yield self._make_block(s)


def _sample(table: PairTable, rho: np.ndarray, sum_rho: float, rng: np.random.Generator) -> np.ndarray:
    kept = []
    for iu, ju, q in table.blocks():
        u = rng.random(iu.size)
        if sum_rho <= 0:
            continue
        p = np.clip(np.minimum(rho[iu] * rho[ju] / sum_rho, 1.0) * q, 0.0, 1.0)
        hit = u < p
        kept.append(np.column_stack([iu[hit], ju[hit]]))
    if not kept:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(kept).astype(np.int64)


def generate_graph(reference: SpatialGraph, fit: ModelFit, config: GeneratorConfig,
                   replicate_index: int, table: PairTable | None = None) -> SpatialGraph:
    """One synthetic graph on the reference positions."""
    if table is None:
        table = PairTable(reference.positions, fit.law, config.block_rows)
    rng = np.random.default_rng(child_seed(config.seed, replicate_index))
    rho = np.asarray(fit.rho_hat, dtype=np.float64)
    if config.permute_intensities:
        rho = rho[rng.permutation(reference.n)]
    edges = _sample(table, rho, float(fit.sum_rho), rng)
    return SpatialGraph._trusted(reference.positions, edges, None)


def generate_ensemble(reference: SpatialGraph, fit: ModelFit, config: GeneratorConfig,
                      workers: int | None = None) -> list[SpatialGraph]:
    """``config.replicates`` independent graphs, ordered by replicate index."""
    table = PairTable(reference.positions, fit.law, config.block_rows)
    if table.cache:
        table._blocks  # build once before threads share it

    def one(r):
        return generate_graph(reference, fit, config, r, table)

    nworkers = min(worker_count(workers), config.replicates)
    if nworkers == 1:
        return [one(r) for r in range(config.replicates)]
    with ThreadPoolExecutor(nworkers) as pool:
        return list(pool.map(one, range(config.replicates)))


def expected_edge_count(reference: SpatialGraph, fit: ModelFit, block_rows: int = 256) -> float:
    """Sum of pair probabilities with intensities left on their own vertices."""
    table = PairTable(reference.positions, fit.law, block_rows)
    rho = np.asarray(fit.rho_hat, dtype=np.float64)
    if fit.sum_rho <= 0:
        return 0.0
    total = 0.0
    for iu, ju, q in table.blocks():
        total += float(np.clip(np.minimum(rho[iu] * rho[ju] / fit.sum_rho, 1.0) * q, 0, 1).sum())
    return total


# -- uniform torus sandbox ------------------------------------------------------

@dataclass(frozen=True)
class TorusConfig:
    """Generic model on the unit torus ``[0, 1)^dim`` with uniform vertex placement.

    ``f1_shape`` is a logistic truncated to ``[0, diameter]`` and rescaled so that
    ``F1(0) = 0`` and ``F1(diameter) = epsilon``; ``None`` makes ``F1`` a multiple of
    ``F2`` (pure Chung-Lu). ``epsilon`` must equal ``sum(rho) / n**2``, the density
    the intensities imply; it is derived when omitted.
    """

    dim: int
    rho: np.ndarray
    f1_shape: LogisticCurve | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"torus dimension must be 1 or 2, got {self.dim}")
        rho = np.asarray(self.rho, dtype=np.float64)
        if rho.ndim != 1 or rho.size == 0 or np.any(rho < 0):
            raise ValueError("rho must be a non-empty vector of non-negative intensities")
        object.__setattr__(self, "rho", rho)
        implied = float(rho.sum()) / rho.size ** 2
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", implied)
        elif not math.isclose(self.epsilon, implied, rel_tol=1e-9):
            raise ValueError(f"epsilon {self.epsilon} incompatible with intensities "
                             f"(sum(rho)/n^2 = {implied})")

    @property
    def n(self) -> int:
        return self.rho.size

    @property
    def diameter(self) -> float:
        return 0.5 * math.sqrt(self.dim)

    def F2(self, x):
        return torus_F2(self.dim, x)

    def F2_prime(self, x):
        return torus_F2_prime(self.dim, x)

    def F1(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.f1_shape is None:
            return self.epsilon * self.F2(x)
        lo, hi = self.f1_shape.value(0.0), self.f1_shape.value(self.diameter)
        xc = np.clip(x, 0.0, self.diameter)
        return self.epsilon * (self.f1_shape.value(xc) - lo) / (hi - lo)

    def ratio_over_epsilon(self, x):
        """``F1'(x) / (epsilon F2'(x))`` for ``0 < x <= diameter``."""
        x = np.asarray(x, dtype=np.float64)
        if self.f1_shape is None:
            return np.ones_like(x)
        span = self.f1_shape.value(self.diameter) - self.f1_shape.value(0.0)
        with np.errstate(divide="ignore"):
            return self.f1_shape.derivative(x) / (span * self.F2_prime(x))


def torus_F2(dim: int, x):
    """P(distance <= x) for two independent uniform points on the unit torus."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, None)
    if dim == 1:
        return np.minimum(2.0 * x, 1.0)
    h = 0.5
    # disc of radius r in the unit square minus the four caps beyond its sides
    r = np.minimum(x, math.sqrt(2) * h)
    rc = np.maximum(r, h)
    caps = 4.0 * (rc ** 2 * np.arccos(h / rc) - h * np.sqrt(rc ** 2 - h ** 2))
    return np.pi * r ** 2 - np.where(r > h, caps, 0.0)


def torus_F2_prime(dim: int, x):
    x = np.asarray(x, dtype=np.float64)
    if dim == 1:
        return np.where((x >= 0) & (x <= 0.5), 2.0, 0.0)
    h = 0.5
    with np.errstate(invalid="ignore"):
        corner = 2.0 * x * (np.pi - 4.0 * np.arccos(np.minimum(h / np.maximum(x, h), 1.0)))
    return np.where(x <= h, 2.0 * np.pi * x, np.where(x <= math.sqrt(2) * h, corner, 0.0))


def torus_distances(points: np.ndarray, iu: np.ndarray, ju: np.ndarray) -> np.ndarray:
    diff = np.abs(points[iu] - points[ju])
    diff = np.minimum(diff, 1.0 - diff)
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def torus_generate(tc: TorusConfig, seed: int) -> SpatialGraph:
    """Sample one graph on the torus; vertex ``i`` carries intensity ``tc.rho[i]``.

    Positions are iid uniform, so fixing the intensity order loses nothing. The
    unused trailing coordinates of each 3D position are zero; distances on the
    torus come from :func:`torus_distances`. Self-loops carry the point mass of
    ``F1`` at zero and are drawn with the plain Chung-Lu probability
    ``min(rho_i^2 / sum(rho), 1)``.
    """
    rng = np.random.default_rng(seed & MASK64)
    n = tc.n
    pts = rng.random((n, tc.dim))
    total = float(tc.rho.sum())
    iu, ju = np.triu_indices(n, k=1)
    d = torus_distances(pts, iu, ju)
    u = rng.random(iu.size)
    u_loop = rng.random(n)
    edges = [np.empty((0, 2), dtype=np.int64)]
    if total > 0:
        p = np.clip(np.minimum(tc.rho[iu] * tc.rho[ju] / total, 1.0) * tc.ratio_over_epsilon(d), 0, 1)
        hit = u < p
        edges.append(np.column_stack([iu[hit], ju[hit]]))
        loops = np.nonzero(u_loop < np.minimum(tc.rho ** 2 / total, 1.0))[0]
        edges.append(np.column_stack([loops, loops]))
    e = np.concatenate(edges).astype(np.int64)
    positions = np.zeros((n, 3))
    positions[:, :tc.dim] = pts
    return SpatialGraph(positions, e, None)
