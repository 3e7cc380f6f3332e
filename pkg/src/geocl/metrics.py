"""Graph statistics used to compare synthetic ensembles with a reference graph.

Adjacency conventions: a self-loop sets ``A[i, i] = 1`` for spectra and walk
counts; triangles and shortest paths ignore loops.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels
from .graph import SpatialGraph, degrees

SCALAR_STATS = ("self_loops", "connected_components", "non_isolated_components",
                "max_degree", "edges", "triangles", "closed_4_walks")

STAT_TITLES = {
    "self_loops": "Self-loops",
    "connected_components": "Connected Components",
    "non_isolated_components": "Non-Iso. Conn. Comp.",
    "max_degree": "Max Valency",
    "edges": "Number of Edges",
    "triangles": "Number of Triangles",
    "closed_4_walks": "Number of Closed 4-Walks",
}


class SpectrumError(RuntimeError):
    pass


class EigencentralityError(RuntimeError):
    """Power iteration failed or the leading eigenvalue is not simple."""


def _csr(g: SpatialGraph):
    a = g.simple_adjacency
    return (np.ascontiguousarray(a.indptr, dtype=np.int64),
            np.ascontiguousarray(a.indices, dtype=np.int64))


def triangles_per_vertex(g: SpatialGraph) -> np.ndarray:
    indptr, indices = _csr(g)
    return kernels.triangles_per_vertex(indptr, indices, g.n)


def count_triangles(g: SpatialGraph) -> int:
    return int(triangles_per_vertex(g).sum()) // 3


def closed_4_walks(g: SpatialGraph) -> int:
    """``trace(A^4)``, equal to the squared Frobenius norm of ``A^2`` for symmetric ``A``."""
    a2 = g.adjacency @ g.adjacency
    return int((a2.data.astype(np.int64) ** 2).sum())


def components(g: SpatialGraph) -> tuple[int, int]:
    """(all components, components with at least two vertices)."""
    if g.n == 0:
        return 0, 0
    total, labels = connected_components(g.simple_adjacency, directed=False)
    sizes = np.bincount(labels)
    return int(total), int((sizes >= 2).sum())


def adjacency_spectrum(g: SpatialGraph, check: bool = True) -> np.ndarray:
    """All adjacency eigenvalues, ascending."""
    if g.n == 0:
        return np.empty(0)
    a = g.adjacency.toarray().astype(np.float64)
    try:
        if not check:
            return np.linalg.eigvalsh(a)
        lam, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"symmetric eigensolver failed: {exc}") from None
    resid = np.linalg.norm(a @ vecs - vecs * lam, axis=0)
    bound = 1e-8 * max(np.linalg.norm(a, 2) if g.n <= 64 else np.abs(lam).max(), 1.0)
    if resid.max() > bound:
        raise SpectrumError(f"eigenpair residual {resid.max():.2e} exceeds {bound:.2e}")
    return lam


def betweenness(g: SpatialGraph) -> np.ndarray:
    indptr, indices = _csr(g)
    return kernels.betweenness(indptr, indices, g.n)


def closeness(g: SpatialGraph) -> np.ndarray:
    indptr, indices = _csr(g)
    return kernels.closeness(indptr, indices, g.n)


def _perron(a: sp.csr_matrix, tol: float, max_iter: int) -> tuple[float, np.ndarray]:
    """Leading eigenpair of an irreducible non-negative symmetric matrix.

    Iterates with ``A + I`` so that bipartite components do not oscillate.
    """
    m = a.shape[0]
    v = np.full(m, 1.0 / math.sqrt(m))
    for _ in range(max_iter):
        av = a @ v
        lam = float(v @ av)
        if np.linalg.norm(av - lam * v) <= tol * max(lam, 1.0):
            return lam, v
        w = av + v
        v = w / np.linalg.norm(w)
    raise EigencentralityError(f"power iteration did not converge in {max_iter} steps")


def eigencentrality(g: SpatialGraph, tol: float = 1e-12, max_iter: int = 200_000,
                    degenerate_tol: float = 1e-9) -> np.ndarray:
    """Unit-norm non-negative Perron vector of the adjacency matrix.

    Each connected component's leading eigenpair comes from power iteration; the
    vector is supported on the component with the largest eigenvalue. Two
    components sharing that eigenvalue make the vector non-unique, which raises.
    """
    n = g.n
    if n == 0:
        return np.empty(0)
    a = g.adjacency.astype(np.float64).tocsr()
    ncomp, labels = connected_components(g.simple_adjacency, directed=False)
    best: list[tuple[float, np.ndarray, np.ndarray]] = []
    top = -math.inf
    for c in range(ncomp):
        members = np.nonzero(labels == c)[0]
        if members.size == 1:
            lam, vec = float(a[members[0], members[0]]), np.ones(1)
        else:
            lam, vec = _perron(a[members][:, members], tol, max_iter)
        if not best or lam > top + degenerate_tol * max(abs(top), 1.0):
            best = [(lam, members, vec)]
            top = lam
        elif abs(lam - top) <= degenerate_tol * max(abs(top), 1.0):
            best.append((lam, members, vec))
    if len(best) > 1:
        raise EigencentralityError(
            f"leading eigenvalue {top:.6g} is shared by {len(best)} components")
    out = np.zeros(n)
    _, members, vec = best[0]
    out[members] = np.abs(vec)
    return out / np.linalg.norm(out)


@dataclass
class GraphStats:
    self_loops: int
    connected_components: int
    non_isolated_components: int
    max_degree: int
    edges: int
    triangles: int
    closed_4_walks: int
    spectrum: np.ndarray | None = field(default=None, repr=False)
    betweenness: np.ndarray | None = field(default=None, repr=False)
    closeness: np.ndarray | None = field(default=None, repr=False)
    eigencentrality: np.ndarray | None = field(default=None, repr=False)

    def scalars(self) -> dict[str, int]:
        return {k: getattr(self, k) for k in SCALAR_STATS}


def stats_bundle(g: SpatialGraph, spectrum: bool = True, centralities: bool = True) -> GraphStats:
    total, non_iso = components(g)
    deg = degrees(g)
    st = GraphStats(
        self_loops=g.num_loops,
        connected_components=total,
        non_isolated_components=non_iso,
        max_degree=int(deg.max()) if g.n else 0,
        edges=g.num_edges,
        triangles=count_triangles(g),
        closed_4_walks=closed_4_walks(g),
    )
    if spectrum:
        st.spectrum = adjacency_spectrum(g)
    if centralities:
        st.betweenness = betweenness(g)
        st.closeness = closeness(g)
        try:
            st.eigencentrality = eigencentrality(g)
        except EigencentralityError:
            st.eigencentrality = np.full(g.n, np.nan)
    return st


@dataclass(frozen=True)
class SummaryRow:
    mean: float
    std: float
    min: float
    max: float
    reference: float | None
    z: float | None


@dataclass(frozen=True)
class EnsembleSummary:
    replicates: int
    rows: dict[str, SummaryRow]

    def to_dict(self) -> dict:
        return {"replicates": self.replicates,
                "statistics": {k: asdict(v) for k, v in self.rows.items()}}


def ensemble_summary(stats: list[GraphStats], reference: GraphStats | None = None) -> EnsembleSummary:
    """Sample mean and standard deviation (n-1 denominator) per scalar statistic."""
    if len(stats) < 2:
        raise ValueError("at least two replicates are needed for a standard deviation")
    rows = {}
    for key in SCALAR_STATS:
        vals = np.array([getattr(s, key) for s in stats], dtype=np.float64)
        mean = float(vals.mean())
        std = float(vals.std(ddof=1))
        ref = None if reference is None else float(getattr(reference, key))
        z = None
        if ref is not None and std > 0:
            z = (ref - mean) / std
        rows[key] = SummaryRow(mean, std, float(vals.min()), float(vals.max()), ref, z)
    return EnsembleSummary(len(stats), rows)


# -- exports -------------------------------------------------------------------

def write_stats_csv(stats: list[GraphStats], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", *SCALAR_STATS])
        for r, s in enumerate(stats):
            w.writerow([r, *(getattr(s, k) for k in SCALAR_STATS)])


def read_stats_csv(path) -> list[GraphStats]:
    with open(path, newline="") as fh:
        return [GraphStats(**{k: int(row[k]) for k in SCALAR_STATS}) for row in csv.DictReader(fh)]


def write_summary_json(summary: EnsembleSummary, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def comparison_table(summary: EnsembleSummary) -> str:
    """Reference value, mean and standard deviation per statistic as a text table."""
    lines = [f"{'':28s} {'Ref. Graph':>12s} {'Mean':>14s} {'St. Dev.':>12s}"]
    for key in SCALAR_STATS:
        row = summary.rows[key]
        ref = "" if row.reference is None else f"{row.reference:g}"
        lines.append(f"{STAT_TITLES[key]:28s} {ref:>12s} {row.mean:>14.6g} {row.std:>12.6g}")
    return "\n".join(lines) + "\n"


def write_spectrum_histogram(reference: np.ndarray, simulated: list[np.ndarray], path,
                             bins: int = 60) -> None:
    """Eigenvalue densities of the reference and the pooled simulations on shared bins."""
    pooled = np.concatenate(simulated) if simulated else np.empty(0)
    both = np.concatenate([reference, pooled])
    edges = np.linspace(both.min(), both.max(), bins + 1) if both.size else np.linspace(0, 1, bins + 1)
    ref_counts, _ = np.histogram(reference, edges)
    sim_counts, _ = np.histogram(pooled, edges)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "reference_count", "simulated_count", "simulated_mean_count"])
        for k in range(bins):
            w.writerow([repr(float(edges[k])), repr(float(edges[k + 1])), int(ref_counts[k]),
                        int(sim_counts[k]), repr(sim_counts[k] / max(len(simulated), 1))])


def write_rank_plot(measure: str, reference: np.ndarray, simulated: np.ndarray, path) -> None:
    """Values of one centrality sorted descending, reference against one simulation."""
    ref = np.sort(np.asarray(reference))[::-1]
    sim = np.sort(np.asarray(simulated))[::-1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", f"reference_{measure}", f"simulated_{measure}"])
        for k in range(max(ref.size, sim.size)):
            w.writerow([k + 1, repr(float(ref[k])) if k < ref.size else "",
                        repr(float(sim[k])) if k < sim.size else ""])
