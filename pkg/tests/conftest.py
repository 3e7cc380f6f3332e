import numpy as np
import pytest
from hypothesis import settings

from geocl.datasets import load_toy_dataset
from geocl.graph import SpatialGraph
from geocl.ingest import reference_graphs

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_graph(rng: np.random.Generator, n: int, p: float = 0.3, loop_p: float = 0.2,
                 extent: float = 1000.0) -> SpatialGraph:
    """Erdos-Renyi graph with self-loops on uniform positions in a cube."""
    pos = rng.random((n, 3)) * extent
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(iu.size) < p
    edges = [np.column_stack([iu[hit], ju[hit]])]
    loops = np.nonzero(rng.random(n) < loop_p)[0]
    edges.append(np.column_stack([loops, loops]))
    return SpatialGraph(pos, np.concatenate(edges).astype(np.int64))


def graph_from_edges(n: int, edges, positions=None) -> SpatialGraph:
    pos = np.zeros((n, 3)) if positions is None else positions
    if positions is None:
        pos[:, 0] = np.arange(n, dtype=float)
    return SpatialGraph.from_edge_list(pos, edges)


@pytest.fixture(scope="session")
def toy_dataset():
    return load_toy_dataset()


@pytest.fixture(scope="session")
def toy_graphs(toy_dataset):
    return reference_graphs(toy_dataset)
