import io

import numpy as np
import pytest

from geocl.datasets import synthesize_connectome
from geocl.graph import degrees
from geocl.ingest import (DataError, build_connectome_graph, centroid_positions, named_vertices,
                          parse_synapses, read_synapses, reference_graphs, write_synapses)

HEADER = "pre_id,post_id,pre_x,pre_y,pre_z,post_x,post_y,post_z,named_pre,named_post\n"


def table(*rows):
    return HEADER + "".join(r + "\n" for r in rows)


class TestParse:
    def test_basic(self):
        ds = parse_synapses(table("a,b,0,0,0,2,0,0,1,0", "b,a,4,0,0,6,0,0,0,1"))
        assert len(ds.records) == 2
        assert ds.named_ids == frozenset({"a"})
        assert ds.neuron_ids() == ["a", "b"]

    def test_stream_input(self):
        ds = parse_synapses(io.StringIO(table("a,a,0,0,0,0,0,0,true,true")))
        assert ds.records[0].pre_neuron == ds.records[0].post_neuron == "a"

    def test_missing_column(self):
        with pytest.raises(DataError, match="missing"):
            parse_synapses("pre_id,post_id\na,b\n")

    def test_empty(self):
        with pytest.raises(DataError):
            parse_synapses("")

    def test_bad_number_reports_line(self):
        with pytest.raises(DataError, match="line 3"):
            parse_synapses(table("a,b,0,0,0,1,1,1,0,0", "a,b,x,0,0,1,1,1,0,0"))

    def test_bad_boolean(self):
        with pytest.raises(DataError, match="named_pre"):
            parse_synapses(table("a,b,0,0,0,1,1,1,maybe,0"))

    def test_ragged_row(self):
        with pytest.raises(DataError, match="line 2"):
            parse_synapses(table("a,b,0,0,0"))

    def test_roundtrip(self, tmp_path):
        ds = synthesize_connectome(20, seed=3)
        write_synapses(ds, tmp_path / "s.csv")
        back = read_synapses(tmp_path / "s.csv")
        assert back.records == ds.records
        assert back.named_ids == ds.named_ids


class TestGraph:
    def test_centroids_use_both_roles(self):
        ds = parse_synapses(table("a,b,0,0,0,2,0,0,0,0", "b,a,4,0,0,6,0,0,0,0"))
        c = centroid_positions(ds)
        assert c["a"] == (3.0, 0.0, 0.0)  # (0 + 6) / 2
        assert c["b"] == (3.0, 0.0, 0.0)  # (2 + 4) / 2

    def test_autapse_contributes_both_endpoints(self):
        ds = parse_synapses(table("a,a,0,0,0,2,0,0,0,0"))
        assert centroid_positions(ds)["a"] == (1.0, 0.0, 0.0)

    def test_direction_and_multiplicity_collapse(self):
        ds = parse_synapses(table("a,b,0,0,0,1,0,0,0,0", "b,a,1,0,0,0,0,0,0,0",
                                  "a,b,0,0,0,1,0,0,0,0", "c,c,5,5,5,5,5,5,0,0"))
        g = build_connectome_graph(ds)
        assert g.n == 3
        assert g.edges.tolist() == [[0, 1], [2, 2]]
        assert g.labels == ("a", "b", "c")
        assert degrees(g).tolist() == [1, 1, 1]

    def test_reference_graphs(self):
        ds = synthesize_connectome(40, seed=11)
        refs = reference_graphs(ds, full_trim=1, named_trim=2)
        full = build_connectome_graph(ds)
        assert refs["full"].n == full.n - 1
        assert refs["named"].n == len(named_vertices(full, ds.named_ids)) - 2
        assert set(refs["named"].labels) <= ds.named_ids

    def test_no_named_neurons(self):
        ds = parse_synapses(table("a,b,0,0,0,1,0,0,0,0"))
        with pytest.raises(DataError):
            reference_graphs(ds)

    def test_toy_dataset_shape(self, toy_dataset, toy_graphs):
        g = build_connectome_graph(toy_dataset)
        assert g.n == 50
        assert toy_graphs["full"].n == 49
        assert toy_graphs["named"].n == len(named_vertices(g, toy_dataset.named_ids)) - 2
        assert toy_graphs["full"].num_loops > 0


class TestSynthesis:
    def test_deterministic(self):
        a = synthesize_connectome(30, seed=5)
        b = synthesize_connectome(30, seed=5)
        assert a == b

    def test_mean_degree_roughly_tracks_request(self):
        ds = synthesize_connectome(150, seed=2, mean_degree=6.0)
        g = build_connectome_graph(ds)
        assert 3.0 < degrees(g).mean() < 9.0
