import io

import numpy as np
import pytest

from netqec.codes import load_preset
from netqec.partition import (
    Partition,
    PartitionError,
    TannerGraph,
    bipartition,
    build_combined_tanner,
    export_partition,
    import_partition,
    partition_stats,
)


@pytest.fixture(scope="module")
def bb72_graph():
    return build_combined_tanner(load_preset("bb72"))


def _cut_edges(graph, assignment):
    return sum(1 for u, v in graph.edges if assignment[u] != assignment[v])


class TestCombinedTanner:
    def test_vertex_layout(self, bb72_graph):
        g = bb72_graph
        assert g.n_data == 72
        assert g.n_xchecks == 36
        assert g.n_zchecks == 36
        assert len(g.edges) == 432

    def test_edges_are_check_data(self, bb72_graph):
        g = bb72_graph
        for u, v in g.edges:
            assert v < g.n_data <= u  # check endpoint first, data second


class TestBipartition:
    def test_balance_and_cut(self, bb72_graph):
        part = bipartition(bb72_graph, balance_tol=2, restarts=16, seed=0)
        sizes = np.bincount(np.array(part.assignment[:72]), minlength=2)
        assert abs(int(sizes[0]) - int(sizes[1])) <= 2
        assert _cut_edges(bb72_graph, part.assignment) <= 140

    def test_deterministic(self, bb72_graph):
        a = bipartition(bb72_graph, restarts=4, seed=9)
        b = bipartition(bb72_graph, restarts=4, seed=9)
        assert a.assignment == b.assignment

    def test_more_restarts_never_worse(self, bb72_graph):
        few = bipartition(bb72_graph, restarts=2, seed=1)
        many = bipartition(bb72_graph, restarts=16, seed=1)
        assert _cut_edges(bb72_graph, many.assignment) <= \
            _cut_edges(bb72_graph, few.assignment)

    def test_rejects_more_than_two_nodes(self, bb72_graph):
        with pytest.raises(PartitionError):
            bipartition(bb72_graph, nodes=3)

    def test_all_vertices_assigned(self, bb72_graph):
        part = bipartition(bb72_graph, restarts=2, seed=0)
        assert len(part.assignment) == 72 + 36 + 36
        assert set(np.unique(part.assignment)) == {0, 1}


class TestStats:
    def test_consistency(self, bb72_graph):
        part = bipartition(bb72_graph, restarts=16, seed=0)
        stats = partition_stats(bb72_graph, part)
        assert stats.cut_edges_total == \
            _cut_edges(bb72_graph, part.assignment)
        assert stats.cut_edges_total + stats.local_edges == 432
        assert sorted(stats.data_counts) == sorted(
            np.bincount(np.array(part.assignment[:72]), minlength=2).tolist())

    def test_bell_budget_scales_with_rounds(self, bb72_graph):
        part = bipartition(bb72_graph, restarts=16, seed=0)
        stats = partition_stats(bb72_graph, part)
        assert stats.bell_pairs_per_shot(6) == 6 * stats.cut_edges_total
        assert stats.bell_pairs_per_shot(1) == stats.cut_edges_total

    def test_json_dict_keys(self, bb72_graph):
        part = bipartition(bb72_graph, restarts=2, seed=0)
        d = partition_stats(bb72_graph, part).to_json_dict()
        assert "bridge_edges_total" in d
        assert "data_split" in d


class TestImportExport:
    def test_round_trip(self, bb72_graph):
        part = bipartition(bb72_graph, restarts=2, seed=3)
        buf = io.StringIO()
        export_partition(part, buf)
        buf.seek(0)
        back = import_partition(buf, bb72_graph)
        assert back.assignment == part.assignment

    def test_import_validates_vertex_count(self, bb72_graph):
        buf = io.StringIO("data 0 0\ndata 1 1\n")
        with pytest.raises(PartitionError):
            import_partition(buf, bb72_graph)


def test_partition_on_tiny_graph():
    """A 4-cycle with two data and two check vertices splits cleanly."""
    g = TannerGraph(n_data=2, n_xchecks=1, n_zchecks=1,
                    edges=((2, 0), (2, 1), (3, 0), (3, 1)))
    part = bipartition(g, balance_tol=1, restarts=8, seed=0)
    assert len(part.assignment) == 4
    assert _cut_edges(g, part.assignment) == 2
