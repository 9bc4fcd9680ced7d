import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longitude_lab import graphs
from longitude_lab.errors import EmptyBall, InvalidGraph


def test_path_graph_measures_sum_to_length():
    g = graphs.path_graph(11, 0.0, 2.0)
    assert g.volume() == pytest.approx(2.0)
    assert g.conductances == pytest.approx(np.full(10, 5.0))


def test_grid_graph_layout_and_base():
    g = graphs.grid_graph(5, 7, (0, 4), (0, 6))
    assert g.n_vertices == 35
    k = 2 * 7 + 3
    assert g.positions[k] == pytest.approx([2.0, 3.0])
    assert g.base == k
    assert g.volume() == pytest.approx(24.0)
    mask = graphs.grid_boundary_mask(5, 7)
    assert mask.sum() == 2 * 5 + 2 * 7 - 4


def test_grid_laplacian_annihilates_linear_functions_inside():
    g = graphs.grid_graph(9, 9, (-1, 1), (-1, 1))
    lap = g.laplacian()
    inner = ~graphs.grid_boundary_mask(9, 9)
    for f in (g.positions[:, 0], 2 * g.positions[:, 1] - 0.5):
        assert np.abs((lap @ f)[inner]).max() < 1e-12


def test_complete_graph():
    g = graphs.complete_graph(5)
    assert g.n_edges == 10
    assert np.allclose(g.edge_vectors() @ np.ones(5), 0.0)


@pytest.mark.parametrize("kwargs, msg", [
    (dict(conductances=[1.0, -1.0]), "conductances"),
    (dict(measures=[1.0, 0.0, 1.0]), "measures"),
    (dict(edges=[[0, 1], [1, 1]]), "self loops"),
    (dict(edges=[[0, 1], [0, 1]], conductances=[1.0, 1.0]), "connected"),
    (dict(base=7), "base"),
])
def test_invalid_graphs(kwargs, msg):
    args = dict(positions=np.arange(3.0), edges=[[0, 1], [1, 2]], conductances=[1.0, 1.0],
                measures=[1.0, 1.0, 1.0])
    args.update(kwargs)
    with pytest.raises(InvalidGraph, match=msg):
        graphs.WeightedGraph(**args)


def test_edge_lengths_must_dominate_extrinsic_distance():
    pos = np.array([[0.0, 0.0], [1.0, 0.0]])
    graphs.WeightedGraph(pos, [[0, 1]], [1.0], [1.0, 1.0], lengths=[1.5])
    with pytest.raises(InvalidGraph, match="exceeds"):
        graphs.WeightedGraph(pos, [[0, 1]], [1.0], [1.0, 1.0], lengths=[0.5])


def test_balls_are_open_and_empty_balls_raise():
    g = graphs.path_graph(11)
    assert g.ball(0.3).sum() == 3  # 0, 0.1, 0.2
    assert g.nonempty_ball(1e-9).sum() == 1
    with pytest.raises(EmptyBall):
        g.nonempty_ball(0.0)


def test_connectivity_of_masks():
    g = graphs.path_graph(6)
    assert g.is_connected(np.array([1, 1, 1, 0, 0, 0], bool))
    assert not g.is_connected(np.array([1, 0, 1, 0, 0, 0], bool))


def test_scaling_rules():
    g = graphs.grid_graph(5, 5)
    s = 3.0
    gs = g.scaled(s)
    assert gs.volume() == pytest.approx(s**2 * g.volume())
    # 2-D Dirichlet energy is scale invariant
    f = g.positions[:, 0] ** 2
    e = float(np.sum(g.conductances * (f[g.edges[:, 0]] - f[g.edges[:, 1]]) ** 2))
    es = float(np.sum(gs.conductances * (f[g.edges[:, 0]] - f[g.edges[:, 1]]) ** 2))
    assert es == pytest.approx(e)


def test_text_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    g = graphs.grid_graph(4, 3, (0, np.pi), (0, np.e))
    g = graphs.WeightedGraph(g.positions, g.edges, g.conductances * rng.uniform(1, 2, g.n_edges),
                             g.measures, base=5)
    path = tmp_path / "g.txt"
    graphs.write_graph(g, path)
    h = graphs.read_graph(path)
    for name in ("positions", "edges", "conductances", "measures"):
        assert np.array_equal(getattr(g, name), getattr(h, name))
    assert h.base == 5
    assert graphs.dumps_graph(h) == path.read_text()


def test_text_round_trip_with_lengths():
    g = graphs.WeightedGraph(np.array([[0.0], [1.0]]), [[0, 1]], [2.0], [0.5, 0.5], lengths=[1.25])
    h = graphs.loads_graph(graphs.dumps_graph(g))
    assert np.array_equal(h.lengths, g.lengths)


@pytest.mark.parametrize("text", [
    "v 0 1.0 1.0\n",                       # dim missing
    "dim 1\nv 0 1.0\n",                    # measure missing
    "dim 1\nv 0 0 1\nv 2 1 1\ne 0 2 1\n",   # id gap
    "dim 1\nx 0\n",                        # unknown record
])
def test_malformed_text_is_rejected(text):
    with pytest.raises(ValueError):
        graphs.loads_graph(text)


@given(st.integers(2, 40), st.floats(-3, 3), st.floats(0.1, 5))
@settings(max_examples=40, deadline=None)
def test_path_graph_round_trip_property(n, a, width):
    g = graphs.path_graph(n, a, a + width)
    h = graphs.loads_graph(graphs.dumps_graph(g))
    assert np.array_equal(g.positions, h.positions)
    assert np.array_equal(g.conductances, h.conductances)
