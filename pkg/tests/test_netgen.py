import numpy as np
import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from debunkd.netgen import (
    GraphFormatError,
    bollobas_exponents,
    bollobas_process,
    ego_subgraph,
    from_edges,
    generate_scale_free,
    load_edge_list,
    read_graph,
    write_graph,
)


def ccdf_exponent(degrees, kmin=10, min_count=10):
    """Power-law exponent from a least-squares fit of the log-log complementary CDF."""
    degrees = np.asarray(degrees)
    ks = np.unique(degrees[degrees >= kmin])
    ccdf = np.array([(degrees >= k).mean() for k in ks])
    keep = ccdf * len(degrees) >= min_count
    slope = np.polyfit(np.log(ks[keep]), np.log(ccdf[keep]), 1)[0]
    return 1 - slope


def test_paper_sized_network_is_simple():
    g = generate_scale_free(1250, 0.05, 0.8, 0.15, seed=1)
    assert g.n == 1250
    edges = g.edges()
    assert all(u != v for u, v in edges)
    assert len(edges) == len(set(edges))
    assert g.n_edges == len(edges) > 0


def test_single_node():
    g = generate_scale_free(1, 0.05, 0.8, 0.15, seed=3)
    assert g.n == 1 and g.n_edges == 0
    assert g.e.tolist() == [0]
    assert g.c.tolist() == [1.0]
    assert g.x.tolist() == [1.0]


@pytest.mark.parametrize("args", [(10, 0.1, 0.8, 0.15), (10, 0.5, 0.5, 0.5), (0, 0.05, 0.8, 0.15)])
def test_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        generate_scale_free(*args, seed=1)


def test_cost_and_midpoint_formulas():
    g = generate_scale_free(300, 0.05, 0.8, 0.15, seed=2)
    top = g.e.max()
    for i in range(g.n):
        assert g.e[i] == len(g.out_edges[i])
        assert g.c[i] == (g.e[i] / top) * 9 + 1
        assert g.x[i] == (g.e[i] / top) * 2 + 1
    assert g.c.min() >= 1 and g.c.max() == 10
    assert g.x.min() >= 1 and g.x.max() == 3


def test_same_seed_same_edges():
    a = generate_scale_free(500, 0.05, 0.8, 0.15, seed=11)
    b = generate_scale_free(500, 0.05, 0.8, 0.15, seed=11)
    c = generate_scale_free(500, 0.05, 0.8, 0.15, seed=12)
    assert a.edges() == b.edges()
    assert a.edges() != c.edges()


def test_follower_tail_matches_theory():
    theory, _ = bollobas_exponents(0.05, 0.8, 0.15)
    g = generate_scale_free(10000, 0.05, 0.8, 0.15, seed=1)
    assert abs(ccdf_exponent(g.e) - theory) <= 0.3


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_raw_process_in_degree_exponent(seed):
    theory, _ = bollobas_exponents(0.05, 0.8, 0.15)
    raw = bollobas_process(10000, 0.05, 0.8, 0.15, seed)
    indeg = np.bincount([w for _, w in raw], minlength=10000)
    assert abs(ccdf_exponent(indeg) - theory) <= 0.3


def test_load_undirected_path(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("0 1\n1 2\n")
    g = load_edge_list(p, undirected=True)
    assert g.n == 3 and g.n_edges == 4
    assert g.e.tolist() == [1, 2, 1]


def test_load_drops_duplicates(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# comment\n0 1\n0 1\n")
    g = load_edge_list(p, undirected=False)
    assert g.n == 2 and g.n_edges == 1


def test_load_compacts_ids(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("10 30\n30 20\n")
    g = load_edge_list(p, undirected=False)
    assert g.edges() == [(0, 2), (2, 1)]


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("0 1\n# ok\n1 x\n")
    with pytest.raises(GraphFormatError, match=":3:"):
        load_edge_list(p)


def test_empty_file(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# nothing\n\n")
    with pytest.raises(GraphFormatError):
        load_edge_list(p)


def bfs_ball(adj, center, radius):
    ball, frontier = {center}, {center}
    for _ in range(radius):
        frontier = {v for u in frontier for v in adj[u]} - ball
        ball |= frontier
    return ball


def test_ego_radius_zero(small_graph):
    sub = ego_subgraph(small_graph, 5, 0)
    assert sub.n == 1 and sub.n_edges == 0


def test_ego_large_radius_is_whole_graph():
    g = from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    sub = ego_subgraph(g, 2, 10)
    assert sub.n == 5 and sub.edges() == g.edges()


def test_ego_star_from_leaf(star):
    adj = {u: nbrs for u, nbrs in enumerate(star.undirected_neighbors())}
    for radius in (1, 2):
        expected = bfs_ball(adj, 3, radius)
        assert ego_subgraph(star, 3, radius).n == len(expected)
    assert ego_subgraph(star, 3, 1).n == 2
    assert ego_subgraph(star, 3, 2).n == 6


def test_ego_recomputes_costs():
    g = from_edges(4, [(0, 1), (0, 2), (0, 3), (3, 1)])
    sub = ego_subgraph(g, 3, 1)  # nodes 0, 1, 3
    assert sub.n == 3
    assert sub.e.max() == 2
    assert sub.c.max() == 10


def test_ego_bad_center(small_graph):
    with pytest.raises(IndexError):
        ego_subgraph(small_graph, small_graph.n, 1)


def test_ego_of_loaded_file_matches_networkx(tmp_path):
    # synthetic SNAP-style undirected file with comment header
    rng = np.random.default_rng(0)
    base = nx.gnm_random_graph(400, 1200, seed=3)
    lines = ["# Undirected graph", "# FromNodeId ToNodeId"]
    lines += [f"{u * 7 + 1} {v * 7 + 1}" for u, v in base.edges()]
    rng.shuffle(lines[2:])
    p = tmp_path / "facebook_like.txt"
    p.write_text("\n".join(lines) + "\n")

    ref = nx.read_edgelist(p, nodetype=int, comments="#")
    center_id = 7 * 5 + 1
    ref_ego = nx.ego_graph(ref, center_id, radius=2)

    g = load_edge_list(p, undirected=True)
    ids = sorted(ref.nodes())
    sub = ego_subgraph(g, ids.index(center_id), 2)
    assert sub.n == ref_ego.number_of_nodes()
    assert sub.n_edges == 2 * ref_ego.number_of_edges()


def test_dump_round_trip(tmp_path, small_graph):
    path = tmp_path / "net.txt"
    write_graph(small_graph, path)
    meta = dict(line.split("=") for line in (tmp_path / "net.txt.meta").read_text().splitlines())
    assert meta["n"] == str(small_graph.n) and meta["seed"] == "7"
    again = read_graph(path)
    assert again.n == small_graph.n and again.edges() == small_graph.edges()


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=80))))
def test_degree_sum_equals_edge_count(case):
    n, edges = case
    g = from_edges(n, edges)
    distinct = {(u, v) for u, v in edges if u != v}
    assert int(g.e.sum()) == g.n_edges == len(distinct)
    assert ((1 <= g.c) & (g.c <= 10)).all() and ((1 <= g.x) & (g.x <= 3)).all()
