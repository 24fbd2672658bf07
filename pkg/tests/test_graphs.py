import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from resilnet.errors import CapabilityError, ConfigurationError
from resilnet.graphs import (
    Graph,
    SwitchingNetwork,
    algebraic_connectivity,
    adversary_classification,
    check_bound_chain,
    complete_graph,
    effective_edge_set,
    generate_r_robust_preferential,
    integral_laplacian,
    khop_neighbors,
    laplacian,
    partition_laplacian,
    path_graph,
    pe_margin,
    projection_matrix,
    r_robustness,
    remove_nodes,
    star_graph,
    static_network,
    vertex_connectivity,
)
from resilnet.scenarios import random_connected_graph, split_edges_alternating


def test_graph_rejects_self_loops_and_duplicates():
    with pytest.raises(ValueError):
        Graph(3, ((0, 0),))
    with pytest.raises(ValueError):
        Graph(3, ((0, 1), (1, 0)))
    with pytest.raises(ValueError):
        Graph(3, ((0, 5),))


def test_laplacian_path3():
    lap = laplacian(path_graph(3))
    assert np.array_equal(lap, np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]], dtype=float))


def test_laplacian_complete_lambda2_equals_n():
    for n in (3, 5, 8):
        lam2 = algebraic_connectivity(laplacian(complete_graph(n)))
        assert lam2 == pytest.approx(n, abs=1e-9)


def test_laplacian_empty_edges_zero_matrix():
    g = Graph(4, ())
    assert np.count_nonzero(laplacian(g)) == 0
    assert algebraic_connectivity(laplacian(g)) == 0.0


@given(st.integers(min_value=4, max_value=11), st.integers(0, 10_000))
def test_laplacian_invariants_random(n, seed):
    g = random_connected_graph(np.random.default_rng(seed), n)
    lap = laplacian(g)
    assert np.allclose(lap @ np.ones(n), 0.0, atol=1e-12)
    vals = np.linalg.eigvalsh(lap)
    assert vals[0] == pytest.approx(0.0, abs=1e-9)
    assert vals[-1] <= n + 1e-9
    assert algebraic_connectivity(lap) > 0  # connected by construction


def test_projection_matrix_small_cases():
    q2 = projection_matrix(2)
    assert np.allclose(np.abs(q2), np.array([[1, 1]]) / math.sqrt(2), atol=1e-12)
    q3 = projection_matrix(3)
    expected = np.array(
        [[1 / math.sqrt(2), -1 / math.sqrt(2), 0],
         [1 / math.sqrt(6), 1 / math.sqrt(6), -2 / math.sqrt(6)]]
    )
    assert np.allclose(np.abs(q3), np.abs(expected), atol=1e-12)


@given(st.integers(min_value=2, max_value=40))
def test_projection_matrix_identities(n):
    q = projection_matrix(n)
    assert np.allclose(q @ np.ones(n), 0.0, atol=1e-12)
    assert np.allclose(q @ q.T, np.eye(n - 1), atol=1e-12)
    assert np.allclose(q.T @ q, np.eye(n) - np.ones((n, n)) / n, atol=1e-12)
    spectrum = np.sort(np.linalg.eigvalsh(q.T @ q))
    assert spectrum[0] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(spectrum[1:], 1.0, atol=1e-12)


def test_projection_matrix_rejects_small_n():
    with pytest.raises(ValueError):
        projection_matrix(1)


def test_integral_laplacian_single_mode():
    net = static_network(path_graph(4), 5.0)
    assert np.allclose(integral_laplacian(net, 1.0, 2.0), laplacian(path_graph(4)))


def test_integral_laplacian_two_modes_mean():
    g1, g2 = path_graph(4), star_graph(4)
    net = SwitchingNetwork((g1, g2), ((0.0, 0), (1.0, 1)), 2.0)
    want = 0.5 * (laplacian(g1) + laplacian(g2))
    assert np.allclose(integral_laplacian(net, 0.0, 2.0), want, atol=1e-12)


def test_integral_laplacian_window_out_of_range():
    net = static_network(path_graph(4), 5.0)
    with pytest.raises(ConfigurationError):
        integral_laplacian(net, 4.0, 2.0)


def test_disconnected_modes_connected_in_integral_sense():
    # each mode alone is disconnected; their union is a path
    g1 = Graph(4, ((0, 1), (2, 3)))
    g2 = Graph(4, ((1, 2),))
    sched = tuple((0.5 * k, k % 2) for k in range(8))
    net = SwitchingNetwork((g1, g2), sched, 4.0)
    assert algebraic_connectivity(laplacian(g1)) == 0.0
    lbar = integral_laplacian(net, 0.0, 1.0)
    assert algebraic_connectivity(lbar) > 0.0
    assert pe_margin(net, 1.0).mu > 0.0


def test_pe_margin_static_connected_equals_lambda2():
    g = complete_graph(5)
    report = pe_margin(static_network(g, 4.0), 1.0)
    assert report.mu == pytest.approx(5.0, abs=1e-9)
    assert report.lambda2_integral == pytest.approx(5.0, abs=1e-9)
    assert report.effective_graph.edges == g.edges


def test_pe_margin_static_disconnected_zero():
    g = Graph(4, ((0, 1), (2, 3)))
    report = pe_margin(static_network(g, 4.0), 1.0)
    assert report.mu == 0.0


@given(st.integers(0, 5_000))
def test_pe_margin_spectral_equivalence(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 9))
    net = split_edges_alternating(
        random_connected_graph(rng, n), 0.5, 4.0, int(rng.integers(0, 2**31))
    )
    report = pe_margin(net, 1.0)
    assert report.equivalence_gap < 1e-9


def test_effective_edge_set_static():
    g = random_connected_graph(np.random.default_rng(0), 6)
    net = static_network(g, 3.0)
    assert effective_edge_set(net, 1.0, 1.0).edges == g.edges


def test_effective_edge_set_duty_cycle_boundary():
    # edge (0,1) active half of every window; (1,2) always active
    g_on = Graph(3, ((0, 1), (1, 2)))
    g_off = Graph(3, ((1, 2),))
    sched = tuple((0.5 * k, k % 2) for k in range(8))
    net = SwitchingNetwork((g_on, g_off), sched, 4.0)
    assert (0, 1) not in effective_edge_set(net, 1.0, 0.6).edges
    assert (0, 1) in effective_edge_set(net, 1.0, 0.5).edges  # ">= delta" is inclusive
    with pytest.raises(ValueError):
        effective_edge_set(net, 1.0, 0.0)


def test_effective_edge_set_small_delta_recovers_union():
    rng = np.random.default_rng(7)
    overlay = random_connected_graph(rng, 7)
    net = split_edges_alternating(overlay, 0.5, 4.0, 3)
    assert effective_edge_set(net, 1.0, 1e-9).edges == overlay.edges


def test_algebraic_connectivity_examples():
    assert algebraic_connectivity(laplacian(complete_graph(3))) == pytest.approx(3.0)
    # eigenvalues of the P3 Laplacian are {0, 1, 3}
    assert algebraic_connectivity(laplacian(path_graph(3))) == pytest.approx(1.0)
    two_pairs = Graph(4, ((0, 1), (2, 3)))
    assert algebraic_connectivity(laplacian(two_pairs)) == 0.0
    with pytest.raises(ValueError):
        algebraic_connectivity(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_vertex_connectivity_examples():
    assert vertex_connectivity(complete_graph(4)) == 3
    assert vertex_connectivity(star_graph(5)) == 1
    # singleton attached to a clique by 2 edges: kappa = 2
    clique = complete_graph(6)
    g = Graph(7, clique.edges + ((0, 6), (1, 6)))
    assert vertex_connectivity(g) == 2


def test_vertex_connectivity_disconnected_and_large():
    assert vertex_connectivity(Graph(4, ((0, 1), (2, 3)))) == 0
    big = complete_graph(16)
    assert vertex_connectivity(big) == 15
    ring = Graph(16, tuple((i, (i + 1) % 16) if i < (i + 1) % 16 else ((i + 1) % 16, i) for i in range(16)))
    assert vertex_connectivity(ring) == 2  # networkx max-flow path


def test_r_robustness_examples():
    assert r_robustness(complete_graph(3)) == 2
    assert r_robustness(Graph(4, ((0, 1), (2, 3)))) == 0
    for n in range(3, 9):
        assert r_robustness(complete_graph(n)) == math.ceil(n / 2)
    with pytest.raises(CapabilityError):
        r_robustness(complete_graph(13))


def test_r_robustness_star_and_path():
    assert r_robustness(star_graph(5)) == 1
    assert r_robustness(path_graph(5)) == 1


def test_check_bound_chain_k3_tight():
    net = static_network(complete_graph(3), 3.0)
    report = check_bound_chain(net, 1.0)
    assert (math.ceil(report.mu_hat / 2), report.r, report.kappa, report.upper) == (2, 2, 2, 2)
    assert report.chain_holds and report.is_complete


def test_check_bound_chain_star():
    net = static_network(star_graph(5), 3.0)
    report = check_bound_chain(net, 1.0)
    assert report.r == 1 and report.kappa == 1 and report.upper == 4
    assert math.ceil(report.mu_hat / 2 - 1e-12) <= report.r
    assert report.chain_holds and report.noncomplete_bound_holds


@given(st.integers(0, 3_000))
def test_bound_chain_random_graphs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 11))
    g = random_connected_graph(rng, n)
    lam2 = algebraic_connectivity(laplacian(g))
    r = r_robustness(g)
    kappa = vertex_connectivity(g)
    assert math.ceil(lam2 / 2 - 1e-12) <= r <= kappa <= n - 1
    if len(g.edges) < n * (n - 1) // 2:
        assert lam2 <= kappa + 1e-9


def test_remove_nodes_identity_and_errors():
    net = split_edges_alternating(complete_graph(6), 0.5, 2.0, 1)
    same = remove_nodes(net, ())
    assert same.network.modes == net.modes
    assert same.index_map == {i: i for i in range(6)}
    with pytest.raises(ValueError):
        remove_nodes(net, range(6))
    with pytest.raises(ValueError):
        remove_nodes(net, (9,))


def test_remove_non_cut_node_keeps_connectivity():
    g = complete_graph(5)
    net = static_network(g, 2.0)
    reduced = remove_nodes(net, (2,))
    lam2 = algebraic_connectivity(laplacian(reduced.network.modes[0]))
    assert lam2 > 0


@given(st.integers(0, 2_000))
def test_removal_resilience(seed):
    """Removing fewer nodes than the effective graph's vertex connectivity
    keeps a positive PE margin, and lambda2 drops by at most the removal
    count."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 10))
    net = split_edges_alternating(random_connected_graph(rng, n, 0.5), 0.5, 4.0, seed)
    report = pe_margin(net, 1.0)
    kappa = vertex_connectivity(report.effective_graph)
    if kappa < 2 or n - (kappa - 1) < 3:
        return
    size = int(rng.integers(1, kappa))
    removed = rng.choice(n, size=size, replace=False)
    reduced = remove_nodes(net, removed)
    after = pe_margin(reduced.network, 1.0)
    assert after.mu > 0
    assert report.lambda2_integral <= after.lambda2_integral + size + 1e-9


def test_khop_examples():
    g = path_graph(3)
    assert khop_neighbors(g, 0, 1) == frozenset({1})
    assert khop_neighbors(g, 0, 2) == frozenset({2})
    lonely = Graph(4, ((1, 2), (2, 3)))
    assert khop_neighbors(lonely, 0, 1) == frozenset()
    with pytest.raises(ValueError):
        khop_neighbors(g, 0, 3)


def test_khop_overlap_convention():
    # 1-hop neighbors joined by an edge also appear in the 2-hop set
    g = Graph(4, ((0, 1), (0, 2), (1, 2), (2, 3)))
    assert khop_neighbors(g, 0, 1) == frozenset({1, 2})
    assert khop_neighbors(g, 0, 2) == frozenset({1, 2, 3})


FIG_STYLE_EDGES = (
    (0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (3, 4),
    (2, 5), (4, 6), (5, 6), (6, 7), (7, 8), (8, 9),
)


def test_partition_ten_node_topology():
    """A 10-node topology exercising the caption conventions: 1-hop
    neighbors joined by edges land in the tilde block, and overlap nodes sit
    in both hop sets while the partition's middle group keeps only the
    strictly-2-hop nodes."""
    g = Graph(10, FIG_STYLE_EDGES)
    assert khop_neighbors(g, 0, 1) == frozenset({1, 2, 3, 4})
    assert khop_neighbors(g, 0, 2) == frozenset({1, 2, 3, 4, 5, 6})
    part = partition_laplacian(g, 0)
    assert part.one_hop_set == (0, 1, 2, 3, 4)
    assert part.two_hop_set == (5, 6)
    assert part.rest_set == (7, 8, 9)
    # edge (1,2) between 1-hop neighbors is encoded by the tilde block
    assert part.ltilde[1, 2] == -1.0
    assert part.ltilde[3, 4] == -1.0
    ones = np.ones(part.ltilde.shape[1] + part.l12.shape[1])
    assert np.allclose(np.hstack([part.ltilde, part.l12]) @ ones, 0.0, atol=1e-12)
    ones2 = np.ones(part.ldoubletilde.shape[1] + part.l23.shape[1])
    assert np.allclose(np.hstack([part.ldoubletilde, part.l23]) @ ones2, 0.0, atol=1e-12)


def test_partition_star_center_has_zero_tilde():
    g = star_graph(5)
    part = partition_laplacian(g, 0)
    assert np.count_nonzero(part.ltilde) == 0
    assert np.array_equal(part.l11, part.lprime)


def test_partition_complete_graph_empty_rest():
    part = partition_laplacian(complete_graph(5), 2)
    assert part.rest_set == ()
    assert part.l23.shape[1] == 0


@given(st.integers(0, 2_000))
def test_partition_roundtrip_bit_exact(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 11))
    g = random_connected_graph(rng, n)
    owner = int(rng.integers(0, n))
    part = partition_laplacian(g, owner)
    assert np.array_equal(part.reassemble(), laplacian(g))
    assert np.array_equal(part.l11, part.lprime + part.ltilde)
    assert np.array_equal(part.l22, part.lrest + part.ldoubletilde)
    # the 2-hop proximity Laplacian is itself a valid PSD Laplacian
    l2hop = part.two_hop_laplacian()
    assert np.allclose(l2hop @ np.ones(l2hop.shape[0]), 0.0, atol=1e-12)
    assert np.linalg.eigvalsh(l2hop)[0] > -1e-9


def test_generate_r_robust_seed_clique():
    cert = generate_r_robust_preferential(5, 2, seed=0)
    assert cert.graph.edges == complete_graph(5).edges
    assert cert.certified_r == 2


def test_generate_r_robust_certificate_vs_enumeration():
    for seed in range(3):
        cert = generate_r_robust_preferential(8, 3, seed=seed)
        assert r_robustness(cert.graph) >= 3


def test_generate_r_robust_large_with_cap():
    cert = generate_r_robust_preferential(84, 2, seed=5, max_degree=9)
    assert cert.graph.node_count == 84
    assert max(cert.graph.degree(i) for i in range(84)) <= 9
    assert cert.certified_r == 2


def test_generate_r_robust_invalid_parameters():
    with pytest.raises(ValueError):
        generate_r_robust_preferential(4, 2, seed=0)
    with pytest.raises(ValueError):
        generate_r_robust_preferential(10, 2, seed=0, max_degree=2)


def test_adversary_classification():
    g = complete_graph(5)
    assert adversary_classification(g, (3, 4)) == (2, 2)
    path = path_graph(5)
    assert adversary_classification(path, (0,)) == (1, 1)
