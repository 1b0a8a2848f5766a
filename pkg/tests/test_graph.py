import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decavg.graph import (
    Graph,
    TopologyError,
    build_topology,
    metropolis_weights,
    mod_ring_targets,
    read_edge_list,
    second_largest_singular,
    write_edge_list,
)


def test_three_cycle_is_triangle():
    g = build_topology("cycle", 3)
    assert g.edges == {(1, 2), (2, 3), (1, 3)}


def test_complete_edge_count():
    assert len(build_topology("complete", 4).edges) == 6


def test_mod_ring_neighbours_of_agent_one():
    assert sorted(mod_ring_targets(1)) == [2, 5, 8]
    g = build_topology("mod_ring", 8)
    assert {2, 5, 8} <= set(g.neighbors(1))
    assert g.is_connected()


def test_mod_ring_symmetrized():
    g = build_topology("mod_ring", 8)
    A = g.adjacency()
    assert np.array_equal(A, A.T)
    for i in range(1, 9):
        for j in mod_ring_targets(i):
            assert A[i - 1, j - 1]


@pytest.mark.parametrize("kind,n", [("mod_ring", 7), ("cycle", 1), ("complete", 0)])
def test_bad_sizes_rejected(kind, n):
    with pytest.raises(TopologyError):
        build_topology(kind, n)


def test_disconnected_edge_list_reports_component():
    with pytest.raises(TopologyError, match=r"\[3, 4\]"):
        build_topology("edge_list", 4, [(1, 2), (3, 4)])


def test_edge_list_needs_edges():
    with pytest.raises(TopologyError):
        build_topology("edge_list", 3)


def test_graph_rejects_self_loops_and_out_of_range():
    with pytest.raises(TopologyError):
        Graph(3, frozenset({(1, 1)}))
    with pytest.raises(TopologyError):
        Graph(3, frozenset({(1, 4)}))


def test_metropolis_triangle_all_thirds():
    P = metropolis_weights(build_topology("cycle", 3)).weights
    assert np.allclose(P, 1.0 / 3.0, atol=1e-15)


def test_metropolis_four_cycle():
    mix = metropolis_weights(build_topology("cycle", 4))
    P = mix.weights
    A = build_topology("cycle", 4).adjacency()
    assert np.allclose(P[A], 1 / 3)
    assert np.allclose(np.diag(P), 1 / 3)
    # circulant eigenvalues 1/3 + (2/3) cos(2 pi k / 4): {1, 1/3, -1/3, 1/3}
    eig = [1 / 3 + 2 / 3 * np.cos(2 * np.pi * k / 4) for k in range(4)]
    assert mix.beta == pytest.approx(max(abs(e) for e in eig[1:]), abs=1e-14)
    assert mix.beta == pytest.approx(1 / 3, abs=1e-14)


def test_metropolis_complete_is_uniform():
    mix = metropolis_weights(build_topology("complete", 3))
    assert np.allclose(mix.weights, np.full((3, 3), 1 / 3), atol=1e-15)
    assert mix.beta == pytest.approx(0.0, abs=1e-14)


def test_second_largest_singular_examples():
    assert second_largest_singular(np.full((3, 3), 1 / 3)) == pytest.approx(0.0, abs=1e-14)
    assert second_largest_singular(np.eye(2)) == 1.0
    P = metropolis_weights(build_topology("cycle", 4)).weights
    assert second_largest_singular(P) == pytest.approx(1 / 3, abs=1e-14)


def test_second_largest_singular_nonsymmetric_matches_svd():
    rng = np.random.default_rng(3)
    B = rng.random((5, 5))
    assert second_largest_singular(B) == pytest.approx(np.linalg.svd(B, compute_uv=False)[1])


def test_second_largest_singular_rejects_nan():
    with pytest.raises(ValueError):
        second_largest_singular(np.array([[1.0, np.nan], [0.0, 1.0]]))


def _random_connected(n, extra, seed):
    rng = np.random.default_rng(seed)
    order = rng.permutation(n) + 1
    edges = [(int(order[k]), int(order[k + 1])) for k in range(n - 1)]  # spanning path
    for _ in range(extra):
        i, j = rng.choice(n, size=2, replace=False) + 1
        edges.append((int(i), int(j)))
    return build_topology("edge_list", n, edges)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 25), extra=st.integers(0, 40), seed=st.integers(0, 10_000))
def test_mixing_invariants_random_graphs(n, extra, seed):
    g = _random_connected(n, extra, seed)
    mix = metropolis_weights(g)
    P = mix.weights
    assert np.all(np.abs(P.sum(axis=1) - 1) <= 1e-12)
    assert np.all(np.abs(P.sum(axis=0) - 1) <= 1e-12)
    assert np.diag(P).min() > 0
    assert np.array_equal(P, P.T)
    off = ~g.adjacency() & ~np.eye(n, dtype=bool)
    assert np.all(P[off] == 0)
    assert mix.beta < 1 - 1e-9


def test_edge_list_roundtrip(tmp_path):
    g = build_topology("mod_ring", 8)
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "8"
    assert read_edge_list(path) == g
