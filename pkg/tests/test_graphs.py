import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peernet.errors import FormatError, InvalidSpecError
from peernet.graphs import (EnsembleSpec, Graph, cycle_census, degree_law, gen_bipartite_union,
                            gen_clique_union, gen_erdos_renyi, gen_graphon, gen_sbm, generate,
                            n_components, read_edgelist, spectral_radius, write_edgelist)
from peernet.oracles import brute_cycle_census

from conftest import complete, complete_bipartite, cycle, graph_from_pairs, petersen


def test_census_matches_brute_force(small_graph):
    assert cycle_census(small_graph) == brute_cycle_census(small_graph)


def test_k22_four_cycle_count():
    # Tr(A^4) = 32 on K_{2,2} (eigenvalues +-2, 0, 0), minus sum of degrees 8
    g = complete_bipartite(2, 2)
    census = cycle_census(g)
    assert census.c3 == 0
    assert census.c4 == 24
    assert int(np.trace(np.linalg.matrix_power(g.dense(), 4))) == 32


def test_triangle_counts():
    assert cycle_census(complete(3)).c3 == 6
    assert cycle_census(complete(4)).c3 == 24
    assert cycle_census(cycle(5)).c3 == 0
    assert cycle_census(complete(4)).clustering == 1.0
    assert cycle_census(petersen()).clustering == 0.0


def test_trace_identities_on_corpus(small_graph):
    a = small_graph.dense()
    census = cycle_census(small_graph)
    assert census.c3 == round(np.trace(a @ a @ a))
    assert census.c4 == round(np.trace(np.linalg.matrix_power(a, 4))) - small_graph.degrees.sum()


def test_graph_invariants(small_graph):
    small_graph.check()
    a = small_graph.dense()
    assert np.array_equal(a, a.T)
    assert not np.any(np.diag(a))


@pytest.mark.parametrize("n,d", [(100, 10), (101, 7), (2000, 21)])
def test_erdos_renyi_mean_degree(n, d):
    degs = [gen_erdos_renyi(n, d, seed=s).mean_degree for s in range(20)]
    # sd of the mean degree is about sqrt(2 d / n)
    assert abs(np.mean(degs) - d) < 5 * math.sqrt(2 * d / n / 20)


def test_generation_is_deterministic():
    a = gen_erdos_renyi(300, 8, seed=42)
    b = gen_erdos_renyi(300, 8, seed=42)
    c = gen_erdos_renyi(300, 8, seed=43)
    assert np.array_equal(a.edges(), b.edges())
    assert not np.array_equal(a.edges(), c.edges())
    spec = EnsembleSpec("sbm", 200, d=6, payload={"P": [[0.9, 0.1], [0.1, 0.5]], "pi": [0.5, 0.5]})
    assert np.array_equal(generate(spec, seed=3).edges(), generate(spec, seed=3).edges())


@pytest.mark.parametrize("n,d", [(100, 3), (101, 3), (102, 3), (105, 3), (12, 2), (50, 1)])
def test_bipartite_union_structure(n, d):
    g = gen_bipartite_union(n, d)
    assert g.n == n
    assert g.degrees.min() >= 1
    assert cycle_census(g).c3 == 0
    q = n // (2 * d)
    assert np.count_nonzero(g.degrees == d) >= 2 * d * (q - 1)


@pytest.mark.parametrize("n,d", [(100, 3), (101, 4), (102, 3), (12, 3), (11, 2)])
def test_clique_union_structure(n, d):
    g = gen_clique_union(n, d)
    assert g.n == n
    assert g.degrees.min() >= 1
    assert cycle_census(g).clustering == 1.0
    q, r = divmod(n, d + 1)
    assert n_components(g) == q + (1 if r >= 2 else 0)


def test_clique_union_full_blocks():
    g = gen_clique_union(100, 4)
    assert np.all(g.degrees == 4)
    assert n_components(g) == 20


def test_degree_law_rounds_to_nearest():
    assert degree_law(2000, 1.0, 0.25) == 7  # 6.69
    assert degree_law(100, 1.0, 0.25) == 3  # 3.16
    assert degree_law(5, 0.01, 0.5) == 1


def test_spectral_radius_known_values():
    assert spectral_radius(complete(5)) == pytest.approx(4.0, rel=1e-9)
    assert spectral_radius(complete_bipartite(3, 3)) == pytest.approx(3.0, rel=1e-9)
    assert spectral_radius(cycle(12)) == pytest.approx(2.0, rel=1e-9)
    assert spectral_radius(petersen()) == pytest.approx(3.0, rel=1e-9)


def test_spectral_radius_against_eigensolver():
    g = gen_erdos_renyi(300, 6, seed=9)
    assert spectral_radius(g) == pytest.approx(np.linalg.eigvalsh(g.dense())[-1], rel=1e-8)


def test_sbm_labels_and_sparsity():
    P = np.array([[0.8, 0.1], [0.1, 0.4]])
    g = gen_sbm(P, np.array([0.3, 0.7]), 0.05, 2000, seed=1)
    labels = g.info["labels"]
    assert abs(np.mean(labels == 0) - 0.3) < 0.05
    a = g.adj
    in0 = labels == 0
    dens = a[in0][:, in0].sum() / (in0.sum() * (in0.sum() - 1))
    assert dens == pytest.approx(0.05 * 0.8, rel=0.1)


def test_graphon_sampling_density():
    g = gen_graphon(lambda u, v: u * v, 1.0, 1500, seed=2)
    # expected edge density of u v is 1/4
    assert 2 * g.num_edges / (g.n * (g.n - 1)) == pytest.approx(0.25, rel=0.05)


def test_invalid_inputs():
    with pytest.raises(InvalidSpecError):
        gen_erdos_renyi(10, 10)
    with pytest.raises(InvalidSpecError):
        gen_bipartite_union(5, 3)
    with pytest.raises(InvalidSpecError):
        gen_sbm([[0.5, 0.2], [0.3, 0.5]], [0.5, 0.5], 0.1, 10)
    with pytest.raises(InvalidSpecError):
        gen_sbm([[0.5]], [1.0], 3.0, 10)
    with pytest.raises(InvalidSpecError):
        Graph.from_edges(3, [0], [0])


def test_edgelist_round_trip(tmp_path):
    g = gen_erdos_renyi(60, 5, seed=4)
    path = tmp_path / "g.txt"
    write_edgelist(g, path)
    h = read_edgelist(path)
    assert h.n == g.n
    assert np.array_equal(h.edges(), g.edges())


@pytest.mark.parametrize("text,where", [
    ("", "empty"),
    ("nodes 3\n0 1\n", ":1:"),
    ("n 3\n0 1\n1 1\n", ":3:"),
    ("n 3\n0 5\n", ":2:"),
    ("n 3\n0 x\n", ":2:"),
])
def test_edgelist_errors_name_the_line(tmp_path, text, where):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(FormatError, match=where):
        read_edgelist(path)


@st.composite
def random_graphs(draw, max_n=12):
    n = draw(st.integers(2, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    chosen = [p for p, keep in zip(pairs, mask) if keep]
    return graph_from_pairs(n, chosen)


@settings(max_examples=60, deadline=None)
@given(random_graphs())
def test_census_property(g):
    assert cycle_census(g) == brute_cycle_census(g)


@settings(max_examples=40, deadline=None)
@given(random_graphs(), st.permutations(range(12)))
def test_census_relabel_invariance(g, perm):
    perm = np.array([p for p in perm if p < g.n])
    e = g.edges()
    h = Graph.from_edges(g.n, perm[e[:, 0]], perm[e[:, 1]]) if e.size else g
    assert cycle_census(h) == cycle_census(g)


@settings(max_examples=30, deadline=None)
@given(st.integers(10, 300), st.integers(1, 6))
def test_union_graphs_have_no_isolated_nodes(n, d):
    if 2 * d <= n:
        assert gen_bipartite_union(n, d).degrees.min() >= 1
    if d + 1 <= n:
        assert gen_clique_union(n, d).degrees.min() >= 1
