import itertools

import numpy as np
import pytest

from peernet.graphs import Graph, gen_bipartite_union, gen_clique_union, gen_erdos_renyi, gen_sbm


def graph_from_pairs(n, pairs, name=""):
    pairs = list(pairs)
    rows = [i for i, _ in pairs]
    cols = [j for _, j in pairs]
    return Graph.from_edges(n, rows, cols, info={"name": name})


def complete(n):
    return graph_from_pairs(n, itertools.combinations(range(n), 2), f"K{n}")


def cycle(n):
    return graph_from_pairs(n, [(i, (i + 1) % n) for i in range(n)], f"C{n}")


def path(n):
    return graph_from_pairs(n, [(i, i + 1) for i in range(n - 1)], f"P{n}")


def star(n):
    return graph_from_pairs(n, [(0, i) for i in range(1, n)], f"star{n}")


def complete_bipartite(a, b):
    return graph_from_pairs(a + b, [(i, a + j) for i in range(a) for j in range(b)], f"K{a},{b}")


def petersen():
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return graph_from_pairs(10, outer + spokes + inner, "petersen")


def small_corpus():
    """Named and random graphs with at most 12 nodes."""
    graphs = [complete(2), complete(3), complete(4), complete(5), path(3), path(4), path(7),
              cycle(4), cycle(5), cycle(6), cycle(12), star(6), complete_bipartite(2, 2),
              complete_bipartite(2, 3), complete_bipartite(3, 3), petersen(),
              graph_from_pairs(5, [(0, 1), (1, 2), (2, 0)], "triangle+2 isolated"),
              graph_from_pairs(8, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (4, 5), (5, 6)], "mixed"),
              gen_bipartite_union(12, 2), gen_clique_union(12, 3), gen_clique_union(11, 2)]
    graphs += [gen_erdos_renyi(n, d, seed=s) for n, d, s in [(10, 3, 1), (12, 4, 2), (12, 6, 3), (9, 2, 4)]]
    P = np.array([[0.9, 0.2], [0.2, 0.7]])
    graphs.append(gen_sbm(P, np.array([0.5, 0.5]), 1.0, 12, seed=5))
    for k, g in enumerate(graphs):
        g.info.setdefault("name", f"{g.info.get('kind', 'random')}{k}")
    return graphs


SMALL_CORPUS = small_corpus()


@pytest.fixture(params=range(len(SMALL_CORPUS)), ids=lambda k: SMALL_CORPUS[k].info.get("name", f"g{k}"))
def small_graph(request):
    return SMALL_CORPUS[request.param]


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
