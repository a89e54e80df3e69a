"""Graph ensembles and purely structural statistics.

Every generator returns a :class:`Graph`: a symmetric, hollow, binary sparse
adjacency matrix together with its degree sequence. Random generators are
deterministic functions of their seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import FormatError, InvalidSpecError, NumericError

logger = logging.getLogger(__name__)

ENSEMBLE_KINDS = ("erdos_renyi", "bipartite_union", "clique_union", "sbm", "graphon")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    Attributes
    ----------
    n : int
        Node count.
    adj : scipy.sparse.csr_array
        Symmetric 0/1 adjacency matrix (float64 entries, no stored zeros).
    degrees : ndarray of int64
        Row sums of ``adj``.
    info : dict
        Generator metadata (community labels, latent positions, clip counts).
    """

    n: int
    adj: sp.csr_array
    degrees: np.ndarray
    info: dict = field(default_factory=dict)

    @classmethod
    def from_edges(cls, n, rows, cols, info=None) -> "Graph":
        """Build from undirected edge endpoints; duplicates are merged."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.shape != cols.shape:
            raise InvalidSpecError("edge endpoint arrays differ in length")
        if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
            raise InvalidSpecError("edge endpoint out of range")
        if np.any(rows == cols):
            raise InvalidSpecError("self-loops are not allowed")
        r = np.concatenate([rows, cols])
        c = np.concatenate([cols, rows])
        adj = sp.csr_array((np.ones(r.size), (r, c)), shape=(n, n))
        adj.sum_duplicates()
        adj.data[:] = 1.0
        adj.sort_indices()
        degrees = np.diff(adj.indptr).astype(np.int64)
        degrees.flags.writeable = False
        return cls(n=int(n), adj=adj, degrees=degrees, info=dict(info or {}))

    @property
    def num_edges(self) -> int:
        return int(self.degrees.sum() // 2)

    @property
    def mean_degree(self) -> float:
        return float(self.degrees.mean()) if self.n else 0.0

    def edges(self) -> np.ndarray:
        """Return the ``(m, 2)`` array of edges ``(i, j)`` with ``i < j``, sorted."""
        coo = sp.triu(self.adj, k=1, format="coo")
        order = np.lexsort((coo.col, coo.row))
        return np.column_stack([coo.row[order], coo.col[order]]).astype(np.int64)

    def dense(self) -> np.ndarray:
        return self.adj.toarray()

    def check(self) -> None:
        """Raise ``InvalidSpecError`` unless the structural invariants hold."""
        a = self.adj
        if a.shape != (self.n, self.n):
            raise InvalidSpecError("adjacency shape mismatch")
        if (a - a.T).count_nonzero():
            raise InvalidSpecError("adjacency is not symmetric")
        if a.diagonal().any():
            raise InvalidSpecError("adjacency has a nonzero diagonal")
        if a.nnz and not np.all(a.data == 1.0):
            raise InvalidSpecError("adjacency is not binary")
        rowsum = np.asarray(a.sum(axis=1)).ravel().astype(np.int64)
        if not np.array_equal(rowsum, self.degrees):
            raise InvalidSpecError("degrees do not match row sums")


@dataclass(frozen=True)
class EnsembleSpec:
    """Recipe for one network draw.

    ``d`` may be given explicitly; otherwise it follows the degree law
    ``d(n) = c * n**exponent`` rounded to the nearest integer >= 1. The
    ``payload`` holds ensemble-specific inputs: ``P``/``pi``/``p_n`` for
    ``sbm`` and ``f``/``p_n`` for ``graphon``. For these two kinds ``p_n``
    may be omitted, in which case ``p_n = d / n``.
    """

    kind: str
    n: int
    d: float | None = None
    c: float = 1.0
    exponent: float | None = None
    payload: dict = field(default_factory=dict)
    seed: int | None = 0

    def degree(self) -> int:
        if self.d is not None:
            return int(self.d)
        if self.exponent is None:
            raise InvalidSpecError("either d or a degree-law exponent is required")
        return degree_law(self.n, self.c, self.exponent)


def degree_law(n, c, exponent) -> int:
    """``round(c * n**exponent)``, never below 1."""
    return max(1, int(round(c * float(n) ** exponent)))


def calibrated_constant(exponent, n_ref=100, d_ref=10.0) -> float:
    """Constant ``c`` such that ``c * n_ref**exponent == d_ref``."""
    return d_ref / float(n_ref) ** exponent


def generate(spec: EnsembleSpec, seed=None) -> Graph:
    """Draw one graph from an :class:`EnsembleSpec` (``seed`` overrides ``spec.seed``)."""
    seed = spec.seed if seed is None else seed
    kind = spec.kind
    if kind not in ENSEMBLE_KINDS:
        raise InvalidSpecError(f"unknown ensemble kind {kind!r}")
    n = spec.n
    if kind in ("sbm", "graphon"):
        p_n = spec.payload.get("p_n")
        if p_n is None:
            p_n = spec.degree() / n
        if kind == "sbm":
            return gen_sbm(spec.payload["P"], spec.payload["pi"], p_n, n, seed)
        return gen_graphon(spec.payload["f"], p_n, n, seed)
    d = spec.degree()
    if kind == "erdos_renyi":
        return gen_erdos_renyi(n, d, seed)
    if kind == "bipartite_union":
        return gen_bipartite_union(n, d)
    return gen_clique_union(n, d)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _triu_offsets(n):
    i = np.arange(n, dtype=np.int64)
    return i * n - i * (i + 1) // 2


def _pair_from_index(k, n):
    """Map linear indices over pairs ``i < j`` (row-major) to ``(i, j)``."""
    off = _triu_offsets(n)
    i = np.searchsorted(off, k, side="right") - 1
    j = i + 1 + (k - off[i])
    return i, j


def _sample_pair_indices(rng, n_pairs, p):
    """Indices of a Bernoulli(p) subset of ``range(n_pairs)``.

    Draws the subset size from Binomial(n_pairs, p) and then a uniform subset
    of that size, which is the same law as independent coin flips.
    """
    if n_pairs == 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n_pairs, dtype=np.int64)
    m = int(rng.binomial(n_pairs, p))
    idx = rng.choice(n_pairs, size=m, replace=False)
    return np.sort(idx.astype(np.int64))


def gen_erdos_renyi(n, d, seed=0) -> Graph:
    """Erdős–Rényi graph with expected degree ``d`` (edge probability d/(n-1))."""
    n = int(n)
    if not (1 <= d < n):
        raise InvalidSpecError(f"need 1 <= d < n, got d={d}, n={n}")
    rng = np.random.default_rng(seed)
    p = d / (n - 1)
    k = _sample_pair_indices(rng, n * (n - 1) // 2, p)
    i, j = _pair_from_index(k, n)
    return Graph.from_edges(n, i, j, info={"kind": "erdos_renyi", "d": d})


def _complete_bipartite(left, right):
    rows = np.repeat(left, len(right))
    cols = np.tile(right, len(left))
    return rows, cols


def _complete(nodes):
    nodes = np.asarray(nodes)
    i, j = np.triu_indices(len(nodes), k=1)
    return nodes[i], nodes[j]


def gen_bipartite_union(n, d) -> Graph:
    """Disjoint union of ``K_{d,d}`` blocks.

    Leftover nodes (fewer than ``2d``) form one smaller balanced complete
    bipartite block; a single leftover node joins the left side of the last
    full block instead of staying isolated.
    """
    n, d = int(n), int(d)
    if d < 1 or 2 * d > n:
        raise InvalidSpecError(f"need 1 <= d and 2d <= n, got d={d}, n={n}")
    q, r = divmod(n, 2 * d)
    rows, cols = [], []
    for b in range(q):
        start = 2 * d * b
        left = np.arange(start, start + d)
        right = np.arange(start + d, start + 2 * d)
        if r == 1 and b == q - 1:
            left = np.append(left, n - 1)
        u, v = _complete_bipartite(left, right)
        rows.append(u)
        cols.append(v)
    if r >= 2:
        start = 2 * d * q
        half = r // 2
        u, v = _complete_bipartite(np.arange(start, start + half), np.arange(start + half, n))
        rows.append(u)
        cols.append(v)
    return Graph.from_edges(n, np.concatenate(rows), np.concatenate(cols),
                            info={"kind": "bipartite_union", "d": d})


def gen_clique_union(n, d) -> Graph:
    """Disjoint union of ``K_{d+1}`` blocks (every full-block node has degree d).

    Leftover nodes form one smaller clique; a single leftover node joins the
    last full clique.
    """
    n, d = int(n), int(d)
    if d < 1 or d + 1 > n:
        raise InvalidSpecError(f"need 1 <= d and d+1 <= n, got d={d}, n={n}")
    m = d + 1
    q, r = divmod(n, m)
    rows, cols = [], []
    for b in range(q):
        nodes = np.arange(b * m, (b + 1) * m)
        if r == 1 and b == q - 1:
            nodes = np.append(nodes, n - 1)
        u, v = _complete(nodes)
        rows.append(u)
        cols.append(v)
    if r >= 2:
        u, v = _complete(np.arange(q * m, n))
        rows.append(u)
        cols.append(v)
    return Graph.from_edges(n, np.concatenate(rows), np.concatenate(cols),
                            info={"kind": "clique_union", "d": d})


def _check_sbm_inputs(P, pi, p_n):
    P = np.asarray(P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or pi.shape != (P.shape[0],):
        raise InvalidSpecError("P must be K x K and pi a K-vector")
    if not np.allclose(P, P.T):
        raise InvalidSpecError("P must be symmetric")
    if np.any(P < 0) or np.any(P > 1):
        raise InvalidSpecError("P entries must lie in [0, 1]")
    if np.any(pi < 0) or not math.isclose(pi.sum(), 1.0, abs_tol=1e-9):
        raise InvalidSpecError("pi must be a probability vector")
    if p_n <= 0 or p_n * P.max() > 1 + 1e-12:
        raise InvalidSpecError(f"need 0 < p_n and p_n * max(P) <= 1, got p_n={p_n}")
    return P, pi


def gen_sbm(P, pi, p_n, n, seed=0) -> Graph:
    """Stochastic block model: i.i.d. memberships from ``pi``, edges Bern(p_n P_ab)."""
    n = int(n)
    P, pi = _check_sbm_inputs(P, pi, p_n)
    rng = np.random.default_rng(seed)
    labels = rng.choice(len(pi), size=n, p=pi)
    members = [np.flatnonzero(labels == a) for a in range(len(pi))]
    rows, cols = [], []
    for a in range(len(pi)):
        na = len(members[a])
        k = _sample_pair_indices(rng, na * (na - 1) // 2, p_n * P[a, a])
        i, j = _pair_from_index(k, na) if k.size else (k, k)
        rows.append(members[a][i])
        cols.append(members[a][j])
        for b in range(a + 1, len(pi)):
            nb = len(members[b])
            k = _sample_pair_indices(rng, na * nb, p_n * P[a, b])
            rows.append(members[a][k // nb] if nb else k)
            cols.append(members[b][k % nb] if nb else k)
    return Graph.from_edges(n, np.concatenate(rows), np.concatenate(cols),
                            info={"kind": "sbm", "labels": labels, "p_n": p_n})


def gen_graphon(f: Callable, p_n, n, seed=0, chunk=512) -> Graph:
    """Graphon sample ``A_ij ~ Bern(p_n f(U_i, U_j))`` with ``U_i ~ U(0, 1)``.

    ``f`` must accept broadcast numpy arrays. Probabilities above one are
    clipped; the number of clipped pairs is logged and stored in
    ``graph.info["clipped"]``.
    """
    n = int(n)
    if p_n <= 0:
        raise InvalidSpecError("p_n must be positive")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    rows, cols = [], []
    clipped = 0
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = p_n * np.asarray(f(u[start:stop, None], u[None, :]), dtype=float)
        block = np.broadcast_to(block, (stop - start, n))
        if np.any(block < 0):
            raise InvalidSpecError("graphon returned negative values")
        over = block > 1.0
        clipped += int(np.triu(over, k=start + 1).sum())
        coins = rng.random((stop - start, n))
        hit = np.triu(coins < np.minimum(block, 1.0), k=start + 1)
        i, j = np.nonzero(hit)
        rows.append(i + start)
        cols.append(j)
    if clipped:
        logger.warning("gen_graphon clipped %d edge probabilities to 1", clipped)
    return Graph.from_edges(n, np.concatenate(rows), np.concatenate(cols),
                            info={"kind": "graphon", "latent": u, "p_n": p_n, "clipped": clipped})


# ---------------------------------------------------------------------------
# structural statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CycleCensus:
    """Closed-walk counts.

    ``c3 = Tr(A^3)`` (six per triangle) and ``c4 = Tr(A^4) - sum_i d_i``:
    closed 4-walks minus the pure back-and-forth walks ``i->j->i->j->i``.
    ``open_triples`` counts ordered paths ``i-j-k`` (``i != k``) that are not
    closed, and ``clustering = c3 / (c3 + open_triples)``.
    """

    c3: int
    c4: int
    open_triples: int
    clustering: float


def cycle_census(G: Graph) -> CycleCensus:
    a = G.adj.astype(np.int64)
    a2 = a @ a
    c3 = int(a2.multiply(a).sum())
    tr_a4 = int(a2.multiply(a2).sum())
    deg = G.degrees.astype(np.int64)
    c4 = tr_a4 - int(deg.sum())
    wedges = int((deg * (deg - 1)).sum())
    open_triples = wedges - c3
    clustering = c3 / wedges if wedges else 0.0
    return CycleCensus(c3=c3, c4=c4, open_triples=open_triples, clustering=clustering)


def spectral_radius(G: Graph, tol=1e-10, max_iter=10_000) -> float:
    """Largest eigenvalue of the adjacency matrix by power iteration.

    Iterates on ``A + I`` from the all-ones vector so that bipartite graphs
    (whose spectrum is symmetric) still converge. Stops when the eigen-residual
    ``||A x - theta x||`` drops below ``tol * theta * ||x||``, which bounds the
    relative error of ``theta`` by ``tol``.
    """
    if G.adj.nnz == 0:
        return 0.0
    a = G.adj
    x = np.ones(G.n) / math.sqrt(G.n)
    theta = 0.0
    resid = np.inf
    for it in range(1, max_iter + 1):
        ax = a @ x
        theta = float(x @ ax)
        resid = float(np.linalg.norm(ax - theta * x))
        if resid <= tol * theta:
            return theta
        y = ax + x
        x = y / np.linalg.norm(y)
    raise NumericError("power iteration did not converge", iterations=max_iter,
                       estimate=theta, residual=resid)


def is_connected(G: Graph) -> bool:
    ncomp, _ = csgraph.connected_components(G.adj, directed=False)
    return ncomp == 1


def n_components(G: Graph) -> int:
    return int(csgraph.connected_components(G.adj, directed=False)[0])


# ---------------------------------------------------------------------------
# edge-list text format
# ---------------------------------------------------------------------------


def write_edgelist(G: Graph, path) -> None:
    """Header ``n <count>`` then one ``i j`` line (0-indexed, ``i < j``) per edge."""
    lines = [f"n {G.n}"]
    lines.extend(f"{i} {j}" for i, j in G.edges())
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path) -> Graph:
    text = Path(path).read_text().splitlines()
    body = [(no, ln.strip()) for no, ln in enumerate(text, start=1) if ln.strip()]
    if not body:
        raise FormatError(f"{path}: empty edge list")
    no, head = body[0]
    parts = head.split()
    if len(parts) != 2 or parts[0] != "n" or not parts[1].isdigit():
        raise FormatError(f"{path}:{no}: expected header 'n <count>', got {head!r}")
    n = int(parts[1])
    rows, cols = [], []
    seen = set()
    for no, ln in body[1:]:
        parts = ln.split()
        try:
            i, j = (int(p) for p in parts)
        except ValueError:
            raise FormatError(f"{path}:{no}: expected 'i j', got {ln!r}") from None
        if not (0 <= i < j < n):
            raise FormatError(f"{path}:{no}: need 0 <= i < j < n, got {ln!r}")
        if (i, j) in seen:
            raise FormatError(f"{path}:{no}: duplicate edge {ln!r}")
        seen.add((i, j))
        rows.append(i)
        cols.append(j)
    return Graph.from_edges(n, rows, cols, info={"kind": "file", "source": str(path)})
