"""Slow reference implementations used to validate the fast paths.

Nothing here is tuned for speed: cycle counts come from explicit walk
enumeration, moments from dense matrices and direct solves, and the Monte
Carlo reference simply loops over replications.
"""

from __future__ import annotations

import datetime as _dt
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SizeError
from .graphs import CycleCensus, Graph
from .operators import MomentReport, assemble_report

BRUTE_MAX_N = 12
DENSE_MAX_N = 1500


@dataclass(frozen=True)
class OracleReport:
    """One fast-vs-reference comparison."""

    quantity: str
    fast: float
    oracle: float
    tol: float
    relative: bool = True

    @property
    def abs_gap(self) -> float:
        return abs(self.fast - self.oracle)

    @property
    def rel_gap(self) -> float:
        return self.abs_gap / max(abs(self.oracle), 1e-300)

    @property
    def passed(self) -> bool:
        gap = self.rel_gap if self.relative else self.abs_gap
        # exact zero oracles are compared absolutely
        if self.relative and self.oracle == 0.0:
            gap = self.abs_gap
        return gap <= self.tol

    def line(self) -> str:
        return (f"{'PASS' if self.passed else 'FAIL'} {self.quantity}: fast={self.fast!r} "
                f"oracle={self.oracle!r} abs={self.abs_gap:.3e} rel={self.rel_gap:.3e} tol={self.tol:g}")


def append_audit(reports, path) -> None:
    """Append comparison lines to a plain-text audit log."""
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    with open(Path(path), "a") as fh:
        for r in reports:
            fh.write(f"{stamp} {r.line()}\n")


def brute_cycle_census(G: Graph) -> CycleCensus:
    """Enumerate closed 3- and 4-walks node by node.

    A closed 4-walk counts toward ``c4`` when it visits 4 distinct nodes
    (a simple cycle) or 3 distinct nodes (``i j i k i`` or ``i j k j i``);
    the back-and-forth walks ``i j i j i`` on a single edge are excluded.
    """
    if G.n > BRUTE_MAX_N:
        raise SizeError(f"brute-force census is capped at n={BRUTE_MAX_N}, got {G.n}")
    nbrs = [set() for _ in range(G.n)]
    for i, j in G.edges():
        nbrs[i].add(int(j))
        nbrs[j].add(int(i))

    c3 = 0
    for i in range(G.n):
        for j in nbrs[i]:
            for k in nbrs[j]:
                if i in nbrs[k]:
                    c3 += 1

    simple = three_node = two_node = 0
    for i in range(G.n):
        for j in nbrs[i]:
            for k in nbrs[j]:
                for l in nbrs[k]:
                    if i not in nbrs[l]:
                        continue
                    distinct = len({i, j, k, l})
                    if distinct == 4:
                        simple += 1
                    elif distinct == 3:
                        three_node += 1
                    else:
                        two_node += 1

    open_triples = 0
    for i in range(G.n):
        for j, k in itertools.permutations(nbrs[i], 2):
            if k not in nbrs[j]:
                open_triples += 1
    total = c3 + open_triples
    return CycleCensus(c3=c3, c4=simple + three_node, open_triples=open_triples,
                       clustering=c3 / total if total else 0.0)


def dense_matrices(G: Graph, rho, beta, delta):
    """Dense ``G``, ``S^{-1}`` and ``H`` with the isolated-node convention."""
    n = G.n
    if n > DENSE_MAX_N:
        raise SizeError(f"dense oracle is capped at n={DENSE_MAX_N}, got {n}")
    A = G.dense()
    deg = A.sum(axis=1)
    w = np.where(deg > 0, 1.0 / np.where(deg > 0, deg, 1.0), 1.0)
    Gm = w[:, None] * A
    I = np.eye(n)
    Sinv = np.linalg.solve(I - rho * Gm, I)
    H = (beta * I + delta * Gm) @ Sinv
    return Gm, Sinv, H


def dense_moment_oracle(G: Graph, theta) -> MomentReport:
    """Materialize ``G``, ``S^{-1}``, ``H`` and compute every moment exactly.

    The OLS bias is recomputed from its closed form and the 2SLS covariance
    from an explicitly inverted cross-moment matrix, so neither reuses the
    fast path's algebra.
    """
    Gm, Sinv, H = dense_matrices(G, theta.rho, theta.beta, theta.delta)
    n = G.n

    def tr(a, b):
        return float(np.sum(a * b))  # Tr(a^T b)

    GS, GH, G2 = Gm @ Sinv, Gm @ H, Gm @ Gm
    fro = tr(Gm, Gm)
    fro2 = tr(G2, G2)
    centered = lambda a, b: tr(a, b) - np.trace(a) * np.trace(b) / n  # noqa: E731
    m = {
        "fro_G": fro, "fro_G2": fro2, "m_G_G": 1.0,
        "m_G_GH": tr(Gm, GH) / fro, "m_GH_GH": tr(GH, GH) / fro, "m_GS_GS": tr(GS, GS) / fro,
        "m_G_GS": tr(Gm, GS) / fro, "m_I_GS": float(np.trace(GS)) / fro,
        "mp_G2_GH": centered(G2, GH) / fro2, "mp_G2_G2": centered(G2, G2) / fro2,
    }
    rep = assemble_report(n, "dense-oracle", theta.sigma, theta.sigma_eps, m)

    s2, e2 = theta.sigma ** 2, theta.sigma_eps ** 2
    kbar = s2 * e2 * m["m_G_G"] * m["m_GS_GS"] + s2 * s2 * (m["m_G_G"] * m["m_GH_GH"] - m["m_G_GH"] ** 2)
    if kbar > 0:
        rep.ols_bias = np.array([-s2 * e2 * m["m_G_GH"] * m["m_I_GS"] / kbar,
                                 s2 * e2 * m["m_G_G"] * m["m_I_GS"] / kbar])
    if not rep.degenerate and rep.gamma_zw_inv is not None:
        eta = math.sqrt(fro2 / fro)
        gzw = np.array([[s2 * m["m_G_G"] / eta, s2 * m["m_G_GH"] / eta],
                        [0.0, s2 * m["mp_G2_GH"]]])
        inv = np.linalg.inv(gzw)
        rep.gamma_zw_inv = inv
        rep.tsls_cov = inv @ rep.sigma_zz @ inv.T
    return rep


def finite_sample_ols_bias(G: Graph, theta) -> np.ndarray:
    """Ratio-of-expectations OLS bias of ``(delta, rho)`` at this ``n``.

    Unlike the limit formula this keeps the effect of partialling out the
    intercept and ``X``: each regressor's random part ``A V`` is centered and
    stripped of its (expected) projection on the centered ``V``.  The
    difference is of relative order ``d^2 / n`` for sparse graphs, which is
    not small at desk scale.
    """
    Gm, Sinv, H = dense_matrices(G, theta.rho, theta.beta, theta.delta)
    n = G.n
    M = np.eye(n) - 1.0 / n

    def partial(A):
        MA = M @ A
        return MA - (np.trace(MA) / (n - 1)) * M

    a, b = partial(Gm), partial(Gm @ H)
    s = M @ (Gm @ Sinv)
    s2, e2 = theta.sigma ** 2, theta.sigma_eps ** 2
    gam = np.array([[s2 * np.sum(a * a), s2 * np.sum(a * b)],
                    [s2 * np.sum(a * b), s2 * np.sum(b * b) + e2 * np.sum(s * s)]])
    score = np.array([0.0, e2 * float(np.trace(s))])
    return np.linalg.solve(gam, score)


def mc_reference(config, reps=None):
    """Run the configured experiment serially and return its summary rows.

    Uses the same per-replication seeds as the experiment runner, so the
    output must match it exactly regardless of worker count.
    """
    from .experiments import run_replications, summarize

    cfg = config if reps is None else config.with_reps(reps)
    return summarize(run_replications(cfg, workers=1))
