"""Row-normalized network operators, resolvent solves and trace moments.

The linear-in-means quantities are built from three operators on a graph:

* ``G = D^{-1} A`` (row-normalized adjacency, with ``1/d_i := 1`` for
  isolated nodes),
* the resolvent ``S^{-1} = (I - rho G)^{-1}``,
* the reduced-form map ``H = (beta I + delta G) S^{-1}``.

Products of these are represented as :class:`OperatorWord` objects and are
never materialized except on the dense path of the trace routines, where a
word is applied to blocks of identity columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import InvalidSpecError, NumericError, SpectralValidityError
from .graphs import Graph

LETTERS = ("G", "GT", "Sinv", "SinvT", "H", "HT", "I", "A", "AT")
_NEEDS_RESOLVENT = {"Sinv", "SinvT", "H", "HT"}
_ALIASES = {
    "G^T": "GT", "S^-1": "Sinv", "S^{-1}": "Sinv", "S^-T": "SinvT", "S^{-T}": "SinvT",
    "H^T": "HT", "A^T": "AT",
}

DENSE_THRESHOLD = 3000
HUTCHINSON_PROBES = 200


class RowNormOp:
    """``G = D^{-1} A`` over an immutable :class:`Graph`."""

    def __init__(self, graph: Graph):
        self.graph = graph
        deg = graph.degrees.astype(float)
        self.weights = np.where(deg > 0, 1.0 / np.where(deg > 0, deg, 1.0), 1.0)
        self.matrix = sp.csr_array(sp.diags_array(self.weights) @ graph.adj)
        self.matrix_t = sp.csr_array(self.matrix.T)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def has_isolated(self) -> bool:
        return bool(np.any(self.graph.degrees == 0))

    def __matmul__(self, v):
        return self.matrix @ v

    def frobenius_sq(self) -> float:
        """``||G||_F^2 = sum_j 1/d_j`` over non-isolated nodes (isolated rows are zero)."""
        deg = self.graph.degrees
        return float(np.sum(1.0 / deg[deg > 0]))


@dataclass(frozen=True)
class ResolventSpec:
    """Endogenous coefficient plus the iterative-solve budget.

    ``max_iter`` defaults to ``10 * ceil(log(1/tol) / log(1/|rho|))``.
    """

    rho: float
    tol: float = 1e-10
    max_iter: int | None = None

    def iteration_budget(self) -> int:
        if self.max_iter is not None:
            return self.max_iter
        r = abs(self.rho)
        if r == 0.0:
            return 1
        if r >= 1.0:
            return 0
        return 10 * math.ceil(math.log(1.0 / self.tol) / math.log(1.0 / r))


def check_lim_rho(rho) -> None:
    if not abs(rho) < 1.0:
        raise SpectralValidityError(
            f"|rho| = {abs(rho)} must be < 1 for I - rho G to be invertible "
            "(||G||_inf = 1)", rho=rho, bound=1.0)


def neumann_solve(op: RowNormOp, v, spec: ResolventSpec, transpose=False):
    """Solve ``(I - rho G) x = v`` (or with ``G^T``) by fixed-point iteration.

    ``x_{k+1} = v + rho G x_k`` contracts geometrically because
    ``||G||_inf = ||G^T||_1 = 1``. The residual of the current iterate is
    ``rho (G x_{k-1} - G x_k)``, so convergence is checked for free. ``v`` may
    be a vector or an ``(n, m)`` block; the check is per column.
    """
    check_lim_rho(spec.rho)
    v = np.asarray(v, dtype=float)
    rho = spec.rho
    if rho == 0.0:
        return v.copy()
    mat = op.matrix_t if transpose else op.matrix
    vnorm = np.linalg.norm(v, axis=0)
    vnorm = np.where(vnorm > 0, vnorm, 1.0)
    x = v.copy()
    y = mat @ x
    budget = spec.iteration_budget()
    ratio = np.inf
    for it in range(budget + 1):
        r = x - rho * y - v
        ratio = float(np.max(np.linalg.norm(r, axis=0) / vnorm))
        if ratio <= spec.tol:
            return x
        x = v + rho * y
        y = mat @ x
    raise NumericError("resolvent iteration did not converge", iterations=budget,
                       relative_residual=ratio, rho=rho)


def adjacency_resolvent_solve(graph: Graph, rho, v, lam1=None, tol=1e-10):
    """Solve ``(I - rho A) x = v`` for ``|rho| < 1/lambda_1(A)``.

    The matrix is symmetric positive definite under that condition, so
    conjugate gradients apply.
    """
    from .graphs import spectral_radius

    if lam1 is None:
        lam1 = spectral_radius(graph, tol=1e-10)
    if not abs(rho) * lam1 < 1.0:
        raise SpectralValidityError(
            f"|rho| * lambda_1(A) = {abs(rho) * lam1:.6g} must be < 1 "
            f"(lambda_1 = {lam1:.6g})", rho=rho, bound=lam1)
    v = np.asarray(v, dtype=float)
    if rho == 0.0:
        return v.copy()
    mat = sp.identity(graph.n, format="csr") - rho * graph.adj
    x, info = cg(mat, v, rtol=tol * 1e-2, atol=0.0, maxiter=10 * graph.n)
    resid = np.linalg.norm(mat @ x - v) / max(np.linalg.norm(v), 1e-300)
    if info != 0 or resid > tol:
        raise NumericError("adjacency resolvent solve did not converge",
                           info=info, relative_residual=resid, rho=rho)
    return x


@dataclass(frozen=True, eq=False)
class OperatorWord:
    """A product ``L_1 L_2 ... L_k`` of letters from :data:`LETTERS`.

    Applying the word to ``v`` computes ``L_1 (L_2 (... (L_k v)))``, so the
    word reads like the matrix product it denotes. Words containing ``Sinv``
    or ``H`` carry a :class:`ResolventSpec` and the coefficients
    ``(beta, delta)``.
    """

    letters: tuple
    op: RowNormOp
    resolvent: ResolventSpec | None = None
    beta: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if not self.letters:
            raise InvalidSpecError("operator word must be nonempty")
        for ch in self.letters:
            if ch not in LETTERS:
                raise InvalidSpecError(f"unknown operator letter {ch!r}")
        needs = _NEEDS_RESOLVENT.intersection(self.letters)
        if needs and self.resolvent is None:
            raise InvalidSpecError(f"letters {sorted(needs)} need a ResolventSpec")
        if {"H", "HT"}.intersection(self.letters) and (self.beta is None or self.delta is None):
            raise InvalidSpecError("H needs beta and delta")

    @property
    def n(self) -> int:
        return self.op.n

    def __str__(self):
        return "".join(self.letters)


def _parse_letters(letters) -> tuple:
    if isinstance(letters, str):
        letters = letters.replace("*", " ").split()
    return tuple(_ALIASES.get(ch, ch) for ch in letters)


def make_word(op: RowNormOp, letters, params=None, rho=None, beta=None, delta=None,
              tol=1e-10) -> OperatorWord:
    """Build a word; ``params`` may be any object with ``rho``, ``beta``, ``delta``.

    >>> make_word(op, "G Sinv", rho=0.3)            # doctest: +SKIP
    >>> make_word(op, ("G", "H"), params=theta)     # doctest: +SKIP
    """
    if params is not None:
        rho = params.rho if rho is None else rho
        beta = params.beta if beta is None else beta
        delta = params.delta if delta is None else delta
    resolvent = ResolventSpec(rho=rho, tol=tol) if rho is not None else None
    return OperatorWord(_parse_letters(letters), op, resolvent, beta, delta)


def _apply_letter(word: OperatorWord, ch, v):
    op = word.op
    if ch == "I":
        return v
    if ch == "G":
        return op.matrix @ v
    if ch == "GT":
        return op.matrix_t @ v
    if ch in ("A", "AT"):
        return op.graph.adj @ v
    if ch == "Sinv":
        return neumann_solve(op, v, word.resolvent)
    if ch == "SinvT":
        return neumann_solve(op, v, word.resolvent, transpose=True)
    if ch == "H":
        s = neumann_solve(op, v, word.resolvent)
        return word.beta * s + word.delta * (op.matrix @ s)
    if ch == "HT":
        return neumann_solve(op, word.beta * v + word.delta * (op.matrix_t @ v),
                             word.resolvent, transpose=True)
    raise InvalidSpecError(f"unknown operator letter {ch!r}")


def apply_word(word: OperatorWord, v):
    """Matrix of ``word`` applied to a vector or an ``(n, m)`` block."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != word.n:
        raise InvalidSpecError(f"vector length {v.shape[0]} != n = {word.n}")
    if word.resolvent is not None and _NEEDS_RESOLVENT.intersection(word.letters):
        check_lim_rho(word.resolvent.rho)
    out = v
    for ch in reversed(word.letters):
        out = _apply_letter(word, ch, out)
    return np.array(out, copy=True) if out is v else out


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceValue:
    """A trace functional with its provenance.

    ``stderr`` is zero for exact values (``method`` in ``closed_form``/``dense``)
    and the Hutchinson Monte Carlo standard error otherwise.
    """

    value: float
    stderr: float = 0.0
    method: str = "dense"

    @property
    def exact(self) -> bool:
        return self.method != "hutchinson"

    def __float__(self):
        return float(self.value)


def _probe_blocks(n, method, probes, seed, chunk):
    """Yield column blocks of the identity (dense) or of Rademacher probes."""
    if method == "dense":
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            block = np.zeros((n, stop - start))
            block[np.arange(start, stop), np.arange(stop - start)] = 1.0
            yield block
    else:
        rng = np.random.default_rng(seed)
        for start in range(0, probes, chunk):
            m = min(chunk, probes - start)
            yield rng.choice(np.array([-1.0, 1.0]), size=(n, m))


def _resolve_method(method, n, dense_threshold):
    if method == "auto":
        return "dense" if n <= dense_threshold else "hutchinson"
    if method not in ("dense", "hutchinson"):
        raise InvalidSpecError(f"unknown trace method {method!r}")
    return method


class _ColumnAccumulator:
    """Collects per-column statistics and turns them into traces.

    Dense path: the statistic summed over identity columns is the exact trace.
    Hutchinson path: the mean over probes is unbiased and its spread gives
    the standard error.
    """

    def __init__(self, method):
        self.method = method
        self.cols = {}

    def add(self, name, values):
        self.cols.setdefault(name, []).append(np.asarray(values, dtype=float))

    def column(self, name):
        return np.concatenate(self.cols[name])

    def total(self, name) -> TraceValue:
        c = self.column(name)
        if self.method == "dense":
            return TraceValue(float(c.sum()), 0.0, "dense")
        se = float(c.std(ddof=1) / math.sqrt(c.size)) if c.size > 1 else math.inf
        return TraceValue(float(c.mean()), se, "hutchinson")

    def centered(self, pair, left, right, n) -> TraceValue:
        """``Tr(M_a^T M_b) - Tr(M_a) Tr(M_b) / n`` with a delta-method error."""
        s = self.total(pair)
        ta = self.total(left)
        tb = self.total(right)
        value = s.value - ta.value * tb.value / n
        if self.method == "dense":
            return TraceValue(value, 0.0, "dense")
        infl = self.column(pair) - (tb.value * self.column(left) + ta.value * self.column(right)) / n
        se = float(infl.std(ddof=1) / math.sqrt(infl.size))
        return TraceValue(value, se, "hutchinson")


def _is_single_g(word):
    return tuple(word.letters) in (("G",), ("GT",))


def frobenius_sq(word: OperatorWord, method="auto", probes=HUTCHINSON_PROBES, seed=0,
                 dense_threshold=DENSE_THRESHOLD, chunk=256) -> TraceValue:
    """``||M||_F^2`` for the word's matrix ``M``.

    ``G`` alone uses the closed form ``sum_j 1/d_j``; other words go through
    :func:`trace_moment`.
    """
    if _is_single_g(word) and method in ("auto", "closed_form"):
        return TraceValue(word.op.frobenius_sq(), 0.0, "closed_form")
    return trace_moment(word, word, method=method, probes=probes, seed=seed,
                        dense_threshold=dense_threshold, chunk=chunk)


def trace_moment(word_a: OperatorWord, word_b: OperatorWord, centered=False, method="auto",
                 probes=HUTCHINSON_PROBES, seed=0, dense_threshold=DENSE_THRESHOLD,
                 chunk=256) -> TraceValue:
    """``Tr(M_a^T M_b)``, optionally minus ``Tr(M_a) Tr(M_b) / n``.

    Exact on the dense path (``n <= dense_threshold`` under ``method="auto"``);
    otherwise a Hutchinson estimate from ``probes`` Rademacher vectors using
    ``z^T M_a^T M_b z = (M_a z) . (M_b z)``.
    """
    if word_a.n != word_b.n:
        raise InvalidSpecError("words act on graphs of different size")
    n = word_a.n
    method = _resolve_method(method, n, dense_threshold)
    acc = _ColumnAccumulator(method)
    for z in _probe_blocks(n, method, probes, seed, chunk):
        ma = apply_word(word_a, z)
        mb = ma if word_b is word_a else apply_word(word_b, z)
        acc.add("ab", np.einsum("ij,ij->j", ma, mb))
        if centered:
            acc.add("a", np.einsum("ij,ij->j", z, ma))
            acc.add("b", np.einsum("ij,ij->j", z, mb))
    if centered:
        return acc.centered("ab", "a", "b", n)
    return acc.total("ab")


# ---------------------------------------------------------------------------
# moment report
# ---------------------------------------------------------------------------


@dataclass
class MomentReport:
    """Finite-n network moments and the limit matrices assembled from them.

    Moments ``m_*`` are traces normalized by ``||G||_F^2``; primed ones are
    centered and normalized by ``||G^2||_F^2``. Matrix-valued entries are
    ``None`` when the report is degenerate (see ``notes``).
    """

    n: int
    method: str
    sigma: float
    sigma_eps: float
    fro_G: float
    fro_G2: float
    eta: float
    m_G_G: float
    m_G_GH: float
    m_GH_GH: float
    m_GS_GS: float
    m_G_GS: float
    m_I_GS: float
    mp_G2_GH: float
    mp_G2_G2: float
    m_G2_G2: float
    gamma_ww: np.ndarray | None = None
    sigma_ww: np.ndarray | None = None
    det_gamma_ww: float = float("nan")
    ols_bias: np.ndarray | None = None
    ols_cov: np.ndarray | None = None
    gamma_zw_inv: np.ndarray | None = None
    sigma_zz: np.ndarray | None = None
    sigma_zz_centered: np.ndarray | None = None
    tsls_cov: np.ndarray | None = None
    degenerate: bool = False
    notes: str = ""
    stderr: dict = field(default_factory=dict)

    @property
    def predicted_bias_delta(self) -> float:
        return float("nan") if self.ols_bias is None else float(self.ols_bias[0])

    @property
    def predicted_bias_rho(self) -> float:
        return float("nan") if self.ols_bias is None else float(self.ols_bias[1])

    def to_text(self) -> str:
        """Flat ``name = value`` record, one entry per line."""
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name == "stderr":
                for k in sorted(val):
                    lines.append(f"stderr_{k} = {val[k]!r}")
            elif isinstance(val, np.ndarray):
                for idx in np.ndindex(val.shape):
                    suffix = "".join(str(i + 1) for i in idx)
                    lines.append(f"{f.name}_{suffix} = {float(val[idx])!r}")
            elif val is None:
                lines.append(f"{f.name} = none")
            elif isinstance(val, float):
                lines.append(f"{f.name} = {val!r}")
            else:
                lines.append(f"{f.name} = {val}")
        return "\n".join(lines) + "\n"


def parse_moment_text(text) -> dict:
    """Read a ``name = value`` record back into a flat dict of floats/strings."""
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, raw = line.partition("=")
        raw = raw.strip()
        try:
            out[key.strip()] = float(raw)
        except ValueError:
            out[key.strip()] = raw
    return out


def assemble_report(n, method, sigma, sigma_eps, m, stderr=None) -> MomentReport:
    """Build the limit matrices from a dict of normalized moments.

    ``m`` needs ``fro_G, fro_G2, m_G_G, m_G_GH, m_GH_GH, m_GS_GS, m_G_GS,
    m_I_GS, mp_G2_GH, mp_G2_G2``.
    """
    s2, e2 = sigma ** 2, sigma_eps ** 2
    eta = math.sqrt(m["fro_G2"] / m["fro_G"]) if m["fro_G"] > 0 else float("nan")
    rep = MomentReport(
        n=n, method=method, sigma=sigma, sigma_eps=sigma_eps, fro_G=m["fro_G"],
        fro_G2=m["fro_G2"], eta=eta, m_G_G=m["m_G_G"], m_G_GH=m["m_G_GH"],
        m_GH_GH=m["m_GH_GH"], m_GS_GS=m["m_GS_GS"], m_G_GS=m["m_G_GS"],
        m_I_GS=m["m_I_GS"], mp_G2_GH=m["mp_G2_GH"], mp_G2_G2=m["mp_G2_G2"],
        m_G2_G2=1.0, stderr=dict(stderr or {}),
    )
    gww = np.array([[s2 * rep.m_G_G, s2 * rep.m_G_GH],
                    [s2 * rep.m_G_GH, s2 * rep.m_GH_GH + e2 * rep.m_GS_GS]])
    sww = e2 * np.array([[s2 * rep.m_G_G, s2 * rep.m_G_GH],
                         [s2 * rep.m_G_GH, s2 * rep.m_GH_GH]])
    rep.gamma_ww, rep.sigma_ww = gww, sww
    det = float(np.linalg.det(gww))
    rep.det_gamma_ww = det
    scale = abs(gww[0, 0] * gww[1, 1])
    notes = []
    if not det > 1e-12 * scale or scale == 0.0:
        rep.degenerate = True
        notes.append(f"Gamma_WW numerically singular (det={det:.3e}, scale={scale:.3e})")
    else:
        inv = np.linalg.inv(gww)
        rep.ols_bias = e2 * inv @ np.array([0.0, rep.m_I_GS])
        rep.ols_cov = inv @ sww @ inv
    mp = rep.mp_G2_GH
    if s2 == 0.0 or not abs(mp) > 1e-12:
        rep.degenerate = True
        notes.append(f"m'_(G2,GH) = {mp:.3e} too small for the 2SLS limit")
    else:
        rep.gamma_zw_inv = np.array([[eta / s2, -rep.m_G_GH / (s2 * rep.m_G_G * mp)],
                                     [0.0, 1.0 / (s2 * mp)]])
        rep.sigma_zz = e2 * np.diag([s2 * rep.m_G_G, s2 * rep.m_G2_G2])
        rep.sigma_zz_centered = e2 * np.diag([s2 * rep.m_G_G, s2 * rep.mp_G2_G2])
        rep.tsls_cov = rep.gamma_zw_inv @ rep.sigma_zz @ rep.gamma_zw_inv.T
    rep.notes = "; ".join(notes)
    return rep


def moment_report(op: RowNormOp, theta, method="auto", probes=HUTCHINSON_PROBES, seed=0,
                  dense_threshold=DENSE_THRESHOLD, chunk=256, tol=1e-10) -> MomentReport:
    """Finite-n moment proxies, predicted OLS bias/covariance and 2SLS limits.

    ``theta`` needs ``beta``, ``delta``, ``rho``, ``sigma``, ``sigma_eps``.
    All words share one pass over the probe columns: for each block ``Z`` we
    form ``G Z``, ``S^{-1} Z``, ``G S^{-1} Z``, ``G H Z`` and ``G^2 Z`` once.
    """
    check_lim_rho(theta.rho)
    n = op.n
    method = _resolve_method(method, n, dense_threshold)
    spec = ResolventSpec(rho=theta.rho, tol=tol)
    beta, delta = theta.beta, theta.delta
    acc = _ColumnAccumulator(method)
    g = op.matrix

    def dot(a, b):
        return np.einsum("ij,ij->j", a, b)

    for z in _probe_blocks(n, method, probes, seed, chunk):
        gz = g @ z
        sz = neumann_solve(op, z, spec)
        gsz = g @ sz
        hz = beta * sz + delta * gsz
        ghz = g @ hz
        g2z = g @ gz
        acc.add("G.G", dot(gz, gz))
        acc.add("G.GH", dot(gz, ghz))
        acc.add("GH.GH", dot(ghz, ghz))
        acc.add("GS.GS", dot(gsz, gsz))
        acc.add("G.GS", dot(gz, gsz))
        acc.add("I.GS", dot(z, gsz))
        acc.add("G2.G2", dot(g2z, g2z))
        acc.add("G2.GH", dot(g2z, ghz))
        acc.add("I.G2", dot(z, g2z))
        acc.add("I.GH", dot(z, ghz))

    fro_g = op.frobenius_sq()
    raw = {k: acc.total(k) for k in acc.cols}
    fro_g2 = raw["G2.G2"].value
    c_g2_gh = acc.centered("G2.GH", "I.G2", "I.GH", n)
    c_g2_g2 = acc.centered("G2.G2", "I.G2", "I.G2", n)

    def norm(key):
        return raw[key].value / fro_g

    m = {
        "fro_G": fro_g, "fro_G2": fro_g2, "m_G_G": 1.0,
        "m_G_GH": norm("G.GH"), "m_GH_GH": norm("GH.GH"), "m_GS_GS": norm("GS.GS"),
        "m_G_GS": norm("G.GS"), "m_I_GS": norm("I.GS"),
        "mp_G2_GH": c_g2_gh.value / fro_g2 if fro_g2 else float("nan"),
        "mp_G2_G2": c_g2_g2.value / fro_g2 if fro_g2 else float("nan"),
    }
    stderr = {}
    if method == "hutchinson":
        stderr = {k: v.stderr for k, v in raw.items()}
        stderr["G2.GH_centered"] = c_g2_gh.stderr
        stderr["G2.G2_centered"] = c_g2_g2.stderr
    return assemble_report(n, method, theta.sigma, theta.sigma_eps, m, stderr)

