"""Simulate covariates and outcomes from the linear-in-means and linear-in-sums models.

Linear-in-means (LIM)::

    Y = alpha 1 + beta X + delta G X + rho G Y + eps

Linear-in-sums (LIS) replaces ``G`` by the adjacency ``A`` with
degree-rescaled coefficients ``delta_n = delta0 / d`` and ``rho_n = rho0 / d``
where ``d`` is the observed mean degree.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidSpecError, NumericError, SpectralValidityError
from .graphs import Graph, spectral_radius
from .operators import ResolventSpec, RowNormOp, adjacency_resolvent_solve, check_lim_rho, neumann_solve
from .seeding import as_generator

LIS_MARGIN = 1e-6


@dataclass(frozen=True)
class LimParams:
    """LIM coefficients and the covariate/error laws (defaults: the ER experiments)."""

    alpha: float = 1.0
    beta: float = 1.5
    delta: float = 0.6
    rho: float = 0.3
    mu: float = 2.0
    sigma: float = 1.0
    sigma_eps: float = 0.1

    def __post_init__(self):
        if self.sigma < 0 or self.sigma_eps < 0:
            raise InvalidSpecError("sigma and sigma_eps must be non-negative")

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.delta, self.rho])

    def replace(self, **kw) -> "LimParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class LisParams:
    """LIS coefficients; ``delta0`` and ``rho0`` are on the degree-rescaled scale."""

    alpha: float = 1.0
    beta: float = 1.5
    delta0: float = 0.6
    rho0: float = 0.3
    mu: float = 2.0
    sigma: float = 1.0
    sigma_eps: float = 0.1

    def __post_init__(self):
        if self.sigma < 0 or self.sigma_eps < 0:
            raise InvalidSpecError("sigma and sigma_eps must be non-negative")

    def scaled(self, mean_degree) -> tuple[float, float]:
        """``(delta_n, rho_n)`` for a graph with the given mean degree."""
        if mean_degree <= 0:
            raise InvalidSpecError("LIS rescaling needs a positive mean degree")
        return self.delta0 / mean_degree, self.rho0 / mean_degree

    def replace(self, **kw) -> "LisParams":
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class Dataset:
    """One draw of ``(X, Y)``.

    ``eps`` is kept for oracle checks only; estimators read ``X`` and ``Y``.
    ``coefficients`` records the structural coefficients actually used
    (for LIS these are the rescaled ``delta_n``, ``rho_n``).
    """

    X: np.ndarray
    Y: np.ndarray
    eps: np.ndarray = field(repr=False)
    seed: object = None
    model: str = "lim"
    coefficients: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def to_csv(self, path, debug=False) -> None:
        """Columns ``node_id,x,y`` (plus ``eps`` when ``debug``)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node_id", "x", "y"] + (["eps"] if debug else []))
            for i in range(self.n):
                row = [i, repr(float(self.X[i])), repr(float(self.Y[i]))]
                if debug:
                    row.append(repr(float(self.eps[i])))
                w.writerow(row)


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"node_id", "x", "y"} - set(reader.fieldnames or [])
        if missing:
            raise FormatError(f"{path}: missing column(s) {sorted(missing)}")
        rows = list(reader)
    ids = np.array([int(r["node_id"]) for r in rows])
    if not np.array_equal(ids, np.arange(len(rows))):
        raise FormatError(f"{path}: node_id must run 0..n-1 in order")
    X = np.array([float(r["x"]) for r in rows])
    Y = np.array([float(r["y"]) for r in rows])
    eps = np.array([float(r["eps"]) for r in rows]) if "eps" in reader.fieldnames else np.full(len(rows), np.nan)
    return Dataset(X=X, Y=Y, eps=eps, seed=None, model="file")


def _draw(n, mu, sigma, sigma_eps, seed):
    rng = as_generator(seed)
    X = rng.normal(mu, sigma, size=n) if sigma > 0 else np.full(n, float(mu))
    eps = rng.normal(0.0, sigma_eps, size=n) if sigma_eps > 0 else np.zeros(n)
    return X, eps


def simulate_lim(op: RowNormOp, p: LimParams, seed=0, tol=1e-10) -> Dataset:
    """Draw ``X ~ N(mu, sigma^2)``, ``eps ~ N(0, sigma_eps^2)`` and solve for ``Y``."""
    check_lim_rho(p.rho)
    X, eps = _draw(op.n, p.mu, p.sigma, p.sigma_eps, seed)
    rhs = p.alpha + p.beta * X + p.delta * (op.matrix @ X) + eps
    Y = neumann_solve(op, rhs, ResolventSpec(rho=p.rho, tol=tol))
    resid = np.linalg.norm(Y - p.rho * (op.matrix @ Y) - rhs)
    if resid > 1e-9 * max(np.linalg.norm(rhs), 1e-300):
        raise NumericError("LIM outcome solve missed its residual target", relative_residual=resid)
    return Dataset(X=X, Y=Y, eps=eps, seed=seed, model="lim",
                   coefficients={"alpha": p.alpha, "beta": p.beta, "delta": p.delta, "rho": p.rho})


def simulate_lis(A: Graph, p: LisParams, seed=0, lam1=None, tol=1e-10) -> Dataset:
    """Draw a LIS dataset on adjacency ``A`` with mean-degree rescaling.

    Raises ``SpectralValidityError`` unless ``|rho_n| lambda_1(A) < 1 - 1e-6``.
    """
    dbar = A.mean_degree
    delta_n, rho_n = p.scaled(dbar)
    if lam1 is None:
        lam1 = spectral_radius(A, tol=1e-10)
    if not abs(rho_n) * lam1 < 1.0 - LIS_MARGIN:
        raise SpectralValidityError(
            f"|rho_n| lambda_1(A) = {abs(rho_n) * lam1:.6g} >= 1 - {LIS_MARGIN} "
            f"(rho0={p.rho0}, mean degree={dbar:.6g}, lambda_1={lam1:.6g})",
            rho=rho_n, bound=lam1)
    X, eps = _draw(A.n, p.mu, p.sigma, p.sigma_eps, seed)
    rhs = p.alpha + p.beta * X + delta_n * (A.adj @ X) + eps
    if rho_n == 0.0:
        Y = rhs
    else:
        Y = adjacency_resolvent_solve(A, rho_n, rhs, lam1=lam1, tol=tol)
    return Dataset(X=X, Y=Y, eps=eps, seed=seed, model="lis",
                   coefficients={"alpha": p.alpha, "beta": p.beta, "delta": delta_n, "rho": rho_n,
                                 "mean_degree": dbar, "lambda_1": lam1})


def structural_errors(op: RowNormOp, data: Dataset, p: LimParams) -> np.ndarray:
    """``Y - alpha - beta X - delta G X - rho G Y``; equals ``eps`` for simulated data."""
    g = op.matrix
    return data.Y - p.alpha - p.beta * data.X - p.delta * (g @ data.X) - p.rho * (g @ data.Y)
