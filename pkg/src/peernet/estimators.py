"""OLS and 2SLS estimators for the linear-in-means and linear-in-sums models.

Every solve goes through an orthogonal factorization; the normal equations are
never inverted explicitly.  Conditioning diagnostics are attached to each
:class:`Estimate` so weak-identification regimes show up as data rather than
as silent garbage.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .dgp import Dataset
from .graphs import Graph
from .operators import RowNormOp

log = logging.getLogger(__name__)

COND_LIMIT = 1e10
FIRST_STAGE_FLOOR = 1e-8
AGREEMENT_TOL = 1e-8
STATUSES = ("ok", "unstable", "singular", "rank_deficient")
CSV_COLUMNS = ("estimator", "n", "d", "seed", "alpha", "beta", "delta", "rho", "cond", "status")
PARAM_NAMES = ("alpha", "beta", "delta", "rho")


@dataclass(frozen=True, eq=False)
class Estimate:
    """Four-component estimate ``(alpha, beta, delta, rho)`` plus diagnostics.

    ``theta`` is all-NaN exactly when ``status`` is ``singular`` or
    ``rank_deficient``; an ``unstable`` estimate carries numbers that should
    not be trusted.
    """

    estimator: str
    theta: np.ndarray
    status: str
    n: int
    cond: float = math.nan
    min_sv: float = math.nan
    first_stage_sv: float = math.nan
    deficient_column: int | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    alpha = property(lambda self: float(self.theta[0]))
    beta = property(lambda self: float(self.theta[1]))
    delta = property(lambda self: float(self.theta[2]))
    rho = property(lambda self: float(self.theta[3]))

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def has_values(self) -> bool:
        return self.status in ("ok", "unstable")

    def to_csv_row(self, d=None, seed=None) -> dict:
        row = {"estimator": self.estimator, "n": self.n, "d": d if d is not None else "",
               "seed": seed if seed is not None else ""}
        for name, v in zip(PARAM_NAMES, self.theta):
            row[name] = repr(float(v))
        row["cond"] = repr(float(self.cond))
        row["status"] = self.status
        return row


def _failed(tag, n, status, **kw) -> Estimate:
    return Estimate(tag, np.full(4, np.nan), status, n, **kw)


def lim_design(op: RowNormOp, data: Dataset):
    """``(Z, W)`` with ``Z = (1, X, GX, G^2 X)`` and ``W = (1, X, GX, GY)``."""
    g = op.matrix
    x, y = data.X, data.Y
    gx = g @ x
    ones = np.ones_like(x)
    Z = np.column_stack([ones, x, gx, g @ gx])
    W = np.column_stack([ones, x, gx, g @ y])
    return Z, W


def _qr_lstsq(M, y):
    """Least squares via pivoted QR; returns ``(coef, rank, pivots, rdiag)``."""
    Q, R, piv = linalg.qr(M, mode="economic", pivoting=True)
    rdiag = np.abs(np.diag(R))
    tol = max(M.shape) * np.finfo(float).eps * (rdiag[0] if rdiag.size else 0.0)
    rank = int(np.sum(rdiag > tol))
    coef = np.full(M.shape[1], np.nan)
    if rank == M.shape[1]:
        z = linalg.solve_triangular(R, Q.T @ y)
        coef = np.empty_like(z)
        coef[piv] = z
    return coef, rank, piv, rdiag


def ols_lim(op: RowNormOp, data: Dataset) -> Estimate:
    """OLS of ``Y`` on ``W = (1, X, GX, GY)``.

    ``cond`` is the condition number of ``W^T W`` (the square of ``cond(W)``).
    A rank-deficient ``W`` returns status ``rank_deficient`` and the index of
    the first column dropped by the pivoted QR.
    """
    n = data.n
    if n < 5:
        raise ValueError("OLS needs at least 5 observations")
    _, W = lim_design(op, data)
    sv = np.linalg.svd(W, compute_uv=False)
    cond = float((sv[0] / sv[-1]) ** 2) if sv[-1] > 0 else math.inf
    coef, rank, piv, _ = _qr_lstsq(W, data.Y)
    if rank < W.shape[1]:
        return _failed("ols_lim", n, "rank_deficient", cond=cond, min_sv=float(sv[-1]),
                       deficient_column=int(piv[rank]))
    return Estimate("ols_lim", coef, "ok", n, cond=cond, min_sv=float(sv[-1]))


def _residualize(B, M):
    """Residuals of each column of ``M`` after projecting on the column span of ``B``."""
    Q, _ = np.linalg.qr(B)
    return M - Q @ (Q.T @ M)


def ols_lim_fwl(op: RowNormOp, data: Dataset) -> Estimate:
    """Partial ``(1, X)`` out of ``(GX, GY)`` and ``Y``, then regress.

    Produces the same ``(delta, rho)`` as :func:`ols_lim`; ``(alpha, beta)``
    are recovered by regressing ``Y - delta GX - rho GY`` on ``(1, X)``.
    """
    n = data.n
    if n < 5:
        raise ValueError("OLS needs at least 5 observations")
    _, W = lim_design(op, data)
    exog, endo = W[:, :2], W[:, 2:]
    _, r_exog, piv, _ = _qr_lstsq(exog, data.Y)
    if r_exog < 2:
        return _failed("ols_lim_fwl", n, "rank_deficient", deficient_column=int(piv[r_exog]))
    tilde = _residualize(exog, np.column_stack([endo, data.Y]))
    sv = np.linalg.svd(tilde[:, :2], compute_uv=False)
    cond = float((sv[0] / sv[-1]) ** 2) if sv[-1] > 0 else math.inf
    dr, rank, piv, _ = _qr_lstsq(tilde[:, :2], tilde[:, 2])
    if rank < 2:
        return _failed("ols_lim_fwl", n, "rank_deficient", cond=cond, min_sv=float(sv[-1]),
                       deficient_column=2 + int(piv[rank]))
    ab, _, _, _ = _qr_lstsq(exog, data.Y - endo @ dr)
    return Estimate("ols_lim_fwl", np.concatenate([ab, dr]), "ok", n, cond=cond, min_sv=float(sv[-1]))


def _partialled_first_stage(Z, W, k_exog=2):
    """Smallest singular value of ``(M Z_2)^T (M W_2)`` with ``M`` removing the first ``k_exog`` columns."""
    exog = W[:, :k_exog]
    rz = _residualize(exog, Z[:, k_exog:])
    rw = _residualize(exog, W[:, k_exog:])
    return float(np.linalg.svd(rz.T @ rw, compute_uv=False)[-1])


def _just_identified(tag, Z, W, y, allow_unstable, extras=None):
    """Solve ``Z^T W theta = Z^T y`` and the projection form, with diagnostics."""
    n = Z.shape[0]
    A = Z.T @ W
    b = Z.T @ y
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    fs = _partialled_first_stage(Z, W)
    extras = dict(extras or {})
    unstable = not (cond < COND_LIMIT) or fs < FIRST_STAGE_FLOOR * n
    diag = dict(cond=cond, min_sv=float(sv[-1]), first_stage_sv=fs)

    if unstable and not allow_unstable:
        return _failed(tag, n, "singular", extras=extras, **diag)

    theta, rank, _, _ = _qr_lstsq(A, b)
    if rank < A.shape[1]:
        # exact singularity: minimum-norm pseudo-solve
        theta = np.linalg.lstsq(A, b, rcond=None)[0]
    # projection form ((P_Z W)^T P_Z W)^{-1} (P_Z W)^T y
    Qz, _ = np.linalg.qr(Z)
    proj, prank, _, _ = _qr_lstsq(Qz.T @ W, Qz.T @ y)
    if prank == A.shape[1]:
        gap = float(np.linalg.norm(theta - proj) / max(np.linalg.norm(theta), 1e-300))
    else:
        gap = math.nan
    extras["projection_gap"] = gap
    extras["projection_theta"] = proj
    if not unstable and not gap <= AGREEMENT_TOL:
        log.debug("%s: IV and projection forms differ by %.3e (cond %.3e)", tag, gap, cond)
    status = "unstable" if unstable else "ok"
    return Estimate(tag, theta, status, n, extras=extras, **diag)


def tsls_lim(op: RowNormOp, data: Dataset, allow_unstable=False) -> Estimate:
    """Just-identified 2SLS with instruments ``Z = (1, X, GX, G^2 X)``.

    The system is flagged when ``cond(Z^T W) >= 1e10`` or the smallest
    singular value of the partialled first stage falls below ``1e-8 n``.
    Flagged systems return status ``singular`` and no numbers unless
    ``allow_unstable`` is set, in which case the (pseudo-)solution is returned
    with status ``unstable``.
    """
    Z, W = lim_design(op, data)
    return _just_identified("tsls_lim", Z, W, data.Y, allow_unstable)


def tsls_lis(A: Graph, data: Dataset, allow_unstable=False) -> Estimate:
    """Degree-rescaled 2SLS for the linear-in-sums model.

    Instruments ``(1, X, AX, A^2 X)`` are scaled by ``F = diag(1, 1, 1/d, 1/d^2)``
    and regressors ``(1, X, AX, AY)`` by ``diag(1, 1, 1/d, 1/d)`` with ``d`` the
    mean degree.  ``theta`` holds the raw coefficients ``(alpha, beta,
    delta_n, rho_n)``; ``extras["rescaled"]`` holds ``(alpha, beta, d delta_n,
    d rho_n)``, comparable to ``(delta0, rho0)``.
    """
    dbar = A.mean_degree
    if not dbar > 0:
        raise ValueError("tsls_lis needs a graph with positive mean degree")
    a = A.adj
    x, y = data.X, data.Y
    ones = np.ones_like(x)
    ax = a @ x
    Zs = np.column_stack([ones, x, ax / dbar, (a @ ax) / dbar**2])
    Ws = np.column_stack([ones, x, ax / dbar, (a @ y) / dbar])
    est = _just_identified("tsls_lis", Zs, Ws, y, allow_unstable, extras={"mean_degree": dbar})
    scaled = est.theta
    raw = scaled * np.array([1.0, 1.0, 1.0 / dbar, 1.0 / dbar])
    extras = dict(est.extras)
    extras["rescaled"] = scaled
    return Estimate("tsls_lis", raw, est.status, est.n, cond=est.cond, min_sv=est.min_sv,
                    first_stage_sv=est.first_stage_sv, extras=extras)
