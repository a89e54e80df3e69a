"""On disjoint cliques the second-order instrument carries no new information.

For a union of equal cliques G^2 X = ((d-1)/d) G X + X/d exactly, so the
2SLS system is singular and gets flagged.  A leftover partial clique
restores a sliver of relevance: no flag, but wildly dispersed estimates.

    python demos/clique_unions_break_2sls.py
"""

import numpy as np

from peernet.cli import diagnose
from peernet.dgp import LimParams, simulate_lim
from peernet.estimators import ols_lim, tsls_lim
from peernet.graphs import gen_clique_union
from peernet.operators import RowNormOp

p = LimParams()
for n, d in ((1000, 4), (1003, 4)):
    g = gen_clique_union(n, d)
    op = RowNormOp(g)
    diag = diagnose(g)
    print(f"n={n}, d={d}: clustering {diag.clustering:.2f}, c3 d / c4 = {diag.ratio:.2f} [{diag.ratio_flag}]")
    tsls, ols, flags = [], [], 0
    for seed in range(100):
        data = simulate_lim(op, p, seed=seed)
        est = tsls_lim(op, data, allow_unstable=True)
        flags += est.status != "ok"
        tsls.append(est.rho - p.rho)
        ols.append(ols_lim(op, data).rho - p.rho)
    q = lambda x: np.subtract(*np.percentile(x, [75, 25]))  # noqa: E731
    print(f"  2SLS flagged {flags}/100, IQR of rho error: 2SLS {q(tsls):.3f}, OLS {q(ols):.4f}\n")
