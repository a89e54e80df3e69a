"""Command-line entry point: ``peernet {run,reproduce-figure,diagnose,identify,plot}``.

Exit codes: 0 on success, 2 on validation errors (config, spec, file format,
spectral validity), 3 on numeric failures.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import experiments as ex
from .dgp import LisParams
from .errors import ConfigError, FormatError, InvalidSpecError, NumericError, SpectralValidityError
from .graphs import EnsembleSpec, Graph, cycle_census, generate, read_edgelist, spectral_radius
from .identify import SbmSpec, degree_codegree_check, relevance_check, sbm_identification
from .operators import RowNormOp, frobenius_sq, make_word

log = logging.getLogger("peernet")

SUMMARY_REQUIRED = ("n", "estimator", "delta_mean", "delta_lo", "delta_hi", "rho_mean", "rho_lo", "rho_hi")


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------


def ratio_flag(ratio) -> str:
    """Qualitative reading of ``c3 d / c4``: small means few triangles relative to 4-cycles."""
    if ratio < 0.1:
        return "holds"
    if ratio < 0.5:
        return "borderline"
    return "violated"


@dataclass
class Diagnosis:
    n: int
    deg_min: int
    deg_mean: float
    deg_max: int
    c1: float
    c2: float
    fro_G: float
    fro_G2: float
    c3: int
    c4: int
    ratio: float
    clustering: float
    lambda_1: float
    regularity_flag: str
    ratio_flag: str

    def to_text(self) -> str:
        return "\n".join([
            f"nodes                    : {self.n}",
            f"degree min / mean / max  : {self.deg_min} / {self.deg_mean:.4g} / {self.deg_max}",
            f"near-regularity c1, c2   : {self.c1:.4g}, {self.c2:.4g}  [{self.regularity_flag}]",
            f"||G||_F^2                : {self.fro_G:.6g}",
            f"||G^2||_F^2              : {self.fro_G2:.6g}",
            f"c3 = Tr(A^3)             : {self.c3}",
            f"c4 = Tr(A^4) - sum d     : {self.c4}",
            f"c3 * d / c4              : {self.ratio:.4g}  [{self.ratio_flag}]",
            f"global clustering        : {self.clustering:.4g}",
            f"lambda_1(A)              : {self.lambda_1:.6g}",
        ])


def diagnose(graph: Graph) -> Diagnosis:
    """Finite-n readings of degree regularity and the triangle/4-cycle balance."""
    deg = graph.degrees
    dbar = float(deg.mean()) if graph.n else 0.0
    c1 = float(deg.min()) / dbar if dbar > 0 else 0.0
    c2 = float(deg.max()) / dbar if dbar > 0 else 0.0
    if deg.min() == 0:
        reg = "violated (isolated nodes)"
    elif c2 / c1 <= 4.0:
        reg = "holds"
    else:
        reg = "borderline" if c2 / c1 <= 16.0 else "violated"
    census = cycle_census(graph)
    op = RowNormOp(graph)
    fro_g2 = float(frobenius_sq(make_word(op, ["G", "G"])))
    ratio = census.c3 * dbar / census.c4 if census.c4 > 0 else (math.inf if census.c3 else 0.0)
    return Diagnosis(n=graph.n, deg_min=int(deg.min()), deg_mean=dbar, deg_max=int(deg.max()),
                     c1=c1, c2=c2, fro_G=op.frobenius_sq(), fro_G2=fro_g2, c3=census.c3, c4=census.c4,
                     ratio=ratio, clustering=census.clustering,
                     lambda_1=spectral_radius(graph) if graph.num_edges else 0.0,
                     regularity_flag=reg, ratio_flag=ratio_flag(ratio))


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------


def plot_summary(summary_csv, outdir, prefix=None) -> list[Path]:
    """One SVG per parameter: mean error per estimator with 2.5-97.5% bands."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = ex.read_csv(summary_csv, required=SUMMARY_REQUIRED)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    prefix = prefix or Path(summary_csv).stem
    estimators = sorted({r["estimator"] for r in rows})
    written = []
    with matplotlib.rc_context({"svg.hashsalt": "peernet", "svg.fonttype": "none"}):
        for param, symbol in (("delta", "δ"), ("rho", "ρ")):
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for est in estimators:
                sub = sorted((r for r in rows if r["estimator"] == est), key=lambda r: int(r["n"]))
                n = np.array([int(r["n"]) for r in sub])
                mean = np.array([float(r[f"{param}_mean"]) for r in sub])
                lo = np.array([float(r[f"{param}_lo"]) for r in sub])
                hi = np.array([float(r[f"{param}_hi"]) for r in sub])
                (line,) = ax.plot(n, mean, marker="o", ms=3, label=est)
                if np.any(hi > lo):
                    ax.fill_between(n, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
            ax.axhline(0.0, color="black", lw=0.8)
            ax.set_xlabel("n")
            ax.set_ylabel(f"{symbol}̂ − {symbol}")
            ax.legend()
            fig.tight_layout()
            path = outdir / f"{prefix}_{param}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _parse_matrix(s):
    return np.array([[float(x) for x in row.split()] for row in s.split(";") if row.strip()])


NAMED_GRAPHONS = {
    "constant": lambda u, v: 0.5 + 0.0 * (u + v),
    "sum": lambda u, v: (u + v) / 2.0,
    "rank-one": lambda u, v: u * v,
    "exp": lambda u, v: np.exp(-(u + v)),
}


def _cmd_run(args):
    cfg = ex.load_config(args.config)
    out = args.output or cfg.output
    table = ex.run(cfg, out, workers=args.workers)
    print(f"wrote {len(table.rows)} rows to {out}/results.csv and {out}/summary.csv")


def _cmd_reproduce(args):
    over = {}
    if args.reps is not None:
        over["replications"] = args.reps
    if args.seed is not None:
        over["seed"] = args.seed
    cfg = ex.figure_config(args.figure, **over)
    out = args.output or f"results/figure{args.figure}"
    table = ex.run(cfg, out, workers=args.workers)
    print(f"wrote {len(table.rows)} rows to {out}/results.csv and {out}/summary.csv")
    if args.plot:
        for p in plot_summary(Path(out) / "summary.csv", out, prefix=f"figure{args.figure}"):
            print(f"wrote {p}")


def _cmd_diagnose(args):
    if args.graph:
        graph = read_edgelist(args.graph)
    else:
        payload = {}
        spec = EnsembleSpec(kind=args.ensemble, n=args.n, d=args.d, c=args.c, exponent=args.exponent,
                            payload=payload, seed=args.seed)
        graph = generate(spec)
    print(diagnose(graph).to_text())


def _cmd_identify(args):
    if args.graphon:
        f = NAMED_GRAPHONS[args.graphon]
        verdict = degree_codegree_check(f, quad_n=args.quad_n)
        obj = f
    else:
        if args.E is not None:
            pi = None if args.pi is None else np.array([float(x) for x in args.pi.split()])
            spec = SbmSpec.from_e(_parse_matrix(args.E), pi)
        elif args.P is not None and args.pi is not None:
            spec = SbmSpec(_parse_matrix(args.P), np.array([float(x) for x in args.pi.split()]))
        else:
            raise ConfigError("identify needs --E, --P with --pi, or --graphon")
        verdict = sbm_identification(spec, tol_eig=args.tol_eig, tol_overlap=args.tol_overlap)
        obj = spec
    if args.relevance:
        params = LisParams(alpha=args.alpha, beta=args.beta, delta0=args.delta0, rho0=args.rho0, mu=args.mu)
        verdict = relevance_check(obj, params, tol_eig=args.tol_eig, tol_overlap=args.tol_overlap,
                                  quad_n=args.quad_n)
    print(verdict.to_report())
    if args.csv:
        row = verdict.to_csv_row()
        print(",".join(row))
        print(",".join(str(v) for v in row.values()))


def _cmd_plot(args):
    for p in plot_summary(args.summary, args.output, prefix=args.prefix):
        print(f"wrote {p}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="peernet", description="Peer-effect network simulations.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("config")
    p.add_argument("--output", "-o")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("reproduce-figure", help="run a preset Monte Carlo study")
    p.add_argument("figure", type=int, choices=range(1, 7))
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o")
    p.add_argument("--workers", type=int)
    p.add_argument("--plot", action="store_true", help="also write SVG plots")
    p.set_defaults(func=_cmd_reproduce)

    p = sub.add_parser("diagnose", help="structural diagnostics for one graph")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", help="edge-list file")
    src.add_argument("--ensemble", choices=("erdos_renyi", "bipartite_union", "clique_union"))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=float)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--exponent", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("identify", help="identification verdict for a block model or graphon")
    p.add_argument("--E", help="E = P diag(pi), rows separated by ';'")
    p.add_argument("--P", help="connection matrix, rows separated by ';'")
    p.add_argument("--pi", help="community shares (default uniform with --E)")
    p.add_argument("--graphon", choices=sorted(NAMED_GRAPHONS))
    p.add_argument("--relevance", action="store_true", help="also check instrument relevance")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.5)
    p.add_argument("--delta0", type=float, default=0.6)
    p.add_argument("--rho0", type=float, default=0.3)
    p.add_argument("--mu", type=float, default=2.0)
    p.add_argument("--tol-eig", type=float, default=1e-8)
    p.add_argument("--tol-overlap", type=float, default=1e-3)
    p.add_argument("--quad-n", type=int, default=200)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_identify)

    p = sub.add_parser("plot", help="SVG plots from a summary CSV")
    p.add_argument("summary")
    p.add_argument("output")
    p.add_argument("--prefix")
    p.set_defaults(func=_cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, InvalidSpecError, FormatError, SpectralValidityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
