"""Configuration-driven Monte Carlo runner.

A run is a grid of network sizes times a number of replications.  Each
replication draws a fresh graph and dataset from seeds derived from
``(base_seed, grid_index, replication)`` and records the estimation error of
every requested estimator.  Outputs are sorted before writing, so the CSV
files do not depend on how many worker processes were used.

Config files are INI-style::

    [ensemble]
    kind = erdos_renyi          ; erdos_renyi | bipartite_union | clique_union | sbm
    exponent = 0.25             ; degree law d(n) = c * n**exponent
    constant = auto             ; auto: d = 10 at n = 100 for random ensembles, 1 for unions
    P = 0.8 0.05 0.05; 0.05 0.4 0.05; 0.05 0.05 0.1     ; sbm only
    pi = 0.25 0.35 0.4                                    ; sbm only

    [grid]
    n_start = 100
    n_stop = 2000
    n_step = 100                ; or: n_values = 500 1000 2000

    [model]
    type = lim                  ; lim | lis
    alpha = 1.0
    beta = 1.5
    delta = 0.6                 ; delta0 / rho0 for lis
    rho = 0.3
    mu = 2.0
    sigma = 1.0
    sigma_eps = 0.1

    [run]
    estimators = ols_lim, tsls_lim
    replications = 200
    seed = 20240917
    output = results
    workers = 1
"""

from __future__ import annotations

import configparser
import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dgp import LimParams, LisParams, simulate_lim, simulate_lis
from .errors import ConfigError, FormatError, InvalidSpecError, NumericError, SpectralValidityError
from .estimators import ols_lim, ols_lim_fwl, tsls_lim, tsls_lis
from .graphs import ENSEMBLE_KINDS, EnsembleSpec, calibrated_constant, degree_law, generate
from .operators import RowNormOp
from .seeding import derive_seed

DEFAULT_REPS = 200
DEFAULT_SEED = 20240917
LIM_ESTIMATORS = {"ols_lim": ols_lim, "ols_lim_fwl": ols_lim_fwl, "tsls_lim": tsls_lim}
LIS_ESTIMATORS = {"tsls_lis": tsls_lis}

RESULT_COLUMNS = ("n", "d", "mean_degree", "estimator", "replication", "seed",
                  "alpha", "beta", "delta", "rho", "delta_err", "rho_err", "cond", "status")
SUMMARY_COLUMNS = ("n", "d", "estimator", "reps", "failures", "unstable",
                   "delta_mean", "delta_sd", "delta_se", "delta_lo", "delta_hi",
                   "rho_mean", "rho_sd", "rho_se", "rho_lo", "rho_hi")

# block model used for linear-in-sums runs: three well-separated eigenvalues,
# every eigenfunction with a sizeable component along the constant
LIS_SBM_P = ((0.8, 0.05, 0.05), (0.05, 0.4, 0.05), (0.05, 0.05, 0.1))
LIS_SBM_PI = (0.25, 0.35, 0.4)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "erdos_renyi"
    exponent: float = 0.25
    constant: float | None = None
    n_values: tuple = tuple(range(100, 2001, 100))
    model: str = "lim"
    params: object = field(default_factory=LimParams)
    estimators: tuple = ("ols_lim", "tsls_lim")
    replications: int = DEFAULT_REPS
    seed: int = DEFAULT_SEED
    output: str = "results"
    workers: int = 1
    P: tuple | None = None
    pi: tuple | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS or self.kind == "graphon":
            raise ConfigError(f"unsupported ensemble kind {self.kind!r}")
        if not self.n_values:
            raise ConfigError("n grid is empty")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ConfigError("n grid must be strictly ascending")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.model not in ("lim", "lis"):
            raise ConfigError(f"model must be lim or lis, got {self.model!r}")
        table = LIM_ESTIMATORS if self.model == "lim" else LIS_ESTIMATORS
        unknown = [e for e in self.estimators if e not in table]
        if unknown or not self.estimators:
            raise ConfigError(f"estimators {unknown or '(none)'} not available for model {self.model}")
        if self.kind == "sbm" and (self.P is None or self.pi is None):
            raise ConfigError("sbm ensembles need P and pi")

    @property
    def c(self) -> float:
        if self.constant is not None:
            return self.constant
        if self.kind in ("bipartite_union", "clique_union"):
            return 1.0
        return calibrated_constant(self.exponent)

    def degree(self, n) -> int:
        return degree_law(n, self.c, self.exponent)

    def ensemble(self, n) -> EnsembleSpec:
        d = self.degree(n)
        payload = {}
        if self.kind == "sbm":
            P, pi = np.array(self.P, float), np.array(self.pi, float)
            m1 = float(pi @ P @ pi)
            payload = {"P": P, "pi": pi, "p_n": d / ((n - 1) * m1)}
        return EnsembleSpec(kind=self.kind, n=n, d=d, payload=payload)

    def with_reps(self, reps) -> "ExperimentConfig":
        return replace(self, replications=int(reps))

    def validate(self) -> None:
        """Check every grid point before any compute happens."""
        for n in self.n_values:
            spec = self.ensemble(n)
            d = spec.d
            if self.kind == "erdos_renyi" and not 1 <= d < n:
                raise InvalidSpecError(f"n={n}: erdos_renyi needs 1 <= d < n, got d={d}")
            if self.kind == "bipartite_union" and 2 * d > n:
                raise InvalidSpecError(f"n={n}: bipartite_union needs 2d <= n, got d={d}")
            if self.kind == "clique_union" and d + 1 > n:
                raise InvalidSpecError(f"n={n}: clique_union needs d + 1 <= n, got d={d}")
            if self.kind == "sbm":
                p_n = spec.payload["p_n"]
                if p_n * float(np.max(spec.payload["P"])) > 1.0:
                    raise InvalidSpecError(f"n={n}: p_n * max(P) exceeds 1")


def figure_config(fig: int, **overrides) -> ExperimentConfig:
    """Preset for figures 1-6 of the Monte Carlo study.

    1, 2: Erdos-Renyi with d ~ n^(1/2) and n^(1/4) (d = 10 at n = 100)
    3:    as 2 with beta = 0
    4:    union of complete bipartite graphs, d = n^(1/4), beta = 0
    5, 6: union of cliques, d = n^(1/4); OLS and 2SLS panels respectively
    """
    base = dict(n_values=tuple(range(100, 2001, 100)), label=f"figure{fig}")
    presets = {
        1: dict(kind="erdos_renyi", exponent=0.5),
        2: dict(kind="erdos_renyi", exponent=0.25),
        3: dict(kind="erdos_renyi", exponent=0.25, params=LimParams(beta=0.0)),
        4: dict(kind="bipartite_union", exponent=0.25, params=LimParams(beta=0.0)),
        5: dict(kind="clique_union", exponent=0.25, estimators=("ols_lim",)),
        6: dict(kind="clique_union", exponent=0.25, estimators=("tsls_lim",)),
    }
    if fig not in presets:
        raise ConfigError(f"no preset for figure {fig}; choose 1-6")
    base.update(presets[fig])
    base.update(overrides)
    return ExperimentConfig(**base)


def lis_config(**overrides) -> ExperimentConfig:
    """Linear-in-sums run on a three-block SBM with d ~ n^(1/2)."""
    base = dict(kind="sbm", exponent=0.5, model="lis", params=LisParams(), estimators=("tsls_lis",),
                P=LIS_SBM_P, pi=LIS_SBM_PI, n_values=(500, 1000, 2000, 4000), label="lis")
    base.update(overrides)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------


def _line_of(text, section, key):
    cur = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            cur = line[1:-1].strip()
        elif cur == section and line.split("=", 1)[0].strip().lower() == key.lower():
            return no
    return None


def _matrix(s):
    return tuple(tuple(float(x) for x in row.split()) for row in s.split(";") if row.strip())


def parse_config(text: str, source="<config>") -> ExperimentConfig:
    """Parse INI text into an :class:`ExperimentConfig`; errors carry line numbers."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    def get(section, key, conv, default):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            line = _line_of(text, section, key)
            where = f"{source}:{line}" if line else source
            raise ConfigError(f"{where}: bad value for [{section}] {key} = {raw!r} ({exc})") from exc

    kw = {}
    kw["kind"] = get("ensemble", "kind", str.strip, "erdos_renyi")
    kw["exponent"] = get("ensemble", "exponent", float, 0.25)
    kw["constant"] = get("ensemble", "constant", lambda s: None if s.strip() == "auto" else float(s), None)
    kw["P"] = get("ensemble", "p", _matrix, None)
    kw["pi"] = get("ensemble", "pi", lambda s: tuple(float(x) for x in s.split()), None)

    if cp.has_option("grid", "n_values"):
        kw["n_values"] = get("grid", "n_values", lambda s: tuple(int(x) for x in s.replace(",", " ").split()), ())
    else:
        a = get("grid", "n_start", int, 100)
        b = get("grid", "n_stop", int, 2000)
        step = get("grid", "n_step", int, 100)
        if step <= 0:
            raise ConfigError(f"{source}:{_line_of(text, 'grid', 'n_step')}: n_step must be positive")
        kw["n_values"] = tuple(range(a, b + 1, step))

    model = get("model", "type", str.strip, "lim")
    kw["model"] = model
    if model == "lis":
        names = ("alpha", "beta", "delta0", "rho0", "mu", "sigma", "sigma_eps")
        defaults = LisParams()
        vals = {k: get("model", k, float, getattr(defaults, k)) for k in names}
        kw["params"] = LisParams(**vals)
    else:
        names = ("alpha", "beta", "delta", "rho", "mu", "sigma", "sigma_eps")
        defaults = LimParams()
        vals = {k: get("model", k, float, getattr(defaults, k)) for k in names}
        kw["params"] = LimParams(**vals)

    default_est = "ols_lim, tsls_lim" if model == "lim" else "tsls_lis"
    kw["estimators"] = get("run", "estimators", lambda s: tuple(e.strip() for e in s.split(",") if e.strip()),
                           tuple(e.strip() for e in default_est.split(",")))
    kw["replications"] = get("run", "replications", int, DEFAULT_REPS)
    kw["seed"] = get("run", "seed", int, DEFAULT_SEED)
    kw["output"] = get("run", "output", str.strip, "results")
    kw["workers"] = get("run", "workers", int, 1)
    kw["label"] = get("run", "label", str.strip, "")
    try:
        return ExperimentConfig(**kw)
    except (InvalidSpecError, ConfigError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


# ---------------------------------------------------------------------------
# replications
# ---------------------------------------------------------------------------


_GRAPH_CACHE = {}


def _graph_for(cfg, k, n, graph_seed):
    spec = cfg.ensemble(n)
    if cfg.kind in ("bipartite_union", "clique_union"):
        # deterministic ensembles: one graph per grid point
        key = (cfg.kind, n, spec.d)
        if key not in _GRAPH_CACHE:
            _GRAPH_CACHE.clear()
            _GRAPH_CACHE[key] = generate(spec, seed=0)
        return _GRAPH_CACHE[key], spec.d
    return generate(spec, seed=graph_seed), spec.d


def _one_replication(cfg: ExperimentConfig, k: int, n: int, r: int):
    ss = derive_seed(cfg.seed, k, r)
    graph_ss, data_ss = ss.spawn(2)
    seed_tag = int(ss.generate_state(1, dtype=np.uint32)[0])
    graph, d = _graph_for(cfg, k, n, graph_ss)
    base = {"n": n, "d": d, "mean_degree": graph.mean_degree, "replication": r, "seed": seed_tag}
    rows = []

    def fail(status):
        for name in cfg.estimators:
            rows.append({**base, "estimator": name, "alpha": math.nan, "beta": math.nan, "delta": math.nan,
                         "rho": math.nan, "delta_err": math.nan, "rho_err": math.nan, "cond": math.nan,
                         "status": status})
        return rows

    p = cfg.params
    if cfg.model == "lim":
        op = RowNormOp(graph)
        try:
            data = simulate_lim(op, p, seed=data_ss)
        except NumericError:
            return fail("numeric")
        for name in cfg.estimators:
            fn = LIM_ESTIMATORS[name]
            est = fn(op, data, allow_unstable=True) if name == "tsls_lim" else fn(op, data)
            rows.append({**base, "estimator": name, **_values(est.theta), "delta_err": est.delta - p.delta,
                         "rho_err": est.rho - p.rho, "cond": est.cond, "status": est.status})
        return rows

    try:
        data = simulate_lis(graph, p, seed=data_ss)
    except SpectralValidityError:
        return fail("invalid")
    except NumericError:
        return fail("numeric")
    for name in cfg.estimators:
        est = tsls_lis(graph, data, allow_unstable=True)
        scaled = est.extras.get("rescaled", np.full(4, np.nan))
        # errors on the mean-degree scale: dbar * (theta_n_hat - theta_n)
        rows.append({**base, "estimator": name, **_values(est.theta), "delta_err": scaled[2] - p.delta0,
                     "rho_err": scaled[3] - p.rho0, "cond": est.cond, "status": est.status})
    return rows


def _values(theta):
    return dict(zip(("alpha", "beta", "delta", "rho"), (float(v) for v in theta)))


def _run_chunk(args):
    cfg, tasks = args
    out = []
    for k, n, r in tasks:
        out.extend(_one_replication(cfg, k, n, r))
    return out


def run_replications(cfg: ExperimentConfig, workers=None, replications=None) -> list:
    """All result rows, sorted by ``(n, estimator, replication)``.

    ``replications`` may be a subset of indices (used to check that results
    do not depend on which replications run or in what order).
    """
    cfg.validate()
    reps = range(cfg.replications) if replications is None else replications
    tasks = [(k, n, r) for k, n in enumerate(cfg.n_values) for r in reps]
    workers = cfg.workers if workers is None else workers
    if workers and workers > 1:
        size = max(1, len(tasks) // (4 * workers))
        chunks = [(cfg, tasks[i:i + size]) for i in range(0, len(tasks), size)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = [row for part in ex.map(_run_chunk, chunks) for row in part]
    else:
        rows = _run_chunk((cfg, tasks))
    rows.sort(key=lambda r: (r["n"], r["estimator"], r["replication"]))
    return rows


def _band(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return dict(mean=math.nan, sd=math.nan, se=math.nan, lo=math.nan, hi=math.nan)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return dict(mean=float(np.mean(x)), sd=sd, se=sd / math.sqrt(x.size),
                lo=float(np.percentile(x, 2.5)), hi=float(np.percentile(x, 97.5)))


def summarize(rows) -> list:
    """Per ``(n, estimator)``: mean, SD, MC standard error and 2.5/97.5 percentile band.

    Rows with status ``ok`` or ``unstable`` contribute; the rest are counted
    as failures.
    """
    groups = {}
    for r in rows:
        groups.setdefault((int(r["n"]), r["estimator"]), []).append(r)
    out = []
    for (n, est), rs in sorted(groups.items()):
        good = [r for r in rs if r["status"] in ("ok", "unstable")]
        rec = {"n": n, "d": rs[0]["d"], "estimator": est, "reps": len(rs),
               "failures": len(rs) - len(good),
               "unstable": sum(r["status"] == "unstable" for r in rs)}
        for p in ("delta", "rho"):
            for k, v in _band([float(r[f"{p}_err"]) for r in good]).items():
                rec[f"{p}_{k}"] = v
        out.append(rec)
    return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(rows, columns, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_csv(path, required=()) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for c in required:
            if c not in cols:
                raise FormatError(f"{path}: missing required column {c!r}")
        return list(reader)


@dataclass
class ResultsTable:
    """Per-replication rows plus their summary."""

    rows: list
    summary: list

    def write(self, outdir) -> tuple[Path, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        res, summ = outdir / "results.csv", outdir / "summary.csv"
        write_csv(self.rows, RESULT_COLUMNS, res)
        write_csv(self.summary, SUMMARY_COLUMNS, summ)
        return res, summ


def run(cfg: ExperimentConfig, outdir=None, workers=None) -> ResultsTable:
    """Run an experiment and write ``results.csv`` and ``summary.csv``."""
    rows = run_replications(cfg, workers=workers)
    table = ResultsTable(rows=rows, summary=summarize(rows))
    table.write(outdir if outdir is not None else cfg.output)
    return table


def default_workers() -> int:
    return max(1, min(4, os.cpu_count() or 1))
