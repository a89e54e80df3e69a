import subprocess
import sys

import pytest

from peernet.cli import diagnose, main, plot_summary, ratio_flag
from peernet.errors import FormatError
from peernet.experiments import ExperimentConfig, run
from peernet.graphs import gen_bipartite_union, gen_clique_union, gen_erdos_renyi, write_edgelist


def test_diagnose_flags_by_ensemble():
    assert diagnose(gen_clique_union(500, 4)).ratio_flag == "violated"
    assert diagnose(gen_bipartite_union(500, 4)).ratio_flag == "holds"
    er = diagnose(gen_erdos_renyi(400, 80, seed=0))
    assert er.regularity_flag == "holds"
    assert er.fro_G == pytest.approx(sum(1 / d for d in gen_erdos_renyi(400, 80, seed=0).degrees))


def test_ratio_thresholds():
    assert [ratio_flag(r) for r in (0.0, 0.2, 0.7)] == ["holds", "borderline", "violated"]


def test_diagnose_command(tmp_path, capsys):
    path = tmp_path / "g.txt"
    write_edgelist(gen_erdos_renyi(50, 4, seed=1), path)
    assert main(["diagnose", "--graph", str(path)]) == 0
    out = capsys.readouterr().out
    assert "c3 * d / c4" in out
    assert "nodes                    : 50" in out


def test_diagnose_bad_file(tmp_path, capsys):
    path = tmp_path / "g.txt"
    path.write_text("n 3\n0 9\n")
    assert main(["diagnose", "--graph", str(path)]) == 2
    assert "g.txt:2" in capsys.readouterr().err


def test_identify_command(capsys):
    e = "1 0 0; 0 1 0.5; 0 0.5 1"
    assert main(["identify", "--E", e, "--csv"]) == 0
    out = capsys.readouterr().out
    assert "identified      : no" in out
    assert "identified,witness,min_gram_eig,kappa" in out
    assert main(["identify", "--graphon", "constant"]) == 0
    assert "identified      : no" in capsys.readouterr().out
    assert main(["identify", "--P", "0.8 0.05 0.05; 0.05 0.4 0.05; 0.05 0.05 0.1",
                 "--pi", "0.25 0.35 0.4", "--relevance"]) == 0
    assert "identified      : yes" in capsys.readouterr().out


def test_identify_needs_input(capsys):
    assert main(["identify"]) == 2


def test_run_command_and_config_error(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[grid]\nn_values = 100\n[run]\nreplications = 2\n")
    assert main(["run", str(cfg), "--output", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "summary.csv").exists()
    cfg.write_text("[grid]\nn_values = 100\n[run]\nreplications = two\n")
    assert main(["run", str(cfg)]) == 2
    assert "c.ini:4" in capsys.readouterr().err


def test_plot_is_deterministic(tmp_path):
    run(ExperimentConfig(n_values=(100, 200), replications=4), tmp_path / "r")
    a = plot_summary(tmp_path / "r" / "summary.csv", tmp_path / "p1", prefix="x")
    b = plot_summary(tmp_path / "r" / "summary.csv", tmp_path / "p2", prefix="x")
    assert [p.name for p in a] == ["x_delta.svg", "x_rho.svg"]
    for p, q in zip(a, b):
        assert p.read_bytes() == q.read_bytes()


def test_plot_missing_column(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("n,estimator,delta_mean\n100,ols_lim,0.1\n")
    with pytest.raises(FormatError, match="delta_lo"):
        plot_summary(path, tmp_path)
    assert main(["plot", str(path), str(tmp_path)]) == 2


def test_reproduce_figure_small(tmp_path):
    assert main(["reproduce-figure", "5", "--reps", "2", "--output", str(tmp_path / "f5")]) == 0
    assert (tmp_path / "f5" / "results.csv").read_text().startswith("n,d,mean_degree")


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "peernet", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "reproduce-figure" in out.stdout
