import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peernet.dgp import LimParams
from peernet.errors import InvalidSpecError, NumericError, SpectralValidityError
from peernet.graphs import gen_erdos_renyi
from peernet.operators import (ResolventSpec, RowNormOp, adjacency_resolvent_solve, apply_word,
                               frobenius_sq, make_word, moment_report, neumann_solve,
                               parse_moment_text, trace_moment)
from peernet.oracles import dense_matrices, dense_moment_oracle

from conftest import complete, graph_from_pairs

THETA = LimParams()


def dense_G(graph):
    return dense_matrices(graph, 0.0, 0.0, 0.0)[0]


def test_frobenius_closed_form_matches_dense(small_graph):
    G = dense_G(small_graph)
    assert RowNormOp(small_graph).frobenius_sq() == pytest.approx(np.sum(G * G), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("n,d,seed", [(200, 5, 0), (500, 12, 1), (1000, 3, 2)])
def test_frobenius_closed_form_larger(n, d, seed):
    g = gen_erdos_renyi(n, d, seed=seed)
    op = RowNormOp(g)
    exact = trace_moment(make_word(op, "G"), make_word(op, "G"), method="dense")
    assert op.frobenius_sq() == pytest.approx(exact.value, rel=1e-10)


def test_isolated_node_convention():
    g = graph_from_pairs(4, [(0, 1), (1, 2)])
    op = RowNormOp(g)
    assert op.has_isolated
    assert op.weights[3] == 1.0
    assert np.all((op @ np.ones(4))[:3] == 1.0)
    assert (op @ np.ones(4))[3] == 0.0


def test_h_on_triangle():
    op = RowNormOp(complete(3))
    word = make_word(op, "H", beta=1.0, delta=1.0, rho=0.5)
    # G 1 = 1, so H 1 = (beta + delta) / (1 - rho) 1
    assert np.allclose(apply_word(word, np.ones(3)), 4.0)


def test_words_match_dense_products():
    g = gen_erdos_renyi(80, 6, seed=3)
    G, Sinv, H = dense_matrices(g, THETA.rho, THETA.beta, THETA.delta)
    op = RowNormOp(g)
    v = np.random.default_rng(0).normal(size=(80, 3))
    cases = {"G": G, "G G": G @ G, "G Sinv": G @ Sinv, "G H": G @ H, "GT H": G.T @ H,
             "SinvT G": Sinv.T @ G, "HT": H.T, "A": g.dense()}
    for letters, mat in cases.items():
        got = apply_word(make_word(op, letters, params=THETA), v)
        assert np.allclose(got, mat @ v, rtol=1e-8, atol=1e-8), letters


def test_word_needs_parameters():
    op = RowNormOp(complete(4))
    with pytest.raises(InvalidSpecError):
        make_word(op, "Sinv")
    with pytest.raises(InvalidSpecError):
        make_word(op, "H", rho=0.2)
    with pytest.raises(InvalidSpecError):
        make_word(op, "Q")


def test_trace_symmetry():
    op = RowNormOp(gen_erdos_renyi(150, 7, seed=5))
    a = make_word(op, "G G", params=THETA)
    b = make_word(op, "G H", params=THETA)
    ab = trace_moment(a, b, method="dense").value
    ba = trace_moment(b, a, method="dense").value
    assert ab == pytest.approx(ba, rel=1e-12)
    cab = trace_moment(a, b, centered=True, method="dense").value
    cba = trace_moment(b, a, centered=True, method="dense").value
    assert cab == pytest.approx(cba, rel=1e-12)


def test_hutchinson_within_four_standard_errors():
    op = RowNormOp(gen_erdos_renyi(400, 8, seed=6))
    for letters in ("G", "G G", "G H", "G Sinv"):
        w = make_word(op, letters, params=THETA)
        exact = frobenius_sq(w, method="dense").value
        est = frobenius_sq(w, method="hutchinson", probes=400, seed=11)
        assert est.stderr > 0
        assert abs(est.value - exact) < 4 * est.stderr, letters


def test_neumann_solve_matches_direct():
    g = gen_erdos_renyi(120, 5, seed=8)
    _, Sinv, _ = dense_matrices(g, 0.7, 0.0, 0.0)
    v = np.random.default_rng(1).normal(size=120)
    x = neumann_solve(RowNormOp(g), v, ResolventSpec(rho=0.7, tol=1e-12))
    assert np.allclose(x, Sinv @ v, rtol=1e-10)
    xt = neumann_solve(RowNormOp(g), v, ResolventSpec(rho=0.7, tol=1e-12), transpose=True)
    assert np.allclose(xt, Sinv.T @ v, rtol=1e-10)


def test_neumann_budget_exhaustion_raises():
    op = RowNormOp(gen_erdos_renyi(50, 4, seed=0))
    with pytest.raises(NumericError) as info:
        neumann_solve(op, np.ones(50) + np.arange(50), ResolventSpec(rho=0.9, tol=1e-14, max_iter=3))
    assert "relative_residual" in info.value.diagnostics


def test_rho_outside_unit_interval_rejected():
    op = RowNormOp(complete(4))
    with pytest.raises(SpectralValidityError):
        neumann_solve(op, np.ones(4), ResolventSpec(rho=1.0))


def test_adjacency_resolvent():
    g = gen_erdos_renyi(100, 6, seed=2)
    lam = np.linalg.eigvalsh(g.dense())[-1]
    rho = 0.5 / lam
    v = np.arange(100.0)
    x = adjacency_resolvent_solve(g, rho, v)
    assert np.allclose((np.eye(100) - rho * g.dense()) @ x, v, rtol=1e-9)
    with pytest.raises(SpectralValidityError):
        adjacency_resolvent_solve(g, 1.01 / lam, v)


def test_moment_report_matches_dense_oracle():
    g = gen_erdos_renyi(300, 8, seed=4)
    fast = moment_report(RowNormOp(g), THETA)
    slow = dense_moment_oracle(g, THETA)
    for name in ("fro_G", "fro_G2", "m_G_GH", "m_GH_GH", "m_GS_GS", "m_G_GS", "m_I_GS",
                 "mp_G2_GH", "mp_G2_G2"):
        assert getattr(fast, name) == pytest.approx(getattr(slow, name), rel=1e-9), name
    assert np.allclose(fast.ols_bias, slow.ols_bias, rtol=1e-9)
    assert np.allclose(fast.tsls_cov, slow.tsls_cov, rtol=1e-9)


def test_ols_bias_signs_on_erdos_renyi():
    rep = moment_report(RowNormOp(gen_erdos_renyi(500, 10, seed=1)), THETA)
    assert rep.predicted_bias_rho > 0
    assert rep.predicted_bias_delta < 0


def test_zero_rho_gives_zero_bias():
    rep = moment_report(RowNormOp(gen_erdos_renyi(200, 6, seed=1)), THETA.replace(rho=0.0))
    assert np.allclose(rep.ols_bias, 0.0, atol=1e-12)


def test_report_text_round_trip():
    rep = moment_report(RowNormOp(gen_erdos_renyi(100, 5, seed=0)), THETA)
    parsed = parse_moment_text(rep.to_text())
    assert parsed["fro_G"] == rep.fro_G
    assert parsed["gamma_ww_12"] == rep.gamma_ww[0, 1]
    assert parsed["method"] == "dense"


@settings(max_examples=25, deadline=None)
@given(st.integers(20, 150), st.integers(2, 8), st.integers(0, 10_000),
       st.floats(-0.9, 0.9), st.floats(-2, 2), st.floats(-2, 2))
def test_gamma_ww_is_positive_semidefinite(n, d, seed, rho, beta, delta):
    if d >= n:
        return
    theta = LimParams(beta=beta, delta=delta, rho=rho)
    rep = moment_report(RowNormOp(gen_erdos_renyi(n, d, seed=seed)), theta)
    # Cauchy-Schwarz on the trace inner product
    assert rep.m_G_GH ** 2 <= rep.m_G_G * rep.m_GH_GH * (1 + 1e-9) + 1e-12
    assert rep.det_gamma_ww >= -1e-10 * abs(rep.gamma_ww[0, 0] * rep.gamma_ww[1, 1])
    assert rep.m_G_G == 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(10, 120), st.integers(1, 6), st.integers(0, 10_000), st.floats(-0.95, 0.95))
def test_resolvent_residual_property(n, d, seed, rho):
    if d >= n:
        return
    op = RowNormOp(gen_erdos_renyi(n, d, seed=seed))
    v = np.random.default_rng(seed).normal(size=n)
    x = neumann_solve(op, v, ResolventSpec(rho=rho, tol=1e-10))
    assert np.linalg.norm(x - rho * (op @ x) - v) <= 1e-10 * np.linalg.norm(v) * 1.0001
