import math

import numpy as np
import pytest

import pmdpsynth.synthesis.scp as scp_mod
import pmdpsynth.synthesis.scp_reg as reg_mod
from _oracles import FIG2_MAX, fig2_interval, fig2_reach
from pmdpsynth.errors import NonRectangularRegion
from pmdpsynth.model import AffineExpr, ParametricMDP, Specification, check_graph_preserving, instantiate
from pmdpsynth.modelcheck import check_spec
from pmdpsynth.synthesis import (
    METHODS,
    CcpConfig,
    PsoConfig,
    ScpConfig,
    ScpRegConfig,
    run_ccp,
    run_pso,
    run_scp,
    run_scp_regularized,
)
from pmdpsynth.synthesis.scp import improves, initial_best


def _certify(model, spec, out, eps=1e-6):
    assert out.feasible
    val = out.valuation
    assert check_graph_preserving(model, val, eps)
    assert check_spec(instantiate(model, val), spec).satisfied
    assert out.certified_value == pytest.approx(check_spec(instantiate(model, val), spec).at_initial, abs=0)


def test_ccp_upper_bound(fig2, spec_of):
    spec = spec_of("P<=0.1 [F target]")
    out = run_ccp(fig2, spec, eps=1e-5)
    _certify(fig2, spec, out, 1e-5)
    assert fig2_reach(out.valuation["v"]) <= 0.1 + 1e-12


def test_ccp_vacuous_threshold(fig2, spec_of):
    out = run_ccp(fig2, spec_of("P<=1 [F target]"))
    assert out.feasible and out.iterations <= 1


@pytest.mark.parametrize("method", sorted(METHODS))
def test_impossible_zero_threshold(fig2, spec_of, method):
    kw = {"config": PsoConfig(max_iters=50)} if method == "pso" else {}
    out = METHODS[method](fig2, spec_of("P<=0 [F target]"), **kw)
    assert not out.feasible


@pytest.mark.parametrize("method", sorted(METHODS))
def test_lower_bound_interval(fig2, spec_of, method):
    spec = spec_of("P>=0.14 [F target]")
    out = METHODS[method](fig2, spec, seed=0)
    _certify(fig2, spec, out)
    lo, hi = fig2_interval(0.14)
    assert lo - 1e-3 <= out.valuation["v"] <= hi + 1e-3


def test_oracle_interval():
    lo, hi = fig2_interval(0.14)
    assert lo == pytest.approx(0.5717862743533, abs=1e-12)
    assert hi == pytest.approx(0.7532622017772, abs=1e-12)
    # the looser band [0.546, 0.782] contains the true interval
    assert 0.546 <= lo and hi <= 0.782
    assert fig2_reach(2 / 3) == pytest.approx(FIG2_MAX)


def test_improvement_rule():
    up = Specification("reach", {1}, 0.5, "<=")
    down = Specification("reach", {1}, 0.5, ">=")
    assert initial_best(down) == 0.0 and initial_best(up) == 1e30
    assert improves(down, 0.3, 0.2) and not improves(down, 0.2, 0.2)
    assert improves(up, 0.2, 0.3) and not improves(up, 0.3, 0.3 + 1e-13)


def test_scp_reject_then_accept(fig2, spec_of, monkeypatch):
    answers = iter([False, True])
    monkeypatch.setattr(scp_mod, "improves", lambda spec, beta, best: next(answers, False))
    out = run_scp(fig2, spec_of("P>=0.2 [F target]"), ScpConfig(max_iters=3))
    deltas = [r.delta for r in out.trace]
    assert deltas == [2.0, 2.0 / 1.5, 2.0 / 1.5 * 1.5]
    assert deltas[1] == pytest.approx(4 / 3) and deltas[2] == pytest.approx(2.0)


def _check_scp_trace(out, spec, cfg):
    accepted = [r.mc_value for r in out.trace if r.accepted]
    for a, b in zip(accepted, accepted[1:]):
        assert spec.improves(b, a, 0.0) or spec.holds(b)
    delta = cfg.delta0
    for r in out.trace:
        assert r.delta == delta
        delta = min(delta * cfg.gamma, cfg.delta_cap) if r.accepted else delta / cfg.gamma
    if out.feasible:
        return
    if out.reason == scp_mod.TRUST_REGION_COLLAPSED:
        assert delta < cfg.omega
    else:
        assert out.reason == scp_mod.ITERATION_CAP and len(out.trace) == cfg.max_iters


@pytest.mark.parametrize("text", ["P>=0.14 [F target]", "P>=0.2 [F target]", "P<=0.01 [F target]"])
def test_scp_trace_discipline(fig2, spec_of, text):
    spec = spec_of(text)
    cfg = ScpConfig()
    _check_scp_trace(run_scp(fig2, spec, cfg), spec, cfg)


def test_ccp_tau_schedule(fig2, spec_of):
    cfg = CcpConfig(tau_max=0.3)
    out = run_ccp(fig2, spec_of("P>=0.2 [F target]"), cfg)
    recs = [r for r in out.trace if not math.isnan(r.mu)]
    assert len(recs) > 3
    for a, b in zip(recs, recs[1:]):
        assert b.tau == min(a.tau + a.mu, cfg.tau_max)
    assert recs[0].tau == 0.05


def test_scp_reg_minimizes(fig2, spec_of):
    out = run_scp_regularized(fig2, spec_of("P<=0 [F target]"))
    assert not out.feasible
    last = [r for r in out.trace if r.accepted][-1]
    v = last.anchor.param_values[0]
    assert last.mc_value == pytest.approx(float(fig2_reach(v)), abs=1e-6)
    assert min(v, 1 - v) < 1e-3  # a minimizer of v^2 (1 - v) on the box
    assert out.metadata["mu_prime"] == 2.0


def test_scp_reg_fixed_point(fig2, spec_of):
    spec = spec_of("P<=1e-13 [F target]")
    eps = 1e-6
    v = np.array([eps])
    p = np.array([eps * eps * (1 - eps), eps * (1 - eps), eps])
    out = run_scp_regularized(fig2, spec, start=(v, p))
    assert out.reason == "Converged" and len(out.trace) == 1


def test_scp_reg_beta_escalation(fig2, spec_of, monkeypatch):
    from pmdpsynth.solver import SolveReport
    fail = SolveReport("MaxIterations", np.zeros(5), np.zeros(1), math.nan, 1.0, 1.0, 0)
    monkeypatch.setattr(reg_mod, "solve", lambda *a, **k: fail)
    out = run_scp_regularized(fig2, spec_of("P>=0.14 [F target]"), ScpRegConfig(max_iters=3))
    assert out.metadata["final_beta"] == 4.0
    assert [r.tau for r in out.trace] == [1.0, 2.0, 3.0]


def test_pso_deterministic(fig2, spec_of):
    spec = spec_of("P>=0.2 [F target]")
    a = run_pso(fig2, spec, PsoConfig(max_iters=30), seed=3)
    b = run_pso(fig2, spec, PsoConfig(max_iters=30), seed=3)
    assert [r.mc_value for r in a.trace] == [r.mc_value for r in b.trace]
    assert a.reason == "IterationCap"
    assert a.metadata["best_value"] <= FIG2_MAX + 1e-12


def test_pso_without_parameters():
    m = ParametricMDP(2, 0, (), (("a",), ("a",)), ((((0, AffineExpr("1/2")), (1, AffineExpr("1/2"))),),
                                                    (((1, AffineExpr(1)),),)))
    out = run_pso(m, Specification("reach", {1}, 0.5, ">="))
    assert out.feasible and out.run_calls if hasattr(out, "run_calls") else out.feasible
    assert len(out.trace) == 1


def test_pso_rejects_coupled_region():
    x, y = AffineExpr.param("x"), AffineExpr.param("y")
    row = ((1, x), (2, y), (0, AffineExpr(1) - x - y))
    m = ParametricMDP(3, 0, ("x", "y"), (("a",), ("a",), ("a",)),
                      (((row),), (((1, AffineExpr(1)),),), (((2, AffineExpr(1)),),)))
    with pytest.raises(NonRectangularRegion):
        run_pso(m, Specification("reach", {1}, 0.5, ">="))


@pytest.mark.parametrize("method", sorted(METHODS))
def test_feasible_outcomes_are_certified_on_random_models(method):
    from pmdpsynth.generators import random_pmc
    rng = np.random.default_rng(31)
    for _ in range(4):
        m = random_pmc(rng, int(rng.integers(4, 9)), 2)
        spec = Specification("reach", m.labels["target"], float(rng.uniform(0.2, 0.8)),
                             str(rng.choice(["<=", ">="])))
        kw = {"config": PsoConfig(max_iters=40)} if method == "pso" else {}
        out = METHODS[method](m, spec, seed=1, **kw)
        if out.feasible:
            _certify(m, spec, out)
