import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmdpsynth.encoding import (
    Anchor,
    BilinearTerm,
    build_qcqp,
    convexify_ccp,
    dc_decompose,
    debug_dump,
    linearize_scp,
    regularized_scp_problem,
    split_solution,
    update_anchor,
)
from pmdpsynth.errors import ShapeMismatch
from pmdpsynth.generators import random_pmc
from pmdpsynth.graph import classify_states
from pmdpsynth.model import AffineExpr, ParametricMDP, Specification, instantiate
from pmdpsynth.modelcheck import check_spec, reach_prob
from pmdpsynth.solver import load_problem, solve

EPS = 1e-6


@pytest.fixture
def enc_le(fig2):
    return build_qcqp(fig2, Specification("reach", {3}, 0.1, "<="), eps=EPS)


def _gap(problem, x):
    """Row function ``A x + atoms(x) - upper``; feasible rows are <= 0."""
    return problem.row_values(x) - problem.upper


def test_fig2_encoding_shape(enc_le):
    assert enc_le.num_params == 1 and enc_le.num_probs == 3
    assert enc_le.variable_names() == ["v", "p[0]", "p[1]", "p[2]"]
    assert len(enc_le.rows) == 3
    assert enc_le.param_lower[0] == EPS and enc_le.param_upper[0] == 1 - EPS
    assert enc_le.initial_var == 0
    assert not enc_le.coupled


def test_fig2_row_of_s1(enc_le):
    row = enc_le.rows[1]
    assert row.state == 1 and len(row.terms) == 1
    term = row.terms[0]
    assert (term.coeff, term.affine_part, term.prob_var, term.param_var) == (-1.0, 1.0, 2, 0)
    assert row.prob_linear == {2: 1.0}


def test_cost_row_substitutes_goal():
    m = ParametricMDP(2, 0, (), (("a",), ("a",)), ((((0, AffineExpr("1/2")), (1, AffineExpr("1/2"))),),
                                                    (((1, AffineExpr(1)),),)), costs={(0, 0): 1})
    enc = build_qcqp(m, Specification("cost", {1}, 5, "<="))
    (row,) = enc.rows
    assert row.constant == 1.0 and row.prob_linear == {0: 0.5} and not row.terms


def test_encoding_counts():
    rng = np.random.default_rng(11)
    for _ in range(30):
        m = random_pmc(rng, int(rng.integers(3, 15)), 2, max_actions=3)
        spec = Specification("reach", m.labels["target"], 0.5, "<=")
        try:
            enc = build_qcqp(m, spec)
        except Exception:
            continue
        rem = classify_states(m, spec.targets, "max").remaining
        assert len(enc.rows) == sum(len(m.transitions[s]) for s in rem)
        prob = convexify_ccp(enc, Anchor(enc.center(), np.full(enc.num_probs, 0.5)), 1.0)
        assert prob.n - enc.num_vars == len(rem)


def test_dc_examples():
    d = dc_decompose(BilinearTerm((0, 0), 0, 0, 1.0))
    assert (d.d_abs, d.sign, d.affine) == (0.5, 1.0, 0.0)
    assert d.value(0.3, 0.7) == pytest.approx(0.21, abs=1e-15)
    d = dc_decompose(BilinearTerm((1, 0), 0, 0, -1.0, 1.0))
    assert (d.d_abs, d.sign, d.affine) == (0.5, -1.0, 1.0)
    y, z = 0.3, 0.7
    assert d.value(y, z) == pytest.approx(0.5 * (y - z) ** 2 - 0.5 * (y * y + z * z) + z, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.floats(-2, 2), st.floats(0, 1), st.floats(0, 1))
def test_dc_identity(coeff, c, y, z):
    d = dc_decompose(BilinearTerm((0, 0), 0, 0, coeff, c))
    assert d.value(y, z) == pytest.approx(coeff * y * z + c * z, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
       st.floats(0, 1))
def test_concave_linearization_overestimates(coeff, y, z, y0, z0):
    d = dc_decompose(BilinearTerm((0, 0), 0, 0, coeff))
    assert d.concave_linearization(y, z, y0, z0) >= d.concave(y, z) - 1e-12
    assert d.concave_linearization(y0, z0, y0, z0) == pytest.approx(d.concave(y0, z0), abs=1e-12)


def test_ccp_rows_match_hand_form(enc_le, rng):
    vh, ph = 0.4, np.array([0.2, 0.3, 0.6])
    prob = convexify_ccp(enc_le, Anchor([vh], ph), 0.05)
    for _ in range(20):
        v, p, k = rng.random(), rng.random(3), rng.random(3)
        g = _gap(prob, np.concatenate([[v], p, k]))
        # s0: p0 >= v p1 ; s1: p1 >= (1-v) p2 ; s2: p2 >= v * 1
        r0 = 0.5 * (v + p[1]) ** 2 + 0.5 * (vh ** 2 + ph[1] ** 2) - (v * vh + p[1] * ph[1]) - p[0] - k[0]
        r1 = 0.5 * (v - p[2]) ** 2 + 0.5 * (vh ** 2 + ph[2] ** 2) - (v * vh + p[2] * ph[2]) + p[2] - p[1] - k[1]
        r2 = v - p[2] - k[2]
        assert g[:3] == pytest.approx([r0, r1, r2], abs=1e-12)
    assert prob.q[1] == 1.0 and np.all(prob.q[4:] == 0.05)
    assert prob.upper[3] == 0.1  # threshold row on p0


def test_ccp_exact_at_anchor_and_overestimates(enc_le, rng):
    for _ in range(500):
        anchor = Anchor(rng.uniform(EPS, 1 - EPS, 1), rng.random(3))
        prob = convexify_ccp(enc_le, anchor, 1.0)
        x_a = np.concatenate([anchor.param_values, anchor.prob_values, np.zeros(3)])
        assert _gap(prob, x_a)[:3] == pytest.approx(enc_le.residuals(anchor.param_values, anchor.prob_values),
                                                    abs=1e-12)
        u = np.concatenate([rng.uniform(EPS, 1 - EPS, 1), rng.random(3)])
        x_u = np.concatenate([u, np.zeros(3)])
        assert np.all(_gap(prob, x_u)[:3] >= enc_le.residuals(u[:1], u[1:]) - 1e-9)


def test_scp_linearization_example(enc_le):
    prob = linearize_scp(enc_le, Anchor([0.5], [0.125, 0.5, 0.5]), 1e4, 2.0)
    row = prob.A[0].toarray().ravel()
    # 0.5 v + 0.5 p1 - 0.25 - p0 - k0 <= 0
    assert row[:4] == pytest.approx([0.5, -1.0, 0.5, 0.0])
    assert prob.upper[0] == pytest.approx(0.25)
    x = np.array([0.5, 0.125, 0.5, 0.5, 0, 0, 0])
    assert (prob.A @ x)[0] - prob.upper[0] + 0.125 == pytest.approx(0.25)  # value 0.25 at the anchor


def test_scp_trust_region_bounds(enc_le):
    ph = np.array([0.125, 0.25, 0.5])
    prob = linearize_scp(enc_le, Anchor([0.5], ph), 1e4, 2.0)
    tpl = prob.template
    s = tpl.tr_prob_start
    assert prob.lower[s:s + 3] == pytest.approx(ph / 3)
    assert prob.upper[s:s + 3] == pytest.approx(ph * 3)


def _arrays(p):
    return [p.q, p.A.data, p.A.indices, p.A.indptr, p.lower, p.upper, p.var_lower, p.var_upper,
            p.row_atoms.weight, p.row_atoms.i, p.row_atoms.j, p.row_atoms.sign, p.obj_atoms.weight]


@pytest.mark.parametrize("mode", ["ccp", "scp", "reg"])
def test_update_anchor_equals_rebuild(enc_le, rng, mode):
    def build(anchor):
        if mode == "ccp":
            return convexify_ccp(enc_le, anchor, 0.3)
        if mode == "scp":
            return linearize_scp(enc_le, anchor, 1e4, 1.5)
        return regularized_scp_problem(enc_le, anchor, 2.0, 1e-2, 2.0)

    a0 = Anchor(rng.random(1) * 0.9 + 0.05, rng.random(3))
    prob = build(a0)
    before = [a.copy() for a in _arrays(prob)]
    update_anchor(prob, enc_le, a0)
    assert all(np.array_equal(x, y) for x, y in zip(before, _arrays(prob)))  # idempotent
    for _ in range(5):
        a1 = Anchor(rng.random(1) * 0.9 + 0.05, rng.random(3))
        update_anchor(prob, enc_le, a1)
        fresh = build(a1)
        assert all(np.array_equal(x, y) for x, y in zip(_arrays(fresh), _arrays(prob)))


def test_delta_only_refresh_changes_trust_region_bounds(fig2, enc_le):
    n_param_entries = sum(1 for s in (0, 1, 2) for row in fig2.transitions[s] for _, e in row if not e.is_constant)
    assert len(enc_le.entries) == n_param_entries == 6
    anchor = Anchor([0.5], [0.125, 0.25, 0.5])
    prob = linearize_scp(enc_le, anchor, 1e4, 2.0)
    lo, up, a = prob.lower.copy(), prob.upper.copy(), prob.A.data.copy()
    update_anchor(prob, enc_le, anchor, delta=3.0)
    changed = int(np.sum(lo != prob.lower) + np.sum(up != prob.upper))
    assert changed == 2 * (enc_le.num_probs + n_param_entries)
    assert np.array_equal(a, prob.A.data)


def test_shape_mismatch(enc_le):
    prob = convexify_ccp(enc_le, Anchor([0.5], [0.1, 0.2, 0.3]), 1.0)
    with pytest.raises(ShapeMismatch):
        update_anchor(prob, enc_le, Anchor([0.5], [0.1, 0.2]))


def test_debug_dump_roundtrip(enc_le):
    prob = convexify_ccp(enc_le, Anchor([0.5], [0.1, 0.2, 0.3]), 1.0)
    back = load_problem(debug_dump(prob))
    x = np.linspace(0.1, 0.9, prob.n)
    assert back.objective(x) == prob.objective(x)
    assert np.array_equal(back.row_values(x), prob.row_values(x))


def test_appendix_invariant_mc_below_p():
    """Any QCQP-feasible (v, p) for an upper bound dominates the true
    reachability probabilities."""
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(40):
        m = random_pmc(rng, int(rng.integers(3, 12)), 2)
        spec = Specification("reach", m.labels["target"], 1.0, "<=")
        try:
            enc = build_qcqp(m, spec)
        except Exception:
            continue
        if enc.num_probs == 0:
            continue
        for _ in range(5):
            v = rng.uniform(0.05, 0.95, 2)
            mdp = instantiate(m, dict(zip(m.parameters, v)))
            exact = reach_prob(mdp, spec.targets).per_state
            # p solves p = P p + slack with slack >= 0, hence dominates exact
            P = mdp.matrix.toarray()
            idx = list(enc.prob_states)
            slack = rng.random(len(idx)) * 0.05
            b = np.array([P[s] @ exact for s in idx]) - P[np.ix_(idx, idx)] @ exact[idx] + slack
            p = np.linalg.solve(np.eye(len(idx)) - P[np.ix_(idx, idx)], b)
            p = np.minimum(p, 1.0)
            if not enc.feasible(v, p):
                continue
            checked += 1
            assert np.all(exact[idx] <= p + 1e-7)
    assert checked > 20


def test_zero_penalty_solution_is_sound(fig2):
    spec = Specification("reach", {3}, 0.1, "<=")
    enc = build_qcqp(fig2, spec)
    prob = convexify_ccp(enc, Anchor([0.2], [0.1, 0.1, 0.1]), 10.0)
    rep = solve(prob)
    v, p, k = split_solution(enc, rep.primal)
    assert rep.optimal and k.sum() <= 1e-9
    assert check_spec(instantiate(fig2, {"v": v[0]}), spec).satisfied
