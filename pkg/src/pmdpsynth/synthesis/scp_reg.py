"""Regularized sequential convex programming.

Every linearized Bellman row shares one slack ``k``; a proximal term keeps
the step close to the current iterate.  Steps with ``k > 0`` are rejected and
make the slack more expensive.
"""

from __future__ import annotations

import math

import numpy as np

from ..encoding import Anchor, regularized_scp_problem, split_solution, update_anchor
from ..model import ParametricMDP, Specification
from ..solver import solve
from .common import CONVERGED, ITERATION_CAP, IterationRecord, Run, ScpRegConfig, SynthesisOutcome


def lipschitz_estimate(enc) -> float:
    coeffs = [abs(t.coeff) for t in enc.terms]
    return 2.0 * max(coeffs) if coeffs else 0.0


def run_scp_regularized(model: ParametricMDP, spec: Specification, config: ScpRegConfig | None = None,
                        seed: int = 0, eps: float = 1e-6, start: tuple | None = None) -> SynthesisOutcome:
    """``start`` optionally overrides the initial ``(params, probs)``."""
    cfg = config or ScpRegConfig()
    run = Run(model, spec, eps, "scp-reg")
    enc = run.encode()
    if isinstance(enc, SynthesisOutcome):
        return enc
    mu_prime = cfg.mu_prime if cfg.mu_prime is not None else lipschitz_estimate(enc)
    run.metadata.update(beta0=cfg.beta0, delta_step=cfg.delta_step, mu=cfg.mu, mu_prime=mu_prime,
                        mu_prime_estimated=cfg.mu_prime is None, seed=seed)

    if start is None:
        v = enc.center()
        mc = run.checker.check(v)
        p = np.clip(np.nan_to_num(enc.prob_vector(mc.per_state), posinf=enc.prob_upper), 0.0, enc.prob_upper)
    else:
        v, p = (np.asarray(a, dtype=float) for a in start)
        mc = run.checker.check(v)
    anchor = Anchor(v, p)
    beta = cfg.beta0
    problem = regularized_scp_problem(enc, anchor, beta, cfg.mu, mu_prime)
    warm = None
    reason = ITERATION_CAP
    for it in range(cfg.max_iters):
        rep = solve(problem, warm_start=warm)
        if not rep.optimal:
            run.trace.append(IterationRecord(it, anchor, math.nan, math.nan, mc.at_initial, False, tau=beta,
                                             solver_status=rep.status))
            beta += cfg.delta_step
            update_anchor(problem, enc, anchor, beta=beta)
            continue
        warm = rep
        x_v, x_p, k = split_solution(enc, rep.primal)
        slack = float(k[0])
        accepted = slack <= cfg.slack_tol
        x_v = enc.project_params(x_v)
        if accepted:
            step = max(np.max(np.abs(x_v - anchor.param_values), initial=0.0),
                       np.max(np.abs(x_p - anchor.prob_values), initial=0.0))
            mc = run.checker.check(x_v)
            anchor = Anchor(x_v, np.clip(x_p, 0.0, enc.prob_upper))
        run.trace.append(IterationRecord(it, anchor, rep.objective, slack, mc.at_initial, accepted, tau=beta,
                                         solver_status=rep.status, candidate=x_v))
        if accepted and mc.satisfied:
            out = run.feasible(anchor.param_values)
            if out is not None:
                return out
        if accepted and step < cfg.step_tol:
            reason = CONVERGED
            break
        if not accepted:
            beta += cfg.delta_step
        update_anchor(problem, enc, anchor, beta=beta)
    run.metadata["final_beta"] = beta
    out = run.feasible(anchor.param_values) if mc.satisfied else None
    return out if out is not None else run.not_found(reason, mc)
