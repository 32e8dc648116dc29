"""Convex-concave procedure with model-checking feedback."""

from __future__ import annotations

import math

import numpy as np

from ..encoding import Anchor, convexify_ccp, split_solution, update_anchor
from ..model import ParametricMDP, Specification
from ..solver import solve
from .common import (
    CONVERGED,
    ITERATION_CAP,
    CcpConfig,
    IterationRecord,
    Run,
    SynthesisOutcome,
)


def _prob_anchor(enc, values):
    return np.clip(np.nan_to_num(values, posinf=enc.prob_upper), 0.0, enc.prob_upper)


def run_ccp(model: ParametricMDP, spec: Specification, config: CcpConfig | None = None, seed: int = 0,
            eps: float = 1e-6) -> SynthesisOutcome:
    cfg = config or CcpConfig()
    run = Run(model, spec, eps, "ccp")
    enc = run.encode()
    if isinstance(enc, SynthesisOutcome):
        return enc
    rng = np.random.default_rng(seed)
    tau = cfg.initial_tau(spec)
    run.metadata.update(tau0=tau, tau_max=cfg.tau_max, seed=seed, restarts=0)

    thr = min(max(spec.threshold, 0.0), enc.prob_upper)
    anchor = Anchor(enc.center(), np.full(enc.num_probs, thr))
    problem = convexify_ccp(enc, anchor, tau)
    warm = None
    restarts = 0

    def restart():
        v = enc.project_params(rng.uniform(enc.param_lower, enc.param_upper))
        return Anchor(v, np.full(enc.num_probs, thr))

    for it in range(cfg.max_iters):
        rep = solve(problem, warm_start=warm)
        if not rep.optimal:
            run.trace.append(IterationRecord(it, anchor, math.nan, math.nan, math.nan, False, tau=tau,
                                             solver_status=rep.status))
            restarts += 1
            run.metadata["restarts"] = restarts
            if restarts > cfg.restart_limit:
                return run.not_found(CONVERGED)
            anchor, warm = restart(), None
            update_anchor(problem, enc, anchor, tau=tau)
            continue
        warm = rep
        v, _, k = split_solution(enc, rep.primal)
        v = enc.project_params(v)
        penalty = float(np.sum(k))
        mc = run.checker.check(v)
        mu = float(np.max(anchor.prob_values)) if enc.num_probs else 0.0
        run.trace.append(IterationRecord(it, anchor, rep.objective, penalty, mc.at_initial, bool(mc.satisfied),
                                         tau=tau, mu=mu, solver_status=rep.status,
                                         candidate=v))
        if mc.satisfied or penalty <= cfg.penalty_zero_tol:
            out = run.feasible(v)
            if out is not None:
                return out
        moved = float(np.max(np.abs(v - anchor.param_values))) if enc.num_params else 0.0
        tau = min(tau + mu, cfg.tau_max)
        if moved < cfg.convergence_tol:
            # stuck at a point with positive penalty
            restarts += 1
            run.metadata["restarts"] = restarts
            if restarts > cfg.restart_limit:
                return run.not_found(CONVERGED, mc)
            anchor, warm = restart(), None
        else:
            anchor = Anchor(v, _prob_anchor(enc, enc.prob_vector(mc.per_state)))
        update_anchor(problem, enc, anchor, tau=tau)
    return run.not_found(ITERATION_CAP)
