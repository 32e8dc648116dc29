"""Sequential convex programming with trust regions and model checking."""

from __future__ import annotations

import math

import numpy as np

from ..encoding import Anchor, linearize_scp, split_solution, update_anchor
from ..model import ParametricMDP, Specification
from ..solver import solve
from .common import (
    ITERATION_CAP,
    TRUST_REGION_COLLAPSED,
    IterationRecord,
    Run,
    ScpConfig,
    SynthesisOutcome,
)

IMPROVE_TOL = 1e-12


def initial_best(spec: Specification) -> float:
    """Worst possible value: 0 for lower bounds, a large constant otherwise."""
    return 0.0 if not spec.maximize else 1e30


def improves(spec: Specification, beta: float, best: float) -> bool:
    if spec.maximize:
        return beta < best - IMPROVE_TOL
    return beta > best + IMPROVE_TOL


def _prob_anchor(enc, values):
    return np.clip(np.nan_to_num(values, posinf=enc.prob_upper), 0.0, enc.prob_upper)


def run_scp(model: ParametricMDP, spec: Specification, config: ScpConfig | None = None, seed: int = 0,
            eps: float = 1e-6, time_budget: float | None = None) -> SynthesisOutcome:
    """``seed`` is accepted for interface symmetry; the procedure is deterministic."""
    cfg = config or ScpConfig()
    run = Run(model, spec, eps, "scp")
    enc = run.encode()
    if isinstance(enc, SynthesisOutcome):
        return enc
    run.metadata.update(tau=cfg.tau, delta0=cfg.delta0, gamma=cfg.gamma, omega=cfg.omega,
                        beta_init=initial_best(spec), delta_cap=cfg.delta_cap, delta_cap_hits=0, seed=seed)

    v = enc.center()
    mc = run.checker.check(v)
    if mc.satisfied:
        run.trace.append(IterationRecord(0, None, math.nan, 0.0, mc.at_initial, True, tau=cfg.tau, candidate=v))
        out = run.feasible(v)
        if out is not None:
            return out
    anchor = Anchor(v, _prob_anchor(enc, enc.prob_vector(mc.per_state)))
    best = mc.at_initial
    delta = cfg.delta0
    problem = linearize_scp(enc, anchor, cfg.tau, delta)
    warm = None
    for it in range(cfg.max_iters):
        if time_budget is not None and run.elapsed() > time_budget:
            break
        rep = solve(problem, warm_start=warm)
        if rep.optimal:
            warm = rep
            x, _, k = split_solution(enc, rep.primal)
            x = enc.project_params(x)
            mc = run.checker.check(x)
            beta, penalty, objective = mc.at_initial, float(np.sum(k)), rep.objective
        else:
            # treat a failed solve like a step without improvement
            mc, beta, penalty, objective = None, math.nan, math.nan, math.nan
            x = None
        accepted = mc is not None and (mc.satisfied or improves(spec, beta, best))
        run.trace.append(IterationRecord(it, anchor, objective, penalty, beta, bool(accepted), delta=delta,
                                         tau=cfg.tau, solver_status=rep.status, candidate=x))
        if mc is not None and mc.satisfied:
            out = run.feasible(x)
            if out is not None:
                return out
        if accepted:
            anchor = Anchor(x, _prob_anchor(enc, enc.prob_vector(mc.per_state)))
            best = beta
            delta = delta * cfg.gamma
            if delta > cfg.delta_cap:
                delta = cfg.delta_cap
                run.metadata["delta_cap_hits"] += 1
        else:
            delta = delta / cfg.gamma
            if delta < cfg.omega:
                return run.not_found(TRUST_REGION_COLLAPSED, mc)
        update_anchor(problem, enc, anchor, delta=delta)
    return run.not_found(ITERATION_CAP)
