"""Particle swarm baseline: black-box search over the parameter box, each
particle scored by model checking the instantiated model."""

from __future__ import annotations

import math

import numpy as np

from ..encoding import build_qcqp
from ..errors import InfeasibleTrivially, NonRectangularRegion
from ..model import ParametricMDP, Specification
from .common import INFEASIBLE, ITERATION_CAP, IterationRecord, PsoConfig, Run, SynthesisOutcome


def run_pso(model: ParametricMDP, spec: Specification, config: PsoConfig | None = None, seed: int = 0,
            eps: float = 1e-6) -> SynthesisOutcome:
    cfg = config or PsoConfig()
    run = Run(model, spec, eps, "pso")
    run.metadata.update(particles=cfg.particles, inertia=cfg.inertia, cognitive=cfg.cognitive,
                        social=cfg.social, seed=seed)
    try:
        enc = build_qcqp(model, spec, eps=eps)
    except InfeasibleTrivially:
        enc = None
    if enc is not None and enc.coupled:
        raise NonRectangularRegion("well-definedness couples parameters; the region is not a box")
    n = len(model.parameters)
    if enc is None:
        return run.not_found(INFEASIBLE)
    if n == 0:
        mc = run.checker.check(np.zeros(0))
        run.trace.append(IterationRecord(0, None, math.nan, math.nan, mc.at_initial, bool(mc.satisfied), candidate=np.zeros(0)))
        out = run.feasible(np.zeros(0)) if mc.satisfied else None
        return out if out is not None else run.not_found(INFEASIBLE, mc)

    lo, hi = enc.param_lower, enc.param_upper
    rng = np.random.default_rng(seed)
    # the objective is "distance past the threshold", lower is better
    sign = 1.0 if spec.maximize else -1.0

    pos = rng.uniform(lo, hi, size=(cfg.particles, n))
    vel = rng.uniform(-(hi - lo), hi - lo, size=(cfg.particles, n)) * 0.1
    best_pos = pos.copy()
    best_val = np.full(cfg.particles, np.inf)
    g_pos, g_val = pos[0].copy(), np.inf
    for it in range(cfg.max_iters):
        if cfg.time_budget is not None and run.elapsed() > cfg.time_budget:
            break
        raw = run.checker.initial_values(pos)
        vals = sign * raw
        sat = [i for i in range(cfg.particles) if spec.holds(raw[i])]
        better = vals < best_val
        best_val[better] = vals[better]
        best_pos[better] = pos[better]
        i_best = int(np.argmin(best_val))  # argmin: lowest index on ties
        if best_val[i_best] < g_val:
            g_val, g_pos = float(best_val[i_best]), best_pos[i_best].copy()
        run.trace.append(IterationRecord(it, None, math.nan, math.nan, sign * g_val, bool(sat)))
        for i in sat:
            out = run.feasible(pos[i])
            if out is not None:
                return out
        r1 = rng.random((cfg.particles, n))
        r2 = rng.random((cfg.particles, n))
        vel = cfg.inertia * vel + cfg.cognitive * r1 * (best_pos - pos) + cfg.social * r2 * (g_pos - pos)
        pos = np.clip(pos + vel, lo, hi)
    run.metadata["best_value"] = sign * g_val
    return run.not_found(ITERATION_CAP)
