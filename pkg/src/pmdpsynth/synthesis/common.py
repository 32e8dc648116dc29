"""Shared types of the synthesis drivers."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..encoding import Anchor, QcqpEncoding, build_qcqp
from ..errors import InfeasibleTrivially
from ..model import ParametricMDP, Specification, check_graph_preserving, instantiate
from ..modelcheck import CheckResult, SpecChecker, check_spec

FEASIBLE = "Feasible"
NOT_FOUND = "NotFound"

CONVERGED = "Converged"
TRUST_REGION_COLLAPSED = "TrustRegionCollapsed"
ITERATION_CAP = "IterationCap"
INFEASIBLE = "Infeasible"


@dataclass
class CcpConfig:
    tau0: float | None = None  # None: 0.05 for probabilities, 5 for costs
    tau_max: float = 1e4
    max_iters: int = 500
    restart_limit: int = 5
    penalty_zero_tol: float = 1e-9
    convergence_tol: float = 1e-6

    def initial_tau(self, spec: Specification) -> float:
        if self.tau0 is not None:
            return float(self.tau0)
        return 0.05 if spec.kind == "reach" else 5.0

    def __post_init__(self):
        if self.tau0 is not None and self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if self.tau0 is not None and self.tau_max < self.tau0:
            raise ValueError("tau_max must be at least tau0")


@dataclass
class ScpConfig:
    tau: float = 1e4
    delta0: float = 2.0
    gamma: float = 1.5
    omega: float = 1e-4
    max_iters: int = 500
    delta_cap: float = 1e6

    def __post_init__(self):
        if self.gamma <= 1:
            raise ValueError("gamma must exceed 1")
        if self.omega <= 0 or self.delta0 <= 0:
            raise ValueError("omega and delta0 must be positive")


@dataclass
class ScpRegConfig:
    beta0: float = 1.0
    delta_step: float = 1.0
    mu: float = 1e-2
    mu_prime: float | None = None  # None: 2 * max |bilinear coefficient|
    max_iters: int = 500
    slack_tol: float = 1e-9
    step_tol: float = 1e-8


@dataclass
class PsoConfig:
    particles: int = 40
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    max_iters: int = 1000
    time_budget: float | None = None  # seconds; None means no limit


@dataclass
class IterationRecord:
    index: int
    anchor: Anchor | None
    solver_objective: float
    penalty_sum: float
    mc_value: float
    accepted: bool
    delta: float = math.nan
    tau: float = math.nan
    mu: float = math.nan  # CCP: increment applied to tau after this iteration
    solver_status: str = ""
    candidate: np.ndarray | None = None  # parameter values this iteration produced


@dataclass
class SynthesisOutcome:
    status: str
    valuation: dict | None
    check: CheckResult | None
    reason: str | None
    trace: list
    wall_time: float
    iterations: int
    method: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def certified_value(self) -> float | None:
        return None if self.check is None else self.check.at_initial


def valuation_dict(model: ParametricMDP, v) -> dict:
    return {name: float(x) for name, x in zip(model.parameters, np.asarray(v, dtype=float))}


def certify(model: ParametricMDP, spec: Specification, v, eps: float) -> CheckResult | None:
    """Independent re-check of a candidate: graph preservation, a fresh
    instantiation and a fresh model-checking run.  None if it fails."""
    val = valuation_dict(model, v)
    if not check_graph_preserving(model, val, eps):
        return None
    res = check_spec(instantiate(model, val), spec)
    return res if res.satisfied else None


class Run:
    """Bookkeeping shared by the drivers: timing, trace, outcome assembly."""

    def __init__(self, model, spec, eps, method):
        self.model, self.spec, self.eps, self.method = model, spec, eps, method
        self.start = time.perf_counter()
        self.trace: list[IterationRecord] = []
        self.metadata: dict = {"eps_graph": eps}
        self.checker = SpecChecker(model, spec)
        self.metadata["mc_tolerance"] = {"vi_abs_change": 1e-10, "bellman_residual": 1e-9}

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def feasible(self, v) -> SynthesisOutcome | None:
        res = certify(self.model, self.spec, v, self.eps)
        if res is None:
            return None
        return SynthesisOutcome(FEASIBLE, valuation_dict(self.model, v), res, None, self.trace, self.elapsed(),
                                len(self.trace), self.method, self.metadata)

    def not_found(self, reason: str, check: CheckResult | None = None) -> SynthesisOutcome:
        return SynthesisOutcome(NOT_FOUND, None, check, reason, self.trace, self.elapsed(), len(self.trace),
                                self.method, self.metadata)

    def encode(self) -> QcqpEncoding | SynthesisOutcome:
        """The QCQP, or a finished outcome when graph analysis decides."""
        try:
            enc = build_qcqp(self.model, self.spec, eps=self.eps)
        except InfeasibleTrivially as exc:
            self.metadata["note"] = str(exc)
            return self.not_found(INFEASIBLE)
        if enc.initial_var is None or enc.num_probs == 0:
            # the initial state's value is fixed by the graph; one check decides
            v = enc.center() if enc.num_params else np.zeros(0)
            mc = self.checker.check(v)
            self.trace.append(IterationRecord(0, None, math.nan, 0.0, mc.at_initial, bool(mc.satisfied),
                                              candidate=v))
            out = self.feasible(v) if mc.satisfied else None
            return out if out is not None else self.not_found(INFEASIBLE, mc)
        return enc
