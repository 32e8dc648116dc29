"""Synthesis drivers."""

from .ccp import run_ccp
from .common import (
    CONVERGED,
    FEASIBLE,
    INFEASIBLE,
    ITERATION_CAP,
    NOT_FOUND,
    TRUST_REGION_COLLAPSED,
    CcpConfig,
    IterationRecord,
    PsoConfig,
    ScpConfig,
    ScpRegConfig,
    SynthesisOutcome,
    certify,
)
from .pso import run_pso
from .scp import run_scp
from .scp_reg import run_scp_regularized

METHODS = {"ccp": run_ccp, "scp": run_scp, "scp-reg": run_scp_regularized, "pso": run_pso}

__all__ = [
    "CONVERGED", "FEASIBLE", "INFEASIBLE", "ITERATION_CAP", "NOT_FOUND", "TRUST_REGION_COLLAPSED",
    "CcpConfig", "IterationRecord", "PsoConfig", "ScpConfig", "ScpRegConfig", "SynthesisOutcome",
    "certify", "run_ccp", "run_pso", "run_scp", "run_scp_regularized", "METHODS",
]
