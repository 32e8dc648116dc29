"""Command-line front end.

    pmdpsynth --model fig2.pmdp --spec "P<=0.1 [F target]" --method ccp --out run/ --trace

Prints the result document (JSON, sorted keys) to stdout and optionally
writes ``result.json`` and ``trace.csv`` into ``--out``.  Exit status: 0 when
a certified valuation was found, 2 when none was found, 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import PmdpError
from .io import load_model, parse_spec
from .model import check_graph_preserving, instantiate, validate_model, validate_spec
from .modelcheck import RESIDUAL_TOL, VI_TOL, check_spec
from .synthesis import (
    METHODS,
    CcpConfig,
    PsoConfig,
    ScpConfig,
    ScpRegConfig,
)

EXIT_FEASIBLE, EXIT_ERROR, EXIT_NOT_FOUND = 0, 1, 2
ORACLE_TOL = 1e-7
TRACE_HEADER = ("iter", "objective", "mc_value", "penalty_sum", "delta", "tau", "accepted")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as NotFound
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pmdpsynth", description="Parameter synthesis for parametric MDPs.")
    p.add_argument("--model", required=True, metavar="PATH", help="model file")
    p.add_argument("--spec", required=True, metavar="STRING", help='e.g. "P<=0.1 [F target]"')
    p.add_argument("--method", choices=sorted(METHODS), default="ccp")
    p.add_argument("--eps-graph", type=float, default=1e-6, help="graph-preservation margin (default 1e-6)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--tau0", type=float, help="initial penalty weight (ccp) or fixed penalty weight (scp)")
    p.add_argument("--tau-max", type=float, help="penalty weight ceiling (ccp)")
    p.add_argument("--delta0", type=float, help="initial trust region (scp)")
    p.add_argument("--gamma", type=float, help="trust region growth factor (scp)")
    p.add_argument("--omega", type=float, help="smallest trust region before giving up (scp)")
    p.add_argument("--out", metavar="DIR", help="directory for result.json and trace.csv")
    p.add_argument("--trace", action="store_true", help="write the per-iteration trace")
    p.add_argument("--oracle-check", action="store_true",
                   help="cross-validate the final answer with both value iteration and LP")
    p.add_argument("--seeds", type=int, default=1, metavar="N", help="run N seeds starting at --seed")
    return p


def make_config(args):
    """The method's configuration with command-line overrides applied."""
    def pick(**kw):
        return {k: v for k, v in kw.items() if v is not None}

    if args.method == "ccp":
        return CcpConfig(**pick(tau0=args.tau0, tau_max=args.tau_max, max_iters=args.max_iters))
    if args.method == "scp":
        return ScpConfig(**pick(tau=args.tau0, delta0=args.delta0, gamma=args.gamma, omega=args.omega,
                                max_iters=args.max_iters))
    if args.method == "scp-reg":
        return ScpRegConfig(**pick(max_iters=args.max_iters))
    return PsoConfig(**pick(max_iters=args.max_iters))


def _plain(x):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = sorted(x) if isinstance(x, (set, frozenset)) else x
        return [_plain(v) for v in items]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def oracle_check(model, spec, valuation, eps) -> dict:
    """Value iteration and LP on the returned valuation, side by side."""
    mdp = instantiate(model, valuation)
    vi = check_spec(mdp, spec, method="vi").at_initial
    lp = check_spec(mdp, spec, method="lp").at_initial
    diff = abs(vi - lp) if math.isfinite(vi) and math.isfinite(lp) else (0.0 if vi == lp else math.inf)
    return {"vi": vi, "lp": lp, "abs_diff": diff, "agree": bool(diff <= ORACLE_TOL),
            "graph_preserving": bool(check_graph_preserving(model, valuation, eps))}


def result_document(args, config, outcome, oracle=None) -> dict:
    cfg = dict(vars(config))
    doc = {
        "tool": "pmdpsynth",
        "version": __version__,
        "model": str(args.model),
        "spec": args.spec,
        "method": args.method,
        "seed": args.seed,
        "config": cfg,
        "tolerances": {"eps_graph": args.eps_graph, "vi_abs_change": VI_TOL, "bellman_residual": RESIDUAL_TOL},
        "outcome": outcome.status,
        "reason": outcome.reason,
        "valuation": outcome.valuation,
        "certified_value": outcome.certified_value,
        "iterations": outcome.iterations,
        "wall_time": outcome.wall_time,
        "metadata": outcome.metadata,
    }
    if oracle is not None:
        doc["oracle_check"] = oracle
    return _plain(doc)


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _cell(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    return repr(float(x))


def write_trace(path: Path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)  # default dialect quotes per RFC 4180
        w.writerow(TRACE_HEADER)
        for rec in trace:
            w.writerow([rec.index, _cell(rec.solver_objective), _cell(rec.mc_value), _cell(rec.penalty_sum),
                        _cell(rec.delta), _cell(rec.tau), _cell(bool(rec.accepted))])


def _single(args):
    """One synthesis run: ``(document, trace, feasible)``."""
    model = load_model(args.model)
    problems = [d for d in validate_model(model, args.eps_graph) if d.severity == "error"]
    spec = parse_spec(args.spec, model.labels, model.num_states)
    problems += [d for d in validate_spec(spec, model) if d.severity == "error"]
    if problems:
        raise PmdpError("; ".join(str(d) for d in problems))
    config = make_config(args)
    outcome = METHODS[args.method](model, spec, config, seed=args.seed, eps=args.eps_graph)
    oracle = None
    if args.oracle_check and outcome.feasible:
        oracle = oracle_check(model, spec, outcome.valuation, args.eps_graph)
    return result_document(args, config, outcome, oracle), outcome.trace, outcome.feasible


def _seed_job(args, seed):
    sub = argparse.Namespace(**{**vars(args), "seed": seed})
    return _single(sub)


def _emit(args, doc, traces):
    text = dumps(doc)
    sys.stdout.write(text)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "result.json").write_text(text)
    if args.trace:
        where = out if out is not None else Path.cwd()
        for name, trace in traces:
            write_trace(where / name, trace)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seeds < 1:
            raise PmdpError("--seeds must be at least 1")
        if not Path(args.model).is_file():
            raise PmdpError(f"model file not found: {args.model}")
        if args.seeds == 1:
            doc, trace, feasible = _single(args)
            oracle = doc.get("oracle_check")
            _emit(args, doc, [("trace.csv", trace)])
            if oracle is not None and not oracle["agree"]:
                print("pmdpsynth: value iteration and LP disagree on the result", file=sys.stderr)
                return EXIT_ERROR
            return EXIT_FEASIBLE if feasible else EXIT_NOT_FOUND
        seeds = list(range(args.seed, args.seed + args.seeds))
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_seed_job, [args] * len(seeds), seeds))
        runs = [doc for doc, _, _ in results]
        summary = {
            "tool": "pmdpsynth",
            "version": __version__,
            "seeds": seeds,
            "feasible": sum(1 for _, _, f in results if f),
            "not_found": sum(1 for _, _, f in results if not f),
            "runs": runs,
        }
        _emit(args, summary, [(f"trace_seed{s}.csv", t) for s, (_, t, _) in zip(seeds, results)])
        if any(r.get("oracle_check", {}).get("agree") is False for r in runs):
            print("pmdpsynth: value iteration and LP disagree on a result", file=sys.stderr)
            return EXIT_ERROR
        return EXIT_FEASIBLE if summary["feasible"] else EXIT_NOT_FOUND
    except (PmdpError, OSError, ValueError) as exc:
        print(f"pmdpsynth: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
