"""Model checking of instantiated MDPs: reachability probabilities and
expected costs under optimal schedulers.

The value-iteration route iterates the Bellman operator until the absolute
change drops below ``VI_TOL`` and then certifies the result: a scheduler is
extracted, its induced chain is solved exactly and the solution must satisfy
the Bellman optimality equations to within ``RESIDUAL_TOL``.  The LP route
solves the standard linear program with the in-repo convex solver and is an
independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import breadth_first_order

from .errors import InfiniteCost, NonConvergence
from .graph import ChoiceGraph
from .model import Mdp, Specification

VI_TOL = 1e-10
RESIDUAL_TOL = 1e-9
MAX_ITER = 10**6
_TIE_TOL = 1e-9
_DENSE_STATES = 150  # chains up to this size are solved densely
_BATCH_STATES = 120  # largest chain evaluated in batches


@dataclass
class CheckResult:
    per_state: np.ndarray
    at_initial: float
    satisfied: bool | None = None
    scheduler: np.ndarray | None = None  # local action index per state
    infinite: frozenset = frozenset()
    iterations: int = 0
    method: str = "vi"
    residual: float = 0.0
    metadata: dict = field(default_factory=dict)

    def values(self, states) -> np.ndarray:
        return self.per_state[np.asarray(states, dtype=np.int64)]


class _Setup:
    """Qualitative part of a query: fixed values, usable choices, infinite
    states.  Depends only on the graph, so it can be shared by all
    graph-preserving instantiations of a parametric model."""

    def __init__(self, graph: ChoiceGraph, kind: str, targets, opt: str):
        if opt not in ("max", "min"):
            raise ValueError("opt must be 'max' or 'min'")
        targets = set(int(t) for t in targets)
        self.kind, self.opt = kind, opt
        self.allowed = None
        self.infinite = frozenset()
        if kind == "reach":
            if opt == "max":
                zero, one = graph.prob0_max(targets), graph.prob1_max(targets)
            else:
                zero, one = graph.prob0_min(targets), graph.prob1_min(targets)
            fixed = {s: 0.0 for s in zero}
            fixed.update({s: 1.0 for s in one})
            self.progress = opt == "max"
        else:
            finite = graph.prob1_min(targets) if opt == "max" else graph.prob1_max(targets)
            self.infinite = frozenset(range(graph.n)) - finite
            fixed = {s: 0.0 for s in targets}
            fixed.update({s: math.inf for s in self.infinite})
            if opt == "min" and self.infinite:
                self.allowed = np.array([not (graph.succ[c] & self.infinite) for c in range(len(graph.succ))])
            self.progress = opt == "min"
        self.fixed = fixed

    def run(self, mdp: Mdp, method: str = "vi", max_iter: int = MAX_ITER) -> CheckResult:
        costs = None
        if self.kind == "cost":
            costs = mdp.costs if mdp.costs is not None else np.zeros(mdp.num_choices)
        solver = _lp_values if method == "lp" else _vi_values
        x, sched, iters, res = solver(mdp, self.fixed, self.opt, costs, self.allowed, max_iter,
                                      progress=self.progress, bounded=self.kind == "reach")
        return CheckResult(x, float(x[mdp.initial]), None, sched, self.infinite, iters, method, res)


def reach_prob(mdp: Mdp, targets, opt: str = "max", method: str = "vi", max_iter: int = MAX_ITER) -> CheckResult:
    """Optimal probability of eventually reaching ``targets`` from every state."""
    return _Setup(ChoiceGraph.of(mdp), "reach", targets, opt).run(mdp, method, max_iter)


def expected_cost(
    mdp: Mdp, goals, opt: str = "max", method: str = "vi", strict: bool = False, max_iter: int = MAX_ITER
) -> CheckResult:
    """Optimal expected accumulated cost until ``goals`` are reached.

    States from which the goal is not reached almost surely (under some
    scheduler for ``max``, under every scheduler for ``min``) have infinite
    cost; they are flagged in ``infinite`` and carry ``inf`` in
    ``per_state``.  With ``strict=True`` such states raise InfiniteCost.
    """
    setup = _Setup(ChoiceGraph.of(mdp), "cost", goals, opt)
    if strict and setup.infinite:
        raise InfiniteCost(setup.infinite)
    return setup.run(mdp, method, max_iter)


def check_spec(mdp: Mdp, spec: Specification, method: str = "vi") -> CheckResult:
    """Worst case over schedulers: maximize for ``<=`` bounds, minimize for ``>=``."""
    opt = "max" if spec.maximize else "min"
    res = _Setup(ChoiceGraph.of(mdp), spec.kind, spec.targets, opt).run(mdp, method)
    res.satisfied = spec.holds(res.at_initial)
    return res


class SpecChecker:
    """Repeated checks of one specification on instantiations of one
    parametric model.  The graph analysis runs once; every call only swaps
    in new transition values.  Valid for graph-preserving valuations."""

    def __init__(self, model, spec: Specification, method: str = "vi"):
        self.model = model
        self.spec = spec
        self.method = method
        self.compiled = model.compiled
        opt = "max" if spec.maximize else "min"
        self.setup = _Setup(ChoiceGraph.of(model), spec.kind, spec.targets, opt)
        self.calls = 0
        self._batch = self._batch_plan(model.num_states)

    def check(self, v) -> CheckResult:
        self.calls += 1
        mdp = self.compiled.mdp(np.asarray(v, dtype=float), check=False)
        res = self.setup.run(mdp, self.method)
        res.satisfied = self.spec.holds(res.at_initial)
        return res

    @property
    def batched(self) -> bool:
        """Whether ``initial_values`` solves all valuations at once."""
        return self._batch is not None

    def initial_values(self, V) -> np.ndarray:
        """Values at the initial state for each row of ``V``.  Chains of
        moderate size are solved in one batched dense solve; anything else
        falls back to one ``check`` per row."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        if self._batch is None:
            return np.array([self.check(v).at_initial for v in V])
        self.calls += len(V)
        cm = self.compiled
        live, fixed_idx, fixed_val, init_pos, init_val = self._batch
        if init_pos is None:
            return np.full(len(V), init_val)
        vals = cm.const[None, :] + (cm.coeffs @ V.T).T if cm.coeffs.shape[1] else np.tile(cm.const, (len(V), 1))
        n = cm.num_states
        flat = cm.entry_choice * n + cm.indices  # one choice per state, so choice == state
        P = np.zeros(len(V) * n * n)
        np.add.at(P, (np.arange(len(V))[:, None] * (n * n) + flat[None, :]).ravel(), vals.ravel())
        P = P.reshape(len(V), n, n)
        sub = P[:, live, :]
        rhs = sub[:, :, fixed_idx] @ fixed_val
        if self.setup.kind == "cost" and cm.costs is not None:
            rhs = rhs + cm.costs[live][None, :]
        mat = np.eye(len(live))[None] - sub[:, :, live]
        sol = np.linalg.solve(mat, rhs[..., None])[..., 0]
        return sol[:, init_pos]

    def _batch_plan(self, n):
        cm = self.compiled
        if self.method != "vi" or len(cm.choice_keys) != n or n > _BATCH_STATES:
            return None
        fixed = self.setup.fixed
        fixed_idx = np.array(sorted(fixed), dtype=np.int64)
        fixed_val = np.array([fixed[s] for s in fixed_idx]) if len(fixed_idx) else np.zeros(0)
        init = self.model.initial
        if init in fixed:
            return np.zeros(0, dtype=np.int64), fixed_idx, fixed_val, None, float(fixed[init])
        # free states with a path to a positive (reach) or zero (cost) fixed state
        good = {s for s, x in fixed.items() if (x > 0 if self.setup.kind == "reach" else x == 0)}
        succ = [set(int(t) for t in cm.indices[cm.indptr[c]:cm.indptr[c + 1]]) for c in range(n)]
        reach = set(good)
        grown = True
        while grown:
            grown = False
            for s in range(n):
                if s not in reach and s not in fixed and succ[s] & reach:
                    reach.add(s)
                    grown = True
        live = np.array([s for s in range(n) if s in reach and s not in fixed], dtype=np.int64)
        if init not in reach:
            return live, fixed_idx, fixed_val, None, 0.0
        finite = np.isfinite(fixed_val)
        return live, fixed_idx[finite], fixed_val[finite], int(np.searchsorted(live, init)), None


# -- value iteration ---------------------------------------------------------


def _opt_reduce(q, offsets, opt):
    if opt == "max":
        return np.maximum.reduceat(q, offsets[:-1])
    return np.minimum.reduceat(q, offsets[:-1])


def _choice_values(mdp, x, costs, allowed, opt, finite_mask):
    # infinite entries only ever sit behind disallowed choices
    xs = np.where(finite_mask, x, 0.0)
    q = mdp.matrix @ xs
    if costs is not None:
        q = q + costs
    if allowed is not None:
        q = np.where(allowed, q, -np.inf if opt == "max" else np.inf)
    return q


def _vi_values(mdp, fixed, opt, costs, allowed, max_iter, progress, bounded):
    n = mdp.num_states
    offsets = mdp.offsets
    fixed_idx = np.array(sorted(fixed), dtype=np.int64)
    fixed_val = np.array([fixed[s] for s in fixed_idx]) if len(fixed_idx) else np.zeros(0)
    finite_mask = np.ones(n, dtype=bool)
    finite_mask[fixed_idx[np.isinf(fixed_val)]] = False
    x = np.zeros(n)
    x[fixed_idx] = fixed_val
    free = np.ones(n, dtype=bool)
    free[fixed_idx] = False
    if not free.any():
        return x, _lowest_choices(mdp, allowed), 0, 0.0

    if costs is not None and progress:
        # Minimal costs: iterate downwards from a proper scheduler's values.
        # From below, zero-cost cycles would converge to a spurious fixpoint.
        q0 = np.zeros(mdp.num_choices)
        if allowed is not None:
            q0[~allowed] = np.inf
        sched0 = _extract_scheduler(mdp, x, q0, free, opt, True, fixed_idx[fixed_val == 0])
        start = _evaluate(mdp, sched0, fixed_idx, fixed_val, free, finite_mask, costs)
        if start is not None:
            x = start

    nchoice = np.diff(offsets) if allowed is None else np.add.reduceat(allowed.astype(int), offsets[:-1])
    next_check = 0 if np.all(nchoice[free] == 1) else 64
    last_failed = None
    for it in range(1, max_iter + 1):
        q = _choice_values(mdp, x, costs, allowed, opt, finite_mask)
        y = _opt_reduce(q, offsets, opt)
        y[~free] = x[~free]
        delta = float(np.max(np.abs(y[free] - x[free])))
        x = y
        converged = delta < VI_TOL
        if converged or it >= next_check:
            done = _finish(mdp, x, fixed_idx, fixed_val, free, finite_mask, opt, costs, allowed, progress)
            if done is not None:
                values, sched, res = done
                return values, sched, it, res
            if converged and last_failed is not None and it - last_failed < 2:
                # the iterates no longer move and no scheduler certifies them
                done = _policy_iteration(mdp, x, fixed_idx, fixed_val, free, finite_mask, opt, costs, allowed, progress)
                if done is not None:
                    values, sched, res = done
                    return values, sched, it, res
                raise NonConvergence(it)
            last_failed = it
            next_check = max(2 * next_check, it + 64)
    raise NonConvergence(max_iter)


def _lowest_choices(mdp, allowed):
    sched = np.zeros(mdp.num_states, dtype=np.int64)
    if allowed is not None:
        for s in range(mdp.num_states):
            ok = np.flatnonzero(allowed[mdp.offsets[s]:mdp.offsets[s + 1]])
            sched[s] = ok[0] if len(ok) else 0
    return sched


def _extract_scheduler(mdp, x, q, free, opt, progress, good):
    """Lowest-index optimal choice per state.  With ``progress`` set, optimal
    choices must also move towards ``good`` states (attractor order), so
    that loops with equal value are never selected."""
    offsets = mdp.offsets
    best = _opt_reduce(q, offsets, opt)
    owner = mdp.choice_state
    tol = _TIE_TOL * (1.0 + np.abs(best[owner]))
    with np.errstate(invalid="ignore"):
        optimal = np.abs(q - best[owner]) <= tol
    optimal &= np.isfinite(q)
    sched = np.full(mdp.num_states, -1, dtype=np.int64)
    for s in np.flatnonzero(~free):
        sched[s] = 0
    if not progress:
        for s in np.flatnonzero(free):
            ok = np.flatnonzero(optimal[offsets[s]:offsets[s + 1]])
            sched[s] = ok[0] if len(ok) else 0
        return sched
    m = mdp.matrix
    attracted = np.zeros(mdp.num_states, dtype=bool)
    attracted[list(good)] = True
    pending = [s for s in np.flatnonzero(free)]
    changed = True
    while changed and pending:
        changed = False
        rest = []
        for s in pending:
            pick = -1
            for a in range(offsets[s + 1] - offsets[s]):
                c = offsets[s] + a
                if not optimal[c]:
                    continue
                lo, hi = m.indptr[c], m.indptr[c + 1]
                succ = m.indices[lo:hi][m.data[lo:hi] > 0]
                if attracted[succ].any():
                    pick = a
                    break
            if pick >= 0:
                sched[s] = pick
                changed = True
            else:
                rest.append(s)
        for s in pending:
            if sched[s] >= 0:
                attracted[s] = True
        pending = rest
    for s in pending:
        ok = np.flatnonzero(optimal[offsets[s]:offsets[s + 1]])
        sched[s] = ok[0] if len(ok) else 0
    return sched


def _evaluate(mdp, sched, fixed_idx, fixed_val, free, finite_mask, costs):
    """Exact values of the chain induced by ``sched``; None if some free
    state does not reach a positive fixed state (reach) or the goal (cost)."""
    n = mdp.num_states
    rows = mdp.offsets[:-1] + sched
    if n <= _DENSE_STATES:
        return _evaluate_dense(mdp, rows, fixed_idx, fixed_val, free, costs)
    chain = mdp.matrix[rows]
    x = np.zeros(n)
    x[fixed_idx] = fixed_val
    free_idx = np.flatnonzero(free)
    if costs is None:
        sources = fixed_idx[fixed_val > 0]
    else:
        sources = fixed_idx[fixed_val == 0]
    reach = _reaches(chain, sources, n)
    if costs is not None and not reach[free_idx].all():
        return None
    live = free_idx[reach[free_idx]]
    if len(live) == 0:
        return x
    sub = chain[live]
    q_live = sub[:, live]
    rhs = sub[:, fixed_idx] @ np.where(np.isfinite(fixed_val), fixed_val, 0.0)
    if costs is not None:
        rhs = rhs + costs[rows[live]]
        # a positive-probability move into an infinite state makes the cost infinite
        inf_idx = fixed_idx[~np.isfinite(fixed_val)]
        if len(inf_idx) and (sub[:, inf_idx].sum(axis=1) > 0).any():
            return None
    k = len(live)
    mat = (sp.identity(k, format="csc") - q_live.tocsc()).tocsc()
    sol = spla.spsolve(mat, rhs)
    if not np.all(np.isfinite(sol)):
        return None
    x[live] = sol
    return x


def _evaluate_dense(mdp, rows, fixed_idx, fixed_val, free, costs):
    n = mdp.num_states
    chain = mdp.matrix[rows].toarray()
    x = np.zeros(n)
    x[fixed_idx] = fixed_val
    free_idx = np.flatnonzero(free)
    sources = fixed_idx[fixed_val > 0] if costs is None else fixed_idx[fixed_val == 0]
    edge = chain > 0
    reach = np.zeros(n, dtype=bool)
    reach[sources] = True
    while True:
        grown = reach | edge[:, reach].any(axis=1)
        if np.array_equal(grown, reach):
            break
        reach = grown
    if costs is not None and not reach[free_idx].all():
        return None
    live = free_idx[reach[free_idx]]
    if len(live) == 0:
        return x
    sub = chain[live]
    finite = np.isfinite(fixed_val)
    rhs = sub[:, fixed_idx[finite]] @ fixed_val[finite]
    if costs is not None:
        rhs = rhs + costs[rows[live]]
        if (sub[:, fixed_idx[~finite]] > 0).any():
            return None
    try:
        sol = np.linalg.solve(np.eye(len(live)) - sub[:, live], rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    x[live] = sol
    return x


def _reaches(chain, sources, n):
    """Boolean mask of states with a path to ``sources`` in the chain."""
    out = np.zeros(n, dtype=bool)
    if len(sources) == 0:
        return out
    coo = chain.tocoo()
    keep = coo.data > 0
    # reversed edges plus a virtual root pointing at every source
    rows = np.concatenate([coo.col[keep], np.full(len(sources), n)])
    cols = np.concatenate([coo.row[keep], sources])
    rev = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n + 1, n + 1))
    order = breadth_first_order(rev, n, directed=True, return_predecessors=False)
    out[order[order < n]] = True
    return out


def _residual(mdp, x, free, finite_mask, opt, costs, allowed):
    q = _choice_values(mdp, x, costs, allowed, opt, finite_mask)
    y = _opt_reduce(q, mdp.offsets, opt)
    diff = np.abs(y[free] - x[free]) / np.maximum(1.0, np.abs(x[free]))
    return float(diff.max()) if diff.size else 0.0


def _finish(mdp, x, fixed_idx, fixed_val, free, finite_mask, opt, costs, allowed, progress):
    q = _choice_values(mdp, x, costs, allowed, opt, finite_mask)
    good = fixed_idx[fixed_val > 0] if costs is None else fixed_idx[fixed_val == 0]
    sched = _extract_scheduler(mdp, x, q, free, opt, progress, good)
    values = _evaluate(mdp, sched, fixed_idx, fixed_val, free, finite_mask, costs)
    if values is None:
        return None
    res = _residual(mdp, values, free, finite_mask, opt, costs, allowed)
    if res > RESIDUAL_TOL:
        return None
    return values, sched, res


def _policy_iteration(mdp, x, fixed_idx, fixed_val, free, finite_mask, opt, costs, allowed, progress, rounds=100):
    q = _choice_values(mdp, x, costs, allowed, opt, finite_mask)
    good = fixed_idx[fixed_val > 0] if costs is None else fixed_idx[fixed_val == 0]
    sched = _extract_scheduler(mdp, x, q, free, opt, progress, good)
    offsets = mdp.offsets
    for _ in range(rounds):
        values = _evaluate(mdp, sched, fixed_idx, fixed_val, free, finite_mask, costs)
        if values is None:
            return None
        q = _choice_values(mdp, values, costs, allowed, opt, finite_mask)
        improved = False
        for s in np.flatnonzero(free):
            seg = q[offsets[s]:offsets[s + 1]]
            cur = seg[sched[s]]
            a = int(np.argmax(seg) if opt == "max" else np.argmin(seg))
            gain = seg[a] - cur if opt == "max" else cur - seg[a]
            if gain > 1e-12 * (1.0 + abs(cur)):
                sched[s] = a
                improved = True
        if not improved:
            res = _residual(mdp, values, free, finite_mask, opt, costs, allowed)
            return (values, sched, res) if res <= RESIDUAL_TOL else None
    return None


# -- linear programming ------------------------------------------------------


def _lp_values(mdp, fixed, opt, costs, allowed, max_iter, progress, bounded):
    """Solve the Bellman LP: ``min sum x`` subject to ``x >= c + P x`` for
    every choice (maximizing schedulers), or the mirrored program."""
    from .solver import ConvexProblem, solve

    n = mdp.num_states
    fixed_idx = np.array(sorted(fixed), dtype=np.int64)
    fixed_val = np.array([fixed[s] for s in fixed_idx]) if len(fixed_idx) else np.zeros(0)
    x = np.zeros(n)
    x[fixed_idx] = fixed_val
    free_idx = np.array([s for s in range(n) if s not in fixed], dtype=np.int64)
    if len(free_idx) == 0:
        return x, _lowest_choices(mdp, allowed), 0, 0.0
    col = -np.ones(n, dtype=np.int64)
    col[free_idx] = np.arange(len(free_idx))
    owner = mdp.choice_state
    chosen = np.flatnonzero(col[owner] >= 0)
    if allowed is not None:
        chosen = chosen[allowed[chosen]]
    sub = mdp.matrix[chosen]
    finite_fixed = np.where(np.isfinite(fixed_val), fixed_val, 0.0)
    rhs = sub[:, fixed_idx] @ finite_fixed if len(fixed_idx) else np.zeros(len(chosen))
    if costs is not None:
        rhs = rhs + costs[chosen]
    coo = sub[:, free_idx].tocoo()
    # row c: x_owner - sum_t P x_t
    r = np.concatenate([np.arange(len(chosen)), coo.row])
    c = np.concatenate([col[owner[chosen]], coo.col])
    v = np.concatenate([np.ones(len(chosen)), -coo.data])
    a = sp.csr_matrix((v, (r, c)), shape=(len(chosen), len(free_idx)))
    sign = 1.0 if opt == "max" else -1.0
    if opt == "max":
        lower, upper = rhs, np.full(len(chosen), np.inf)
    else:
        lower, upper = np.full(len(chosen), -np.inf), rhs
    ub = np.ones(len(free_idx)) if bounded else np.full(len(free_idx), np.inf)
    prob = ConvexProblem(
        q=sign * np.ones(len(free_idx)), A=a, lower=lower, upper=upper,
        var_lower=np.zeros(len(free_idx)), var_upper=ub,
    )
    rep = solve(prob, eps_abs=1e-10, eps_rel=1e-10, max_iter=max_iter)
    x[free_idx] = rep.primal
    finite_mask = np.isfinite(x)
    free = np.zeros(n, dtype=bool)
    free[free_idx] = True
    q = _choice_values(mdp, x, costs, allowed, opt, finite_mask)
    good = fixed_idx[fixed_val > 0] if costs is None else fixed_idx[fixed_val == 0]
    sched = _extract_scheduler(mdp, x, q, free, opt, progress, good)
    res = _residual(mdp, x, free, finite_mask, opt, costs, allowed)
    return x, sched, rep.iterations, res
