"""Random and structured model generators for tests, benchmarks and demos."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .model import AffineExpr, Mdp, ParametricMDP


def random_mdp(rng: np.random.Generator, num_states: int, max_actions: int = 3, max_succ: int = 3,
               with_costs: bool = False) -> Mdp:
    """An MDP with 1..max_actions actions per state, each a random
    distribution over up to ``max_succ`` successors."""
    rows = []
    costs = {} if with_costs else None
    for s in range(num_states):
        acts = []
        for a in range(int(rng.integers(1, max_actions + 1))):
            k = int(rng.integers(1, max_succ + 1))
            succ = rng.choice(num_states, size=min(k, num_states), replace=False)
            w = rng.random(len(succ)) + 0.05
            w /= w.sum()
            acts.append({int(t): float(p) for t, p in zip(succ, w)})
            if with_costs:
                costs[(s, a)] = float(rng.integers(0, 5))
        rows.append(acts)
    return Mdp.from_rows(rows, initial=0, costs=costs)


def _split(rng, k, denom=20):
    """Random positive rationals summing to one."""
    cuts = sorted(rng.choice(np.arange(1, denom), size=k - 1, replace=False)) if k > 1 else []
    bounds = [0, *cuts, denom]
    return [Fraction(int(bounds[i + 1] - bounds[i]), denom) for i in range(k)]


def random_pmc(rng: np.random.Generator, num_states: int, num_params: int, max_succ: int = 3,
               param_prob: float = 0.6, num_targets: int = 1, max_actions: int = 1) -> ParametricMDP:
    """Random pMDP (a pMC by default) whose parametric rows have the shape
    ``x -> v, y -> 1 - v`` optionally mixed with constant branches.

    The last ``num_targets`` states are absorbing targets (label ``target``);
    one extra absorbing sink is added when ``num_states >= 3``.
    """
    params = tuple(f"v{i}" for i in range(num_params))
    n = num_states
    targets = list(range(n - num_targets, n))
    sink = n - num_targets - 1 if n - num_targets >= 3 else None
    transitions, actions = [], []
    for s in range(n):
        if s in targets or s == sink:
            transitions.append(((( s, AffineExpr.const(1)),),))
            actions.append(("a",))
            continue
        rows = []
        for _ in range(int(rng.integers(1, max_actions + 1))):
            k = int(rng.integers(2, max_succ + 1))
            succ = [int(t) for t in rng.choice(n, size=min(k, n), replace=False)]
            if num_params and rng.random() < param_prob:
                v = params[int(rng.integers(num_params))]
                mass = _split(rng, 2, 4)[0] if len(succ) > 2 else Fraction(1)
                rest = 1 - mass
                row = [(succ[0], AffineExpr.param(v, mass)), (succ[1], AffineExpr(mass, {v: -mass}))]
                if len(succ) > 2:
                    row += [(t, AffineExpr.const(p * rest)) for t, p in zip(succ[2:], _split(rng, len(succ) - 2))]
            else:
                row = [(t, AffineExpr.const(p)) for t, p in zip(succ, _split(rng, len(succ)))]
            rows.append(tuple(row))
        transitions.append(tuple(rows))
        actions.append(tuple(f"a{i}" for i in range(len(rows))))
    labels = {"target": set(targets)}
    if sink is not None:
        labels["sink"] = {sink}
    return ParametricMDP(n, 0, params, tuple(actions), tuple(transitions), {}, labels)


def gridworld(width: int = 25, height: int = 20, block_w: int = 5, block_h: int = 2, trap_fraction: float = 0.04,
              seed: int = 0) -> ParametricMDP:
    """A parametric gridworld chain.

    The grid is tiled into ``block_w x block_h`` blocks, each owning one
    parameter ``v``: from a cell of the block the walker moves in the block's
    preferred direction with probability ``v`` and in its second direction
    with ``1 - v``.  Moves off the grid stay in place.  A few cells are
    absorbing traps; the goal is the far corner.  With the defaults: 500
    states and 50 parameters.
    """
    rng = np.random.default_rng(seed)
    n = width * height
    goal = n - 1
    cell = lambda x, y: y * width + x  # noqa: E731
    blocks_x = -(-width // block_w)
    num_blocks = blocks_x * (-(-height // block_h))
    params = tuple(f"v{b}" for b in range(num_blocks))
    moves = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    # each block prefers a move towards the goal and a second, random direction
    dirs = []
    for _ in range(num_blocks):
        first = int(rng.integers(2))
        second = int(rng.choice([d for d in range(4) if d != first]))
        dirs.append((first, second))
    candidates = [c for c in range(1, n - 1)]
    traps = set(int(t) for t in rng.choice(candidates, size=int(trap_fraction * n), replace=False))
    transitions = []
    for y in range(height):
        for x in range(width):
            s = cell(x, y)
            if s == goal or s in traps:
                transitions.append((((s, AffineExpr.const(1)),),))
                continue
            b = (y // block_h) * blocks_x + (x // block_w)
            v = params[b]
            succ = []
            for d in dirs[b]:
                dx, dy = moves[d]
                nx, ny = x + dx, y + dy
                succ.append(cell(nx, ny) if 0 <= nx < width and 0 <= ny < height else s)
            e1, e2 = AffineExpr.param(v), AffineExpr(1, {v: -1})
            if succ[0] == succ[1]:
                row = ((succ[0], e1 + e2),)
            else:
                row = ((succ[0], e1), (succ[1], e2))
            transitions.append((row,))
    actions = tuple(("move",) for _ in range(n))
    labels = {"goal": {goal}, "trap": traps}
    return ParametricMDP(n, 0, params, actions, tuple(transitions), {}, labels)
