"""Qualitative (graph-based) reachability analysis.

Only the edge structure matters: a transition is present iff its expression
is not identically zero.  Under graph-preserving valuations the structure is
the same for every instantiation, so the results hold for all of them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleTrivially
from .model import Mdp, ParametricMDP, Specification


class ChoiceGraph:
    """Successor sets per choice, with the choices of state ``s`` stored at
    ``offsets[s]:offsets[s+1]``."""

    def __init__(self, offsets, indptr, indices, num_states):
        self.n = num_states
        self.offsets = np.asarray(offsets)
        self.succ = [
            frozenset(int(t) for t in indices[indptr[c]:indptr[c + 1]]) for c in range(len(indptr) - 1)
        ]
        self.owner = np.repeat(np.arange(num_states), np.diff(self.offsets))
        self.pred: list[list[int]] = [[] for _ in range(num_states)]
        for c, ts in enumerate(self.succ):
            for t in ts:
                self.pred[t].append(c)

    @classmethod
    def of(cls, obj) -> "ChoiceGraph":
        if isinstance(obj, ChoiceGraph):
            return obj
        if isinstance(obj, ParametricMDP):
            cm = obj.compiled
            return cls(cm.offsets, cm.indptr, cm.indices, obj.num_states)
        if isinstance(obj, Mdp):
            # explicit zeros are not edges
            m = obj.matrix.copy()
            m.eliminate_zeros()
            return cls(obj.offsets, m.indptr, m.indices, obj.num_states)
        raise TypeError(f"cannot build a graph from {type(obj).__name__}")

    def choices(self, s):
        return range(self.offsets[s], self.offsets[s + 1])

    def can_reach(self, targets, within=None) -> set:
        """States with a path into ``targets`` (passing only through ``within``)."""
        seen = set(targets)
        queue = deque(seen)
        while queue:
            t = queue.popleft()
            for c in self.pred[t]:
                s = int(self.owner[c])
                if s not in seen and (within is None or s in within):
                    seen.add(s)
                    queue.append(s)
        return seen

    def prob0_max(self, targets) -> set:
        """States from which no scheduler reaches ``targets``."""
        return set(range(self.n)) - self.can_reach(targets)

    def prob0_min(self, targets) -> set:
        """States where some scheduler avoids ``targets`` forever."""
        # least fixed point: every choice of s hits the attractor
        attractor = set(targets)
        hit = np.zeros(len(self.succ), dtype=bool)
        pending = np.diff(self.offsets).copy()
        queue = deque(attractor)
        while queue:
            t = queue.popleft()
            for c in self.pred[t]:
                if hit[c]:
                    continue
                hit[c] = True
                s = int(self.owner[c])
                pending[s] -= 1
                if pending[s] == 0 and s not in attractor:
                    attractor.add(s)
                    queue.append(s)
        return set(range(self.n)) - attractor

    def prob1_max(self, targets) -> set:
        """States where some scheduler reaches ``targets`` almost surely."""
        targets = set(targets)
        u = set(range(self.n))
        while True:
            # choices staying inside u
            inside = [all(t in u for t in ts) for ts in self.succ]
            r = set(targets)
            queue = deque(r)
            while queue:
                t = queue.popleft()
                for c in self.pred[t]:
                    s = int(self.owner[c])
                    if s in u and s not in r and inside[c]:
                        r.add(s)
                        queue.append(s)
            if r == u:
                return u
            u = r

    def prob1_min(self, targets) -> set:
        """States where every scheduler reaches ``targets`` almost surely."""
        targets = set(targets)
        avoid = self.prob0_min(targets)
        within = set(range(self.n)) - targets
        bad = self.can_reach(avoid, within=within) if avoid else set()
        return set(range(self.n)) - bad


@dataclass(frozen=True)
class StateClassification:
    prob0: frozenset
    prob1: frozenset
    remaining: frozenset


def classify_states(model, targets, opt: str = "max") -> StateClassification:
    """Partition states into those reaching ``targets`` with probability 0,
    probability 1, and the rest, under the optimizing scheduler ``opt``.

    ``opt="max"`` is the worst case for upper-bound specifications (the
    statement must hold for all schedulers, so the adversary maximizes).
    """
    if opt not in ("max", "min"):
        raise ValueError("opt must be 'max' or 'min'")
    g = ChoiceGraph.of(model)
    targets = set(targets)
    if opt == "max":
        p0, p1 = g.prob0_max(targets), g.prob1_max(targets)
    else:
        p0, p1 = g.prob0_min(targets), g.prob1_min(targets)
    everything = frozenset(range(g.n))
    return StateClassification(frozenset(p0), frozenset(p1), everything - p0 - p1)


@dataclass(frozen=True)
class ReducedIndexing:
    """Which states get a probability (or cost) variable and which are
    replaced by constants.

    ``states[i]`` is the state of probability variable ``i``; ``constants``
    maps every other state to its fixed value (``inf`` for states with
    infinite expected cost).
    """

    spec: Specification
    states: tuple
    constants: dict
    classification: StateClassification
    trivially_feasible: bool = False
    excluded_choices: frozenset = frozenset()  # (state, action) pairs with no row

    @property
    def var_of_state(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    @property
    def num_vars(self) -> int:
        return len(self.states)

    def value_of(self, s):
        return self.constants.get(s)


def reach_opt(spec: Specification) -> str:
    return "max" if spec.maximize else "min"


def simplify_for_encoding(model: ParametricMDP, spec: Specification, classification=None) -> ReducedIndexing:
    """One variable per remaining state, constants for the rest.

    Raises InfeasibleTrivially when the initial state's value is fixed by the
    graph and violates the threshold.
    """
    g = ChoiceGraph.of(model)
    everything = frozenset(range(model.num_states))
    excluded = set()
    if spec.kind == "reach":
        if classification is None:
            classification = classify_states(g, spec.targets, reach_opt(spec))
        constants = {s: 0.0 for s in classification.prob0}
        constants.update({s: 1.0 for s in classification.prob1})
        states = tuple(sorted(classification.remaining))
    else:
        # expected cost is finite only where the goal is reached almost surely
        # under the relevant schedulers: all of them for upper bounds
        if classification is None:
            p1 = frozenset(g.prob1_min(spec.targets) if spec.maximize else g.prob1_max(spec.targets))
            classification = StateClassification(everything - p1, frozenset(spec.targets), p1 - spec.targets)
        finite = everything - classification.prob0
        constants = {s: float("inf") for s in classification.prob0}
        constants.update({s: 0.0 for s in spec.targets})
        states = tuple(sorted(finite - spec.targets))
        for s in states:
            for a, c in enumerate(g.choices(s)):
                if any(t in classification.prob0 for t in g.succ[c]):
                    excluded.add((s, a))

    trivially = False
    s0 = model.initial
    if s0 in constants:
        value = constants[s0]
        if spec.holds(value):
            trivially = True
        else:
            raise InfeasibleTrivially(
                f"initial state has value {value} under every graph-preserving valuation; "
                f"threshold {spec.direction} {spec.threshold} cannot hold"
            )
    return ReducedIndexing(spec, states, constants, classification, trivially, frozenset(excluded))
