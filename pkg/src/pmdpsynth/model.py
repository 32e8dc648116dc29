"""Parametric MDPs, instantiation and well-formedness checks.

Transition probabilities are affine expressions over the parameters with
exact rational coefficients.  Everything numeric downstream works on the
float arrays produced by :class:`CompiledModel`, which are derived once.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from types import MappingProxyType
from typing import Iterator, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import (
    MissingParameter,
    ModelSyntaxError,
    NonAffineModel,
    NotWellDefined,
    UnknownParameter,
)

Valuation = Mapping[str, float]

ROW_SUM_TOL = 1e-9
NEGATIVE_TOL = 1e-12


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        # repr round-trips, so 0.1 becomes 1/10 rather than its binary expansion
        return Fraction(repr(x))
    return Fraction(x)


class AffineExpr:
    """``constant + sum(coeff[p] * p)`` with rational coefficients.

    Zero coefficients are dropped on construction, so two expressions are
    equal exactly when their constants and coefficient maps are equal.
    """

    __slots__ = ("constant", "coefficients")

    def __init__(self, constant=0, coefficients: Mapping[str, object] | None = None):
        coeffs = {}
        for name, c in (coefficients or {}).items():
            c = _frac(c)
            if c != 0:
                coeffs[name] = c
        object.__setattr__(self, "constant", _frac(constant))
        object.__setattr__(self, "coefficients", MappingProxyType(dict(sorted(coeffs.items()))))

    def __setattr__(self, name, value):
        raise AttributeError("AffineExpr is immutable")

    @classmethod
    def const(cls, value) -> "AffineExpr":
        return cls(value)

    @classmethod
    def param(cls, name: str, coeff=1) -> "AffineExpr":
        return cls(0, {name: coeff})

    @property
    def is_constant(self) -> bool:
        return not self.coefficients

    @property
    def is_zero(self) -> bool:
        return self.constant == 0 and not self.coefficients

    @property
    def parameters(self) -> frozenset:
        return frozenset(self.coefficients)

    def evaluate(self, val: Valuation) -> float:
        return eval_affine(self, val)

    def evaluate_exact(self, val: Mapping[str, Fraction]) -> Fraction:
        total = self.constant
        for name, c in self.coefficients.items():
            if name not in val:
                raise MissingParameter(name)
            total += c * _frac(val[name])
        return total

    def __add__(self, other):
        other = _coerce(other)
        coeffs = dict(self.coefficients)
        for name, c in other.coefficients.items():
            coeffs[name] = coeffs.get(name, 0) + c
        return AffineExpr(self.constant + other.constant, coeffs)

    __radd__ = __add__

    def __neg__(self):
        return AffineExpr(-self.constant, {k: -c for k, c in self.coefficients.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, scalar):
        if isinstance(scalar, AffineExpr):
            if scalar.is_constant:
                scalar = scalar.constant
            elif self.is_constant:
                return scalar * self.constant
            else:
                raise NonAffineModel("product of two parametric expressions")
        s = _frac(scalar)
        return AffineExpr(self.constant * s, {k: c * s for k, c in self.coefficients.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, AffineExpr):
            try:
                other = _coerce(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.constant == other.constant and dict(self.coefficients) == dict(other.coefficients)

    def __hash__(self):
        return hash((self.constant, tuple(self.coefficients.items())))

    def __repr__(self):
        return f"AffineExpr({format_affine(self)!r})"

    def __str__(self):
        return format_affine(self)


def _coerce(x) -> AffineExpr:
    if isinstance(x, AffineExpr):
        return x
    if isinstance(x, str):
        return parse_affine(x)
    return AffineExpr(x)


def format_affine(expr: AffineExpr) -> str:
    """Render in the model-file syntax; exact rationals, parseable back."""
    parts: list[str] = []
    if expr.constant != 0 or expr.is_constant:
        parts.append(str(expr.constant))
    for name, c in expr.coefficients.items():
        if c == 1:
            term = name
        elif c == -1:
            term = f"-{name}"
        else:
            term = f"{c}*{name}"
        if parts:
            if term.startswith("-"):
                parts.append(f"- {term[1:]}")
            else:
                parts.append(f"+ {term}")
        else:
            parts.append(term)
    return " ".join(parts)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+/\d+|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*^/()]))"
)


def parse_affine(text: str, parameters=None, line: int | None = None, col: int = 1) -> AffineExpr:
    """Parse ``terms joined by +/-``; each term ``q``, ``q*p`` or ``p``.

    ``parameters`` (if given) restricts the admissible identifiers.  ``line``
    and ``col`` only position error messages.
    """
    tokens = []
    pos = 0
    stripped = text.rstrip()
    while pos < len(stripped):
        m = _TOKEN_RE.match(stripped, pos)
        if m is None or m.end() == pos:
            bad = stripped[pos:].lstrip()
            at = col + len(stripped) - len(bad)
            raise ModelSyntaxError(f"unexpected character {bad[:1]!r}", line, at)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), col + m.start(kind)))
        pos = m.end()
    if not tokens:
        raise ModelSyntaxError("empty expression", line, col)

    known = None if parameters is None else set(parameters)
    result = AffineExpr()
    i = 0
    sign = 1
    expect_term = True
    while i < len(tokens):
        kind, val, at = tokens[i]
        if expect_term:
            if kind == "op" and val in "+-":
                sign = -sign if val == "-" else sign
                i += 1
                continue
            if kind == "num":
                coeff = Fraction(val)
                if i + 1 < len(tokens) and tokens[i + 1][1] == "*":
                    if i + 2 >= len(tokens) or tokens[i + 2][0] != "ident":
                        raise ModelSyntaxError("expected parameter after '*'", line, tokens[i + 1][2])
                    name, name_at = tokens[i + 2][1], tokens[i + 2][2]
                    _check_name(name, known, line, name_at)
                    result = result + AffineExpr.param(name, sign * coeff)
                    i += 3
                else:
                    result = result + AffineExpr(sign * coeff)
                    i += 1
            elif kind == "ident":
                _check_name(val, known, line, at)
                result = result + AffineExpr.param(val, sign)
                i += 1
            else:
                raise ModelSyntaxError(f"unexpected {val!r}", line, at)
            # a product of parameters or a power is never affine
            if i < len(tokens) and tokens[i][1] in ("*", "^"):
                nxt = tokens[i + 1] if i + 1 < len(tokens) else None
                if tokens[i][1] == "^" or (nxt is not None and nxt[0] == "ident"):
                    raise NonAffineModel(
                        f"non-affine term at line {line}, column {tokens[i][2]}"
                        if line is not None else "non-affine term"
                    )
                raise ModelSyntaxError("expected '<rational>*<param>'", line, tokens[i][2])
            expect_term = False
            sign = 1
        else:
            if kind == "op" and val in "+-":
                sign = -1 if val == "-" else 1
                expect_term = True
                i += 1
            else:
                raise ModelSyntaxError(f"expected '+' or '-', got {val!r}", line, at)
    if expect_term:
        raise ModelSyntaxError("expression ends with an operator", line, tokens[-1][2])
    return result


def _check_name(name, known, line, col):
    if known is not None and name not in known:
        raise UnknownParameter(name, line, col)


def eval_affine(expr: AffineExpr, val: Valuation) -> float:
    total = float(expr.constant)
    for name, c in expr.coefficients.items():
        try:
            x = val[name]
        except KeyError:
            raise MissingParameter(name) from None
        total += float(c) * float(x)
    return total


@dataclass(frozen=True)
class Specification:
    """``P<=l [F T]``, ``P>=l [F T]``, ``E<=k [F G]`` or ``E>=k [F G]``."""

    kind: str  # "reach" or "cost"
    targets: frozenset
    threshold: float
    direction: str  # "<=" or ">="

    def __post_init__(self):
        if self.kind not in ("reach", "cost"):
            raise ValueError(f"unknown specification kind {self.kind!r}")
        if self.direction not in ("<=", ">="):
            raise ValueError(f"unknown direction {self.direction!r}")
        object.__setattr__(self, "targets", frozenset(int(t) for t in self.targets))
        object.__setattr__(self, "threshold", float(self.threshold))
        if not self.targets:
            raise ValueError("target set must not be empty")
        if self.kind == "reach" and not 0.0 <= self.threshold <= 1.0:
            raise ValueError("probability threshold must lie in [0, 1]")
        if self.kind == "cost" and self.threshold < 0:
            raise ValueError("cost threshold must be nonnegative")

    @property
    def maximize(self) -> bool:
        """Whether the adversarial scheduler maximizes (upper-bound specs)."""
        return self.direction == "<="

    @property
    def sense(self) -> int:
        """+1 if the value must stay below the threshold, -1 otherwise."""
        return 1 if self.direction == "<=" else -1

    def holds(self, value: float, tol: float = 0.0) -> bool:
        """Exact comparison; a value on the threshold satisfies it."""
        if self.direction == "<=":
            return value <= self.threshold + tol
        return value >= self.threshold - tol

    def improves(self, new: float, old: float, tol: float = 1e-12) -> bool:
        if self.direction == "<=":
            return new < old - tol
        return new > old + tol

    def __str__(self):
        letter = "P" if self.kind == "reach" else "E"
        states = " ".join(str(t) for t in sorted(self.targets))
        return f"{letter}{self.direction}{self.threshold!r} [F {states}]"


@dataclass(frozen=True)
class ParametricMDP:
    """States ``0..num_states-1``; per state a list of named actions, each a
    sparse row of ``(successor, AffineExpr)``.  Construction never raises on
    semantic problems; :func:`validate_model` reports them.
    """

    num_states: int
    initial: int
    parameters: tuple
    actions: tuple  # actions[s] = tuple of action names
    transitions: tuple  # transitions[s][a] = tuple of (succ, AffineExpr)
    costs: Mapping = field(default_factory=dict)  # (state, action index) -> Fraction
    labels: Mapping = field(default_factory=dict)  # name -> frozenset of states

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "actions", tuple(tuple(a) for a in self.actions))
        object.__setattr__(
            self,
            "transitions",
            tuple(tuple(tuple((int(t), _coerce(e)) for t, e in row) for row in rows) for rows in self.transitions),
        )
        object.__setattr__(self, "costs", MappingProxyType({k: _frac(v) for k, v in sorted(self.costs.items())}))
        object.__setattr__(
            self, "labels", MappingProxyType({k: frozenset(v) for k, v in sorted(self.labels.items())})
        )

    @classmethod
    def from_dict(cls, num_states, initial, parameters, transitions, costs=None, labels=None):
        """Build from ``{state: {action: {succ: expr}}}``; expressions may be
        AffineExpr, numbers or strings in the file syntax."""
        acts, rows = [], []
        for s in range(num_states):
            by_action = transitions.get(s, {})
            acts.append(tuple(by_action))
            rows.append(tuple(tuple((t, _coerce(e)) for t, e in by_action[a].items()) for a in by_action))
        cost_map = {}
        for (s, a), c in (costs or {}).items():
            idx = a if isinstance(a, int) else acts[s].index(a)
            cost_map[(s, idx)] = c
        return cls(num_states, initial, tuple(parameters), tuple(acts), tuple(rows), cost_map, labels or {})

    @property
    def is_pmc(self) -> bool:
        return all(len(a) == 1 for a in self.actions)

    @property
    def has_costs(self) -> bool:
        return bool(self.costs)

    def choices(self) -> Iterator[tuple]:
        """Yield ``(state, action index, row)`` in canonical order."""
        for s, rows in enumerate(self.transitions):
            for a, row in enumerate(rows):
                yield s, a, row

    def cost(self, s: int, a: int) -> Fraction:
        return self.costs.get((s, a), Fraction(0))

    def label_states(self, name: str) -> frozenset:
        return self.labels[name]

    @cached_property
    def compiled(self) -> "CompiledModel":
        return CompiledModel(self)


class Mdp:
    """An instantiated model in choice-matrix form.

    ``matrix`` has one row per (state, action) choice; the choices of state
    ``s`` are rows ``offsets[s]:offsets[s+1]``.
    """

    def __init__(self, matrix, offsets, initial, costs=None, labels=None):
        self.matrix = matrix
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.initial = int(initial)
        self.costs = costs
        self.labels = labels or {}

    @property
    def num_states(self) -> int:
        return len(self.offsets) - 1

    @property
    def num_choices(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def choice_state(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_states), np.diff(self.offsets))

    def probability(self, s: int, a: int, t: int) -> float:
        return float(self.matrix[self.offsets[s] + a, t])

    def successors(self, s: int, a: int) -> list:
        row = self.offsets[s] + a
        lo, hi = self.matrix.indptr[row], self.matrix.indptr[row + 1]
        return list(self.matrix.indices[lo:hi])

    @classmethod
    def from_rows(cls, rows, initial=0, costs=None):
        """``rows[s]`` is a list of ``{succ: prob}`` dicts, one per action."""
        n = len(rows)
        offsets = [0]
        data, indices, indptr = [], [], [0]
        cost_vec = []
        for s, acts in enumerate(rows):
            for a, dist in enumerate(acts):
                for t in sorted(dist):
                    indices.append(t)
                    data.append(float(dist[t]))
                indptr.append(len(data))
                cost_vec.append(0.0 if costs is None else float(costs.get((s, a), 0.0)))
            offsets.append(offsets[-1] + len(acts))
        m = sp.csr_matrix((np.array(data), np.array(indices, dtype=np.int64), np.array(indptr)), shape=(offsets[-1], n))
        return cls(m, offsets, initial, np.array(cost_vec) if costs is not None else None)


class CompiledModel:
    """Float view of a pMDP for repeated instantiation.

    The sparsity pattern is fixed once; instantiation only recomputes the
    data array as ``const + coeffs @ v``, so a model is never rebuilt.
    Duplicate successors within a row are merged exactly; identically-zero
    entries are dropped (they are not edges).
    """

    def __init__(self, model: ParametricMDP):
        self.model = model
        self.param_index = {p: i for i, p in enumerate(model.parameters)}
        offsets = [0]
        indptr = [0]
        indices, exprs, choice_keys = [], [], []
        for s, rows in enumerate(model.transitions):
            for a, row in enumerate(rows):
                merged: dict[int, AffineExpr] = {}
                for t, e in row:
                    merged[t] = merged[t] + e if t in merged else e
                for t in sorted(merged):
                    if merged[t].is_zero:
                        continue
                    indices.append(t)
                    exprs.append(merged[t])
                indptr.append(len(indices))
                choice_keys.append((s, a))
            offsets.append(offsets[-1] + len(rows))
        self.offsets = np.array(offsets, dtype=np.int64)
        self.indptr = np.array(indptr, dtype=np.int64)
        self.indices = np.array(indices, dtype=np.int64)
        self.exprs = exprs
        self.choice_keys = choice_keys
        self.entry_choice = np.repeat(np.arange(len(choice_keys)), np.diff(self.indptr))
        self.const = np.array([float(e.constant) for e in exprs])
        r, c, v = [], [], []
        for k, e in enumerate(exprs):
            for name, coeff in e.coefficients.items():
                if name not in self.param_index:
                    raise UnknownParameter(name)
                r.append(k)
                c.append(self.param_index[name])
                v.append(float(coeff))
        self.coeffs = sp.csr_matrix((v, (r, c)), shape=(len(exprs), len(model.parameters)))
        self.parametric = np.flatnonzero(np.diff(self.coeffs.indptr) > 0)
        n = model.num_states
        self.costs = np.array([float(model.cost(s, a)) for s, a in choice_keys]) if model.has_costs else None
        self.num_states = n

    def vector(self, val) -> np.ndarray:
        """Valuation mapping (or array in parameter order) as a float vector."""
        if isinstance(val, np.ndarray):
            return val.astype(float)
        return valuation_vector(self.model, val)

    def entry_values(self, v) -> np.ndarray:
        v = self.vector(v)
        if self.coeffs.shape[1] == 0:
            return self.const.copy()
        return self.const + self.coeffs @ v

    def mdp(self, v, check=True) -> Mdp:
        vals = self.entry_values(v)
        if check:
            self.check_well_defined(vals)
        m = sp.csr_matrix((vals, self.indices, self.indptr), shape=(len(self.choice_keys), self.num_states))
        return Mdp(m, self.offsets, self.model.initial, self.costs, self.model.labels)

    def check_well_defined(self, vals):
        bad = []
        for k in np.flatnonzero(vals < -NEGATIVE_TOL):
            s, a = self.choice_keys[self.entry_choice[k]]
            bad.append((s, a, int(self.indices[k])))
        sums = np.add.reduceat(vals, self.indptr[:-1]) if len(vals) else np.zeros(len(self.choice_keys))
        empty = np.diff(self.indptr) == 0
        sums = np.where(empty, 0.0, sums)
        for c in np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL):
            s, a = self.choice_keys[c]
            bad.append((s, a, None))
        if bad:
            raise NotWellDefined(bad)

    def graph_violations(self, v, eps: float) -> list:
        vals = self.entry_values(v)
        out = []
        for k in np.flatnonzero(vals < eps):
            s, a = self.choice_keys[self.entry_choice[k]]
            out.append((s, a, int(self.indices[k]), float(vals[k])))
        return out


def valuation_vector(model: ParametricMDP, val: Valuation) -> np.ndarray:
    """Float vector in parameter order; the domain must match exactly."""
    for name in val:
        if name not in model.parameters:
            raise UnknownParameter(name)
    out = np.empty(len(model.parameters))
    for i, name in enumerate(model.parameters):
        if name not in val:
            raise MissingParameter(name)
        out[i] = float(val[name])
    return out


def instantiate(model: ParametricMDP, val: Valuation) -> Mdp:
    """Replace every expression by its value; raise NotWellDefined unless the
    result is an MDP."""
    return model.compiled.mdp(valuation_vector(model, val), check=True)


class GraphPreservation:
    """Truthy iff no structurally present transition falls below eps."""

    def __init__(self, violations):
        self.violations = violations

    def __bool__(self):
        return not self.violations

    def __repr__(self):
        return f"GraphPreservation(ok={not self.violations}, violations={self.violations})"


def check_graph_preserving(model: ParametricMDP, val, eps: float) -> GraphPreservation:
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = val if isinstance(val, np.ndarray) else valuation_vector(model, val)
    return GraphPreservation(model.compiled.graph_violations(v, eps))


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    message: str
    state: int | None = None
    action: int | None = None

    def __str__(self):
        where = ""
        if self.state is not None:
            where = f"state {self.state}"
            if self.action is not None:
                where += f", action {self.action}"
            where += ": "
        return f"{self.severity}: {where}{self.message}"


def validate_model(model: ParametricMDP, eps: float = 1e-6) -> list:
    """Report violations of the pMDP invariants (empty list when clean)."""
    diags: list[Diagnostic] = []
    n = model.num_states
    if not 0 <= model.initial < n:
        diags.append(Diagnostic("error", f"initial state {model.initial} out of range"))
    if len(model.transitions) != n:
        diags.append(Diagnostic("error", f"expected {n} state blocks, found {len(model.transitions)}"))
    used = set()
    for s in range(min(n, len(model.transitions))):
        if not model.transitions[s]:
            diags.append(Diagnostic("error", "A(s) empty", s))
        for a, row in enumerate(model.transitions[s]):
            total = AffineExpr()
            for t, e in row:
                total = total + e
                used |= e.parameters
                if not 0 <= t < n:
                    diags.append(Diagnostic("error", f"dangling successor {t}", s, a))
                if e.is_constant and 0 < e.constant < eps:
                    diags.append(
                        Diagnostic("warning", f"constant probability {e.constant} to {t} is below eps={eps}", s, a)
                    )
                if e.is_constant and e.constant < 0:
                    diags.append(Diagnostic("error", f"negative constant probability to {t}", s, a))
            if total != AffineExpr(1):
                diags.append(Diagnostic("error", f"row sum is {format_affine(total)}, not 1", s, a))
    for name in model.parameters:
        if name not in used:
            diags.append(Diagnostic("warning", f"parameter {name!r} is never referenced"))
    for (s, a), c in model.costs.items():
        if not (0 <= s < n and 0 <= a < len(model.transitions[s])):
            diags.append(Diagnostic("error", f"cost attached to missing choice ({s}, {a})"))
        elif c < 0:
            diags.append(Diagnostic("error", "negative cost", s, a))
    for name, states in model.labels.items():
        for s in states:
            if not 0 <= s < n:
                diags.append(Diagnostic("error", f"label {name!r} refers to missing state {s}"))
    return diags


def validate_spec(spec: Specification, model: ParametricMDP) -> list:
    diags = []
    for t in spec.targets:
        if not 0 <= t < model.num_states:
            diags.append(Diagnostic("error", f"target state {t} out of range"))
    if spec.kind == "cost" and not model.has_costs:
        diags.append(Diagnostic("error", "expected-cost specification on a model without costs"))
    return diags
