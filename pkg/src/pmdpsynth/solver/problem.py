"""Standard-form convex problems.

    minimize    q'x + sum_k w_k (x_{i_k} + s_k x_{j_k})^2 + offset
    subject to  lower_r <= A_r x + sum_{atoms of r} w (x_i + s x_j)^2 <= upper_r
                var_lower <= x <= var_upper

Quadratic parts are lists of *atoms* ``(weight, i, j, sign)`` with
``weight >= 0``; ``j = -1`` denotes the single square ``weight * x_i^2``.
Writing quadratics this way makes convexity a syntactic property.  Rows that
carry atoms must have ``lower = -inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class Atoms:
    """Parallel arrays describing ``weight * (x_i + sign * x_j)^2`` terms."""

    weight: np.ndarray
    i: np.ndarray
    j: np.ndarray
    sign: np.ndarray
    row: np.ndarray | None = None  # owning constraint row (row atoms only)

    @classmethod
    def empty(cls, with_rows=False) -> "Atoms":
        z = np.zeros(0)
        zi = np.zeros(0, dtype=np.int64)
        return cls(z, zi, zi.copy(), z.copy(), zi.copy() if with_rows else None)

    @classmethod
    def from_list(cls, items, with_rows=False) -> "Atoms":
        """``items``: tuples ``(weight, i, j, sign)`` or, for row atoms,
        ``(row, weight, i, j, sign)``."""
        if not items:
            return cls.empty(with_rows)
        arr = list(zip(*items))
        if with_rows:
            row, w, i, j, s = arr
            return cls(np.array(w, float), np.array(i, np.int64), np.array(j, np.int64), np.array(s, float),
                       np.array(row, np.int64))
        w, i, j, s = arr
        return cls(np.array(w, float), np.array(i, np.int64), np.array(j, np.int64), np.array(s, float))

    def __len__(self):
        return len(self.weight)

    def linear_form(self, x) -> np.ndarray:
        """Per-atom value of ``x_i + sign * x_j``."""
        x = np.asarray(x, dtype=float)
        u = x[self.i].copy()
        pair = self.j >= 0
        u[pair] += self.sign[pair] * x[self.j[pair]]
        return u

    def values(self, x) -> np.ndarray:
        u = self.linear_form(x)
        return self.weight * u * u

    def gradient_matrix(self, x, n) -> sp.csr_matrix:
        """Row k holds the gradient of atom k."""
        u = self.linear_form(x)
        pair = self.j >= 0
        k = np.arange(len(self))
        rows = np.concatenate([k, k[pair]])
        cols = np.concatenate([self.i, self.j[pair]])
        vals = np.concatenate([2 * self.weight * u, 2 * self.weight[pair] * u[pair] * self.sign[pair]])
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(self), n))

    def hessian(self, n, scale=None) -> sp.csc_matrix:
        """Sum of ``2 w v v'`` (times ``scale`` per atom) as an n-by-n matrix."""
        w = 2 * self.weight * (1.0 if scale is None else scale)
        pair = self.j >= 0
        r = [self.i, self.j[pair], self.i[pair], self.j[pair]]
        c = [self.i, self.j[pair], self.j[pair], self.i[pair]]
        v = [w, w[pair], w[pair] * self.sign[pair], w[pair] * self.sign[pair]]
        return sp.csc_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(n, n))

    def copy(self) -> "Atoms":
        return Atoms(self.weight.copy(), self.i.copy(), self.j.copy(), self.sign.copy(),
                     None if self.row is None else self.row.copy())


@dataclass
class ConvexProblem:
    q: np.ndarray
    A: sp.csr_matrix
    lower: np.ndarray
    upper: np.ndarray
    var_lower: np.ndarray
    var_upper: np.ndarray
    obj_atoms: Atoms = field(default_factory=Atoms.empty)
    row_atoms: Atoms = field(default_factory=lambda: Atoms.empty(True))
    offset: float = 0.0
    names: list | None = None  # optional variable names, debugging only

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        n = len(self.q)
        if self.A is None:
            self.A = sp.csr_matrix((0, n))
        self.A = sp.csr_matrix(self.A)
        m = self.A.shape[0]
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (m,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (m,)).copy()
        self.var_lower = np.broadcast_to(np.asarray(self.var_lower, dtype=float), (n,)).copy()
        self.var_upper = np.broadcast_to(np.asarray(self.var_upper, dtype=float), (n,)).copy()
        if self.row_atoms.row is None:
            raise ValueError("row atoms need owning rows")
        self.validate()

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def is_lp(self) -> bool:
        return len(self.obj_atoms) == 0 and len(self.row_atoms) == 0

    def validate(self):
        n, m = self.n, self.m
        if self.A.shape[1] != n:
            raise ValueError("constraint matrix has wrong column count")
        if np.any(self.lower > self.upper) or np.any(self.var_lower > self.var_upper):
            raise ValueError("lower bound exceeds upper bound")
        for atoms, name in ((self.obj_atoms, "objective"), (self.row_atoms, "row")):
            if len(atoms) == 0:
                continue
            if np.any(atoms.weight < 0):
                raise ValueError(f"{name} atom with negative weight")
            if np.any(atoms.i < 0) or np.any(atoms.i >= n) or np.any(atoms.j >= n):
                raise ValueError(f"{name} atom index out of range")
        if len(self.row_atoms):
            rows = self.row_atoms.row
            if np.any(rows < 0) or np.any(rows >= m):
                raise ValueError("row atom refers to a missing row")
            if np.any(np.isfinite(self.lower[rows])):
                raise ValueError("rows with quadratic atoms must be upper-bounded only")

    # -- evaluation --------------------------------------------------------

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.q @ x + self.obj_atoms.values(x).sum() + self.offset)

    def objective_gradient(self, x) -> np.ndarray:
        g = self.q.copy()
        if len(self.obj_atoms):
            g += self.obj_atoms.gradient_matrix(x, self.n).T @ np.ones(len(self.obj_atoms))
        return g

    def row_values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = self.A @ x
        if len(self.row_atoms):
            np.add.at(g, self.row_atoms.row, self.row_atoms.values(x))
        return g

    def row_jacobian(self, x) -> sp.csr_matrix:
        if not len(self.row_atoms):
            return self.A
        grads = self.row_atoms.gradient_matrix(x, self.n)
        owner = sp.csr_matrix(
            (np.ones(len(self.row_atoms)), (self.row_atoms.row, np.arange(len(self.row_atoms)))),
            shape=(self.m, len(self.row_atoms)),
        )
        return (self.A + owner @ grads).tocsr()

    def copy(self) -> "ConvexProblem":
        return ConvexProblem(
            self.q.copy(), self.A.copy(), self.lower.copy(), self.upper.copy(), self.var_lower.copy(),
            self.var_upper.copy(), self.obj_atoms.copy(), self.row_atoms.copy(), self.offset,
            None if self.names is None else list(self.names),
        )


def residuals(problem: ConvexProblem, x, y=None) -> tuple[float, float]:
    """Infinity-norm KKT residuals ``(primal, dual)`` at ``x`` with duals ``y``.

    The dual residual covers stationarity of the Lagrangian and
    complementary slackness.  ``y`` lists row multipliers followed by variable-bound multipliers
    (missing trailing entries count as zero).  Negative multipliers belong to
    active lower bounds, positive ones to upper bounds.
    """
    x = np.asarray(x, dtype=float)
    n, m = problem.n, problem.m
    yy = np.zeros(m + n)
    if y is not None:
        y = np.asarray(y, dtype=float)
        yy[: len(y)] = y
    g = problem.row_values(x)
    viol = [np.zeros(1)]
    if m:
        viol.append(np.maximum(problem.lower - g, 0.0))
        viol.append(np.maximum(g - problem.upper, 0.0))
    viol.append(np.maximum(problem.var_lower - x, 0.0))
    viol.append(np.maximum(x - problem.var_upper, 0.0))
    primal = float(max(np.max(v) for v in viol))
    grad = problem.objective_gradient(x) + yy[m:]
    if m:
        grad += problem.row_jacobian(x).T @ yy[:m]
    dual = float(np.max(np.abs(grad))) if n else 0.0
    comp = _complementarity(yy[m:], x, problem.var_lower, problem.var_upper)
    if m:
        comp = max(comp, _complementarity(yy[:m], g, problem.lower, problem.upper))
    return primal, max(dual, comp)


def _complementarity(mult, val, lo, hi) -> float:
    """Largest ``|multiplier| * distance to its bound``; a multiplier
    attached to an infinite bound counts in full."""
    if not len(mult):
        return 0.0
    with np.errstate(invalid="ignore"):
        gap_lo = np.where(np.isfinite(lo), np.abs(val - lo), 1.0)
        gap_hi = np.where(np.isfinite(hi), np.abs(hi - val), 1.0)
    return float(max(np.max(np.maximum(-mult, 0.0) * gap_lo), np.max(np.maximum(mult, 0.0) * gap_hi)))


# -- plain-text dump ---------------------------------------------------------


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def dump_problem(problem: ConvexProblem) -> str:
    """Plain-text standard form; ``load_problem`` reads it back exactly."""
    a = problem.A.tocoo()
    out = [
        "convex-problem 1",
        f"variables {problem.n}",
        f"rows {problem.m}",
        f"offset {_num(problem.offset)}",
        "linear-objective",
    ]
    out += [f"{i} {_num(v)}" for i, v in enumerate(problem.q) if v != 0]
    out.append("objective-atoms")
    at = problem.obj_atoms
    out += [f"{_num(w)} {i} {j} {_num(s)}" for w, i, j, s in zip(at.weight, at.i, at.j, at.sign)]
    out.append("constraint-triplets")
    order = np.lexsort((a.col, a.row))
    out += [f"{a.row[k]} {a.col[k]} {_num(a.data[k])}" for k in order]
    out.append("row-atoms")
    ra = problem.row_atoms
    out += [f"{r} {_num(w)} {i} {j} {_num(s)}" for r, w, i, j, s in zip(ra.row, ra.weight, ra.i, ra.j, ra.sign)]
    out.append("row-bounds")
    out += [f"{r} {_num(lo)} {_num(hi)}" for r, (lo, hi) in enumerate(zip(problem.lower, problem.upper))]
    out.append("variable-bounds")
    out += [f"{i} {_num(lo)} {_num(hi)}" for i, (lo, hi) in enumerate(zip(problem.var_lower, problem.var_upper))]
    out.append("end")
    return "\n".join(out) + "\n"


def load_problem(text: str) -> ConvexProblem:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "convex-problem 1":
        raise ValueError("not a convex-problem dump")
    n = int(lines[1].split()[1])
    m = int(lines[2].split()[1])
    offset = float(lines[3].split()[1])
    sections: dict[str, list] = {}
    current = None
    for ln in lines[4:]:
        if ln[0].isalpha() and ln not in ("inf",):
            current = ln
            sections[current] = []
        else:
            sections[current].append(ln.split())
    q = np.zeros(n)
    for i, v in sections["linear-objective"]:
        q[int(i)] = float(v)
    obj = Atoms.from_list([(float(w), int(i), int(j), float(s)) for w, i, j, s in sections["objective-atoms"]])
    trip = sections["constraint-triplets"]
    a = sp.csr_matrix(
        ([float(t[2]) for t in trip], ([int(t[0]) for t in trip], [int(t[1]) for t in trip])), shape=(m, n)
    )
    rows = Atoms.from_list(
        [(int(r), float(w), int(i), int(j), float(s)) for r, w, i, j, s in sections["row-atoms"]], with_rows=True
    )
    lower, upper = np.zeros(m), np.zeros(m)
    for r, lo, hi in sections["row-bounds"]:
        lower[int(r)], upper[int(r)] = float(lo), float(hi)
    vl, vu = np.zeros(n), np.zeros(n)
    for i, lo, hi in sections["variable-bounds"]:
        vl[int(i)], vu[int(i)] = float(lo), float(hi)
    return ConvexProblem(q, a, lower, upper, vl, vu, obj, rows, offset)
