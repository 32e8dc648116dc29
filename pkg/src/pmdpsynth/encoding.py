"""The nonconvex QCQP encoding of a synthesis problem and its convex
approximations.

Variables of the QCQP are the parameters followed by one probability (or
expected-cost) variable per remaining state.  Each Bellman row is kept in the
normalized form

    sigma * (sum P(s,a,s') p_s' + c(s,a) - p_s) <= 0

with ``sigma = +1`` for upper-bound specifications and ``-1`` for lower
bounds, so both directions share one code path.  The convex problems append
penalty variables (one per probability variable; a single shared slack for
the regularized variant).

Convex problems carry a private template that knows where each
anchor-dependent coefficient lives; ``update_anchor`` rewrites exactly those
entries using the same arithmetic as a fresh build, so the two are
bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ShapeMismatch
from .graph import ReducedIndexing, simplify_for_encoding
from .model import AffineExpr, ParametricMDP, Specification
from .solver import Atoms, ConvexProblem, dump_problem

DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class BilinearTerm:
    """``coeff * y * z`` inside the row of choice ``row``.

    ``affine_part`` is the constant ``c`` of the transition ``coeff*y + c``
    (set on the first term of a transition only; rows keep the authoritative
    ``c * z`` contributions in ``prob_linear``).
    """

    row: tuple
    prob_var: int
    param_var: int
    coeff: float
    affine_part: float = 0.0


@dataclass(frozen=True)
class ParametricEntry:
    """A parametric transition ``const + sum coeffs[i] * v_i``."""

    choice: tuple
    successor: int
    const: float
    params: tuple
    coeffs: tuple

    def value(self, v) -> float:
        return self.const + float(sum(c * v[i] for i, c in zip(self.params, self.coeffs)))


@dataclass
class BellmanRow:
    state: int
    action: int
    var: int  # probability variable of ``state``
    terms: tuple
    prob_linear: dict  # prob var -> c
    param_linear: dict  # param -> coefficient times a constant successor value
    constant: float  # constant successor contributions plus the action cost
    entries: tuple  # ParametricEntry of this choice

    def rhs(self, v, p) -> float:
        """``sum P p' + c`` at parameters ``v`` and probabilities ``p``."""
        out = self.constant
        out += sum(c * p[z] for z, c in self.prob_linear.items())
        out += sum(c * v[y] for y, c in self.param_linear.items())
        out += sum(t.coeff * v[t.param_var] * p[t.prob_var] for t in self.terms)
        return out


@dataclass(frozen=True)
class Anchor:
    param_values: np.ndarray
    prob_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "param_values", np.asarray(self.param_values, dtype=float))
        object.__setattr__(self, "prob_values", np.asarray(self.prob_values, dtype=float))


@dataclass
class QcqpEncoding:
    model: ParametricMDP
    spec: Specification
    eps: float
    indexing: ReducedIndexing
    param_names: tuple
    param_lower: np.ndarray
    param_upper: np.ndarray
    prob_states: tuple
    rows: list
    wd_rows: list  # (params, coeffs, const): const + coeffs . v >= eps
    initial_var: int | None
    prob_upper: float
    entries: list = field(default_factory=list)

    @property
    def sigma(self) -> int:
        return self.spec.sense

    @property
    def threshold(self) -> float:
        return self.spec.threshold

    @property
    def num_params(self) -> int:
        return len(self.param_names)

    @property
    def num_probs(self) -> int:
        return len(self.prob_states)

    @property
    def num_vars(self) -> int:
        return self.num_params + self.num_probs

    @property
    def terms(self) -> list:
        return [t for r in self.rows for t in r.terms]

    @property
    def coupled(self) -> bool:
        """Whether well-definedness needs constraints beyond a box."""
        return bool(self.wd_rows)

    def variable_names(self) -> list:
        return list(self.param_names) + [f"p[{s}]" for s in self.prob_states]

    def prob_col(self, z: int) -> int:
        return self.num_params + z

    def residuals(self, v, p) -> np.ndarray:
        """Per-row value of ``sigma * (rhs - p_s)``; feasible rows are <= 0."""
        return np.array([self.sigma * (r.rhs(v, p) - p[r.var]) for r in self.rows])

    def feasible(self, v, p, tol=1e-9) -> bool:
        if np.any(v < self.param_lower - tol) or np.any(v > self.param_upper + tol):
            return False
        if np.any(p < -tol) or np.any(p > self.prob_upper + tol):
            return False
        for params, coeffs, const in self.wd_rows:
            if const + sum(c * v[i] for i, c in zip(params, coeffs)) < self.eps - tol:
                return False
        if self.initial_var is not None and not self.spec.holds(p[self.initial_var], tol):
            return False
        return bool(np.all(self.residuals(v, p) <= tol))

    def prob_vector(self, per_state) -> np.ndarray:
        """Restrict a per-state vector to the probability variables."""
        return np.asarray(per_state, dtype=float)[list(self.prob_states)]

    def center(self) -> np.ndarray:
        return parameter_center(self)

    def project_params(self, v) -> np.ndarray:
        """Clip into the box and pull towards the center until every
        well-definedness row holds."""
        v = np.clip(np.asarray(v, dtype=float), self.param_lower, self.param_upper)
        if not self.wd_rows or self._wd_ok(v):
            return v
        c = self.center()
        lo, hi = 0.0, 1.0  # fraction of the way to the center
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self._wd_ok(v + mid * (c - v)):
                hi = mid
            else:
                lo = mid
        return v + hi * (c - v)

    def _wd_ok(self, v) -> bool:
        return all(const + sum(c * v[i] for i, c in zip(ps, cs)) >= self.eps for ps, cs, const in self.wd_rows)


def _row_sign_split(expr: AffineExpr, pindex):
    params = tuple(pindex[name] for name in expr.coefficients)
    coeffs = tuple(float(c) for c in expr.coefficients.values())
    return params, coeffs


def build_qcqp(model: ParametricMDP, spec: Specification, indexing: ReducedIndexing | None = None,
               eps: float = DEFAULT_EPS) -> QcqpEncoding:
    """Encode the synthesis problem; states fixed by graph analysis become
    constants.  Raises InfeasibleTrivially (from the simplification) when the
    initial state's fixed value violates the threshold."""
    if indexing is None:
        indexing = simplify_for_encoding(model, spec)
    cm = model.compiled
    pindex = cm.param_index
    var_of = indexing.var_of_state
    constants = indexing.constants
    prob_upper = 1.0 if spec.kind == "reach" else np.inf

    rows, entries_all = [], []
    singles: list = []
    multis: dict = {}
    for c, (s, a) in enumerate(cm.choice_keys):
        if s not in var_of or (s, a) in indexing.excluded_choices:
            continue
        terms, prob_linear, param_linear, entries = [], {}, {}, []
        constant = float(cm.costs[c]) if (spec.kind == "cost" and cm.costs is not None) else 0.0
        for k in range(cm.indptr[c], cm.indptr[c + 1]):
            t = int(cm.indices[k])
            e = cm.exprs[k]
            c0 = float(e.constant)
            params, coeffs = _row_sign_split(e, pindex)
            if params:
                entry = ParametricEntry((s, a), t, c0, params, coeffs)
                entries.append(entry)
                if len(params) == 1:
                    singles.append((params[0], coeffs[0], c0))
                else:
                    key = (params, coeffs, c0)
                    multis.setdefault(key, key)
            if t in var_of:
                z = var_of[t]
                if c0 != 0.0:
                    prob_linear[z] = prob_linear.get(z, 0.0) + c0
                for n, (y, coeff) in enumerate(zip(params, coeffs)):
                    terms.append(BilinearTerm((s, a), z, y, coeff, c0 if n == 0 else 0.0))
            else:
                value = constants[t]
                if value != 0.0:
                    constant += c0 * value
                    for y, coeff in zip(params, coeffs):
                        param_linear[y] = param_linear.get(y, 0.0) + coeff * value
        rows.append(BellmanRow(s, a, var_of[s], tuple(terms), prob_linear, param_linear, constant, tuple(entries)))
        entries_all.extend(entries)

    # parameter box from single-parameter expressions, which must stay >= eps
    n = len(model.parameters)
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    for y, coeff, c0 in singles:
        bound = (eps - c0) / coeff
        if coeff > 0:
            lower[y] = max(lower[y], bound)
        else:
            upper[y] = min(upper[y], bound)
    # expressions outside the encoded rows still constrain well-definedness
    for k, e in enumerate(cm.exprs):
        params, coeffs = _row_sign_split(e, pindex)
        if len(params) == 1:
            y, coeff, c0 = params[0], coeffs[0], float(e.constant)
            bound = (eps - c0) / coeff
            if coeff > 0:
                lower[y] = max(lower[y], bound)
            else:
                upper[y] = min(upper[y], bound)
        elif len(params) > 1:
            key = (params, coeffs, float(e.constant))
            multis.setdefault(key, key)
    # rounding in (eps - c0) / coeff may land just outside; step inwards
    for e in cm.exprs:
        params, coeffs = _row_sign_split(e, pindex)
        if len(params) == 1:
            y, coeff, c0 = params[0], coeffs[0], float(e.constant)
            side = lower if coeff > 0 else upper
            inward = np.inf if coeff > 0 else -np.inf
            while np.isfinite(side[y]) and c0 + coeff * side[y] < eps:
                side[y] = np.nextafter(side[y], inward)
    # parameters no expression mentions do not matter; pin them
    used = {pindex[name] for e in cm.exprs for name in e.coefficients}
    for y in range(len(model.parameters)):
        if y not in used:
            lower[y] = upper[y] = 0.0
    wd_rows = []
    for params, coeffs, c0 in multis.values():
        worst = c0 + sum(min(c * lower[i], c * upper[i]) for i, c in zip(params, coeffs))
        if not worst >= eps:  # also catches nan from unbounded parameters
            wd_rows.append((params, coeffs, c0))

    enc = QcqpEncoding(
        model=model,
        spec=spec,
        eps=eps,
        indexing=indexing,
        param_names=tuple(model.parameters),
        param_lower=lower,
        param_upper=upper,
        prob_states=indexing.states,
        rows=rows,
        wd_rows=wd_rows,
        initial_var=var_of.get(model.initial),
        prob_upper=prob_upper,
        entries=entries_all,
    )
    if wd_rows and not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        _bound_by_lp(enc)
    return enc


def _wd_problem(enc: QcqpEncoding, objective) -> ConvexProblem:
    n = enc.num_params
    r, c, v = [], [], []
    lo = []
    for k, (params, coeffs, const) in enumerate(enc.wd_rows):
        r += [k] * len(params)
        c += list(params)
        v += list(coeffs)
        lo.append(enc.eps - const)
    a = sp.csr_matrix((v, (r, c)), shape=(len(enc.wd_rows), n))
    return ConvexProblem(objective, a, np.array(lo), np.full(len(lo), np.inf), enc.param_lower, enc.param_upper)


def _bound_by_lp(enc: QcqpEncoding):
    """Tighten infinite parameter bounds using the well-definedness rows."""
    from .solver import solve

    for i in range(enc.num_params):
        for sign in (1.0, -1.0):
            bound = enc.param_lower[i] if sign > 0 else enc.param_upper[i]
            if np.isfinite(bound):
                continue
            q = np.zeros(enc.num_params)
            q[i] = sign
            rep = solve(_wd_problem(enc, q), max_iter=20000)
            value = rep.primal[i] if rep.optimal else (-1e3 if sign > 0 else 1e3)
            if sign > 0:
                enc.param_lower[i] = value
            else:
                enc.param_upper[i] = value


def parameter_center(enc: QcqpEncoding) -> np.ndarray:
    """Box center, or (with coupled parameters) the mean of the 2|V|
    extreme points minimizing and maximizing each parameter."""
    if not enc.coupled:
        return 0.5 * (enc.param_lower + enc.param_upper)
    from .solver import solve

    pts = []
    for i in range(enc.num_params):
        for sign in (1.0, -1.0):
            q = np.zeros(enc.num_params)
            q[i] = sign
            rep = solve(_wd_problem(enc, q), max_iter=20000)
            pts.append(rep.primal)
    return np.mean(pts, axis=0)


# -- difference-of-convex split ---------------------------------------------


@dataclass(frozen=True)
class DcParts:
    """``coeff*y*z + c*z = d_abs*(y + sign*z)^2 - d_abs*(y^2 + z^2) + c*z``."""

    d_abs: float
    sign: float
    affine: float

    def convex(self, y, z):
        return self.d_abs * (y + self.sign * z) ** 2

    def concave(self, y, z):
        return -self.d_abs * (y * y + z * z)

    def affine_value(self, z):
        return self.affine * z

    def value(self, y, z):
        return self.convex(y, z) + self.concave(y, z) + self.affine_value(z)

    def concave_linearization(self, y, z, y0, z0):
        """First-order expansion of the concave part at ``(y0, z0)``; an
        upper bound on it everywhere."""
        return self.d_abs * (y0 * y0 + z0 * z0) - 2 * self.d_abs * (y * y0 + z * z0)


def dc_decompose(term: BilinearTerm, scale: float = 1.0) -> DcParts:
    """Split ``scale*coeff*y*z`` (+ the term's affine part) into convex and
    concave quadratics."""
    b = scale * term.coeff
    if b == 0:
        raise ValueError("bilinear term with zero coefficient")
    return DcParts(abs(b) / 2, 1.0 if b > 0 else -1.0, scale * term.affine_part)


# -- convex problems ---------------------------------------------------------


class _Template:
    """Fixed structure of a convex approximation plus the recipe for its
    anchor-dependent numbers."""

    def __init__(self, enc: QcqpEncoding, mode: str):
        self.enc = enc
        self.mode = mode
        npar, npr = enc.num_params, enc.num_probs
        self.npar, self.npr = npar, npr
        if mode == "reg":
            self.nvar = npar + npr + 1
        else:
            self.nvar = npar + 2 * npr
        sigma = float(enc.sigma)
        self.sigma = sigma

        # bilinear terms
        terms = enc.terms
        row_of = {}
        for i, r in enumerate(enc.rows):
            row_of[(r.state, r.action)] = i
        self.t_row = np.array([row_of[t.row] for t in terms], dtype=np.int64)
        self.t_y = np.array([t.param_var for t in terms], dtype=np.int64)
        self.t_z = np.array([t.prob_var for t in terms], dtype=np.int64)
        self.t_b = np.array([sigma * t.coeff for t in terms])

        # anchor-independent linear entries of the Bellman rows
        lr, lc, lv = [], [], []
        const = np.zeros(len(enc.rows))
        for i, r in enumerate(enc.rows):
            for z, c in r.prob_linear.items():
                lr.append(i), lc.append(npar + z), lv.append(sigma * c)
            for y, c in r.param_linear.items():
                lr.append(i), lc.append(y), lv.append(sigma * c)
            lr.append(i), lc.append(npar + r.var), lv.append(-sigma)
            lr.append(i), lc.append(npar + npr + (0 if mode == "reg" else r.var)), lv.append(-1.0)
            const[i] = sigma * r.constant
        self.l_row = np.array(lr, dtype=np.int64)
        self.l_col = np.array(lc, dtype=np.int64)
        self.l_val = np.array(lv, dtype=float)
        self.row_const = const
        nb = len(enc.rows)

        # further rows: threshold, well-definedness, trust regions
        extra_r, extra_c, extra_v = [], [], []
        self.threshold_row = None
        next_row = nb
        if enc.initial_var is not None and mode != "reg":
            self.threshold_row = next_row
            extra_r.append(next_row), extra_c.append(npar + enc.initial_var), extra_v.append(1.0)
            next_row += 1
        self.wd_start = next_row
        for params, coeffs, _ in enc.wd_rows:
            for y, c in zip(params, coeffs):
                extra_r.append(next_row), extra_c.append(y), extra_v.append(c)
            next_row += 1
        self.tr_prob_start = next_row
        self.tr_entries = enc.entries if mode == "scp" else []
        if mode == "scp":
            for z in range(npr):
                extra_r.append(next_row), extra_c.append(npar + z), extra_v.append(1.0)
                next_row += 1
            self.tr_entry_start = next_row
            for e in self.tr_entries:
                for y, c in zip(e.params, e.coeffs):
                    extra_r.append(next_row), extra_c.append(y), extra_v.append(c)
                next_row += 1
        self.nrows = next_row
        self.e_row = np.array(extra_r, dtype=np.int64)
        self.e_col = np.array(extra_c, dtype=np.int64)
        self.e_val = np.array(extra_v, dtype=float)

        # sparsity pattern: static entries, then anchor-dependent ones
        dyn_r = np.concatenate([self.t_row, self.t_row])
        dyn_c = np.concatenate([self.t_y, npar + self.t_z])
        rows = np.concatenate([self.l_row, self.e_row, dyn_r])
        cols = np.concatenate([self.l_col, self.e_col, dyn_c])
        keys = rows * self.nvar + cols
        uniq, inv = np.unique(keys, return_inverse=True)
        self.slot = inv
        r_u = uniq // self.nvar
        self.indices = (uniq % self.nvar).astype(np.int64)
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(r_u, minlength=self.nrows))]).astype(np.int64)
        self.nnz = len(uniq)
        self.tau = None
        self.delta = None
        self.beta = None
        self.mu = None
        self.mu_prime = None
        self.anchor = None

    def check_anchor(self, anchor: Anchor):
        if anchor.param_values.shape != (self.npar,) or anchor.prob_values.shape != (self.npr,):
            raise ShapeMismatch(
                f"anchor has shapes {anchor.param_values.shape}/{anchor.prob_values.shape}, "
                f"expected ({self.npar},)/({self.npr},)"
            )

    def fill(self, anchor: Anchor):
        """All numeric arrays of the problem at ``anchor``."""
        enc = self.enc
        npar, npr = self.npar, self.npr
        yh = anchor.param_values[self.t_y]
        zh = anchor.prob_values[self.t_z]
        b = self.t_b
        upper = np.empty(self.nrows)
        lower = np.full(self.nrows, -np.inf)
        shift = np.zeros(len(enc.rows))
        if self.mode == "ccp":
            w = 0.5 * np.abs(b)
            dyn = np.concatenate([-2 * w * yh, -2 * w * zh])
            np.add.at(shift, self.t_row, w * (yh * yh + zh * zh))
            atoms = Atoms(w.copy(), self.t_y.copy(), npar + self.t_z, np.where(b > 0, 1.0, -1.0), self.t_row.copy())
        else:
            dyn = np.concatenate([b * zh, b * yh])
            np.add.at(shift, self.t_row, -b * yh * zh)
            atoms = Atoms.empty(True)
        vals = np.concatenate([self.l_val, self.e_val, dyn])
        data = np.zeros(self.nnz)
        np.add.at(data, self.slot, vals)
        nb = len(enc.rows)
        upper[:nb] = -(self.row_const + shift)

        if self.threshold_row is not None:
            if enc.sigma > 0:
                lower[self.threshold_row], upper[self.threshold_row] = -np.inf, enc.threshold
            else:
                lower[self.threshold_row], upper[self.threshold_row] = enc.threshold, np.inf
        for k, (_, _, const) in enumerate(enc.wd_rows):
            lower[self.wd_start + k] = enc.eps - const
            upper[self.wd_start + k] = np.inf

        var_lower = np.concatenate([enc.param_lower, np.zeros(npr), np.zeros(self.nvar - npar - npr)])
        var_upper = np.concatenate([enc.param_upper, np.full(npr, enc.prob_upper),
                                    np.full(self.nvar - npar - npr, np.inf)])
        q = np.zeros(self.nvar)
        obj_atoms = Atoms.empty()
        offset = 0.0
        if enc.initial_var is not None:
            q[npar + enc.initial_var] = enc.sigma
        if self.mode in ("ccp", "scp"):
            q[npar + npr:] = self.tau
        if self.mode == "scp":
            dp = self.delta + 1.0
            ph = np.maximum(anchor.prob_values, enc.eps)
            s = self.tr_prob_start
            lower[s:s + npr] = ph / dp
            upper[s:s + npr] = ph * dp
            s = self.tr_entry_start
            for k, e in enumerate(self.tr_entries):
                ph_e = max(e.value(anchor.param_values), enc.eps)
                lower[s + k] = ph_e / dp - e.const
                upper[s + k] = ph_e * dp - e.const
            if self.threshold_row is not None:
                # a hard threshold outside the trust region would make every step infeasible
                lo_tr = lower[self.tr_prob_start + enc.initial_var]
                hi_tr = upper[self.tr_prob_start + enc.initial_var]
                if enc.sigma > 0 and enc.threshold < lo_tr:
                    upper[self.threshold_row] = np.inf
                if enc.sigma < 0 and enc.threshold > hi_tr:
                    lower[self.threshold_row] = -np.inf
        if self.mode == "reg":
            q[npar + npr] = self.beta
            weight = 0.5 * (self.mu + self.beta * self.mu_prime)
            xl = np.concatenate([anchor.param_values, anchor.prob_values])
            idx = np.arange(npar + npr)
            obj_atoms = Atoms(np.full(npar + npr, weight), idx, np.full(npar + npr, -1, dtype=np.int64),
                              np.ones(npar + npr))
            q[: npar + npr] += -2 * weight * xl
            offset = float(weight * (xl @ xl))
        return q, data, lower, upper, var_lower, var_upper, atoms, obj_atoms, offset

    def build(self, anchor: Anchor) -> ConvexProblem:
        q, data, lower, upper, vl, vu, atoms, obj_atoms, offset = self.fill(anchor)
        a = sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.nrows, self.nvar))
        prob = ConvexProblem(q, a, lower, upper, vl, vu, obj_atoms, atoms, offset)
        prob.template = self
        self.anchor = anchor
        return prob

    def refill(self, prob: ConvexProblem, anchor: Anchor):
        q, data, lower, upper, vl, vu, atoms, obj_atoms, offset = self.fill(anchor)
        prob.q[:] = q
        prob.A.data[:] = data
        prob.lower[:] = lower
        prob.upper[:] = upper
        prob.var_lower[:] = vl
        prob.var_upper[:] = vu
        prob.row_atoms = atoms
        prob.obj_atoms = obj_atoms
        prob.offset = offset
        self.anchor = anchor


def convexify_ccp(enc: QcqpEncoding, anchor: Anchor, tau: float) -> ConvexProblem:
    """Penalized convex QP: concave parts linearized at ``anchor``, one
    nonnegative penalty per probability variable, objective
    ``sigma * p_init + tau * sum k``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    tpl = _Template(enc, "ccp")
    tpl.check_anchor(anchor)
    tpl.tau = float(tau)
    return tpl.build(anchor)


def linearize_scp(enc: QcqpEncoding, anchor: Anchor, tau: float, delta: float) -> ConvexProblem:
    """Trust-region LP: bilinear terms replaced by their first-order
    expansion at ``anchor``; probabilities and parametric transitions kept
    within a factor ``delta + 1`` of their anchor values."""
    if tau <= 0 or delta <= 0:
        raise ValueError("tau and delta must be positive")
    tpl = _Template(enc, "scp")
    tpl.check_anchor(anchor)
    tpl.tau, tpl.delta = float(tau), float(delta)
    return tpl.build(anchor)


def regularized_scp_problem(enc: QcqpEncoding, anchor: Anchor, beta: float, mu: float, mu_prime: float) -> ConvexProblem:
    """Linearized rows sharing one slack ``k >= 0``; objective
    ``sigma*p_init + beta*k + ((mu + beta*mu')/2) * |x - anchor|^2``; no
    threshold row."""
    tpl = _Template(enc, "reg")
    tpl.check_anchor(anchor)
    tpl.beta, tpl.mu, tpl.mu_prime = float(beta), float(mu), float(mu_prime)
    return tpl.build(anchor)


def update_anchor(problem: ConvexProblem, enc: QcqpEncoding, new_anchor: Anchor, tau: float | None = None,
                  delta: float | None = None, beta: float | None = None) -> None:
    """Refresh the anchor-dependent numbers of ``problem`` in place."""
    tpl = getattr(problem, "template", None)
    if tpl is None or tpl.enc is not enc:
        raise ValueError("problem was not built from this encoding")
    tpl.check_anchor(new_anchor)
    if tau is not None:
        tpl.tau = float(tau)
    if delta is not None:
        tpl.delta = float(delta)
    if beta is not None:
        tpl.beta = float(beta)
    tpl.refill(problem, new_anchor)


def split_solution(enc: QcqpEncoding, x) -> tuple:
    """``(params, probs, penalties)`` views of a convex-problem solution."""
    x = np.asarray(x, dtype=float)
    a, b = enc.num_params, enc.num_params + enc.num_probs
    return x[:a], x[a:b], x[b:]


def debug_dump(problem: ConvexProblem) -> str:
    """Plain-text standard form for cross-checking with external solvers."""
    return dump_problem(problem)
