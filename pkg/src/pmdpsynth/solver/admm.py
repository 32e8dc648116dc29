"""Operator-splitting (ADMM) solver with active-set polishing.

Quadratic constraint atoms are lifted: atom ``w (x_i + s x_j)^2`` of row r
gets an epigraph variable ``t``, the row uses ``t`` linearly, and the pair
``(x_i + s x_j, t)`` is constrained to the parabola set ``{t >= w u^2}``.
The iteration is the usual splitting

    x~ = argmin 1/2 x'Px + q'x + sigma/2 |x - x_k|^2 + rho/2 |Ax - z_k + y_k/rho|^2
    z  = Proj_C(alpha A x~ + (1 - alpha) z_k + y_k / rho)

on a Ruiz-equilibrated copy of the lifted problem.  Because first-order
iterates stall around 1e-5 accuracy, the solver periodically guesses the
active set and solves the resulting KKT system (Newton steps for active
parabolas); a polished point is accepted once it meets the tolerances.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import LinAlgWarning
from scipy.linalg import lu_factor as scipy_lu_factor
from scipy.linalg import lu_solve as scipy_lu_solve
from scipy.linalg import qr as scipy_qr
from scipy.optimize import nnls as scipy_nnls

from .ipm import interior_point
from .problem import ConvexProblem, residuals

OPTIMAL = "Optimal"
PRIMAL_INFEASIBLE = "PrimalInfeasible"
MAX_ITERATIONS = "MaxIterations"

_RHO_MIN, _RHO_MAX = 1e-6, 1e6
_EQ_FACTOR = 1e3
_SIGMA = 1e-6
_ALPHA = 1.6
DENSE_KKT = 400  # KKT systems up to this size are factored densely
IPM_SWITCH = 2000  # splitting iterations before the interior-point fallback


@dataclass
class SolveReport:
    status: str
    primal: np.ndarray
    dual: np.ndarray  # row multipliers then variable-bound multipliers
    objective: float
    primal_residual: float
    dual_residual: float
    iterations: int
    polished: bool = False
    state: tuple | None = None  # lifted (x, z, y) for warm starts

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Lifted:
    """Lifted problem data in original (unscaled) units."""

    def __init__(self, prob: ConvexProblem):
        n0, m0 = prob.n, prob.m
        ra = prob.row_atoms
        na = len(ra)
        self.n0, self.m0, self.na = n0, m0, na
        n = n0 + na
        self.n = n
        self.P = sp.csc_matrix((n, n))
        if len(prob.obj_atoms):
            self.P = sp.block_diag([prob.obj_atoms.hessian(n0), sp.csc_matrix((na, na))], format="csc")
        self.q = np.concatenate([prob.q, np.zeros(na)])

        # rows: original, bounded variables, atom u-rows, atom t-rows
        a0 = sp.hstack([prob.A, sp.csr_matrix((np.ones(na), (ra.row, np.arange(na))), shape=(m0, na))],
                       format="csr")
        bounded = np.flatnonzero(np.isfinite(prob.var_lower) | np.isfinite(prob.var_upper))
        self.bounded = bounded
        ab = sp.csr_matrix((np.ones(len(bounded)), (np.arange(len(bounded)), bounded)), shape=(len(bounded), n))
        pair = ra.j >= 0
        k = np.arange(na)
        au = sp.csr_matrix(
            (np.concatenate([np.ones(na), ra.sign[pair]]), (np.concatenate([k, k[pair]]), np.concatenate([ra.i, ra.j[pair]]))),
            shape=(na, n),
        )
        at = sp.csr_matrix((np.ones(na), (k, n0 + k)), shape=(na, n))
        self.A = sp.vstack([a0, ab, au, at], format="csr")
        self.m = self.A.shape[0]
        self.nb = len(bounded)
        self.u_rows = m0 + self.nb + k
        self.t_rows = m0 + self.nb + na + k
        self.weight = ra.weight.copy()
        self.lower = np.concatenate([prob.lower, prob.var_lower[bounded], np.full(2 * na, -np.inf)])
        self.upper = np.concatenate([prob.upper, prob.var_upper[bounded], np.full(2 * na, np.inf)])
        self.interval = np.ones(self.m, dtype=bool)
        self.interval[m0 + self.nb:] = False

    def project(self, z, weight):
        out = np.clip(z, self.lower, self.upper)
        if self.na:
            u, t = z[self.u_rows], z[self.t_rows]
            pu, pt = _project_parabola(u, t, weight)
            out[self.u_rows] = pu
            out[self.t_rows] = pt
        return out

    def unlift_dual(self, y):
        """Row duals plus variable-bound duals of the original problem."""
        yy = np.zeros(self.m0 + self.n0)
        yy[: self.m0] = y[: self.m0]
        yy[self.m0 + self.bounded] = y[self.m0:self.m0 + self.nb]
        return yy

    def lift_dual(self, yy, x):
        y = np.zeros(self.m)
        y[: self.m0] = yy[: self.m0]
        y[self.m0:self.m0 + self.nb] = yy[self.m0 + self.bounded]
        if self.na:
            # parabola block duals follow from the owning row's multiplier
            lam = np.maximum(y[self.row_of_atom], 0.0)
            u = self.A[self.u_rows] @ x
            y[self.t_rows] = -lam
            y[self.u_rows] = 2 * self.weight * u * lam
        return y


def _project_parabola(u, t, w):
    """Euclidean projection of points ``(u, t)`` onto ``{t >= w u^2}``."""
    pu, pt = u.copy(), t.copy()
    out = t < w * u * u
    if not out.any():
        return pu, pt
    uo, to, wo = np.abs(u[out]), t[out], w[out]
    # the projected |u| is the root of f(r) = 2 w^2 r^3 + (1 - 2 w t) r - |u| in [lo, |u|]
    lo = np.sqrt(np.maximum(0.0, 2 * wo * to - 1.0) / (2 * wo * wo))
    hi = uo.copy()
    r = hi.copy()
    for _ in range(100):
        f = 2 * wo * wo * r**3 + (1 - 2 * wo * to) * r - uo
        lo = np.where(f < 0, r, lo)
        hi = np.where(f >= 0, r, hi)
        fp = 6 * wo * wo * r * r + (1 - 2 * wo * to)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = r - f / fp
        bad = ~np.isfinite(step) | (step < lo) | (step > hi)
        nxt = np.where(bad, 0.5 * (lo + hi), step)
        if np.all((np.abs(nxt - r) <= 1e-15 * (1 + r)) | (hi - lo <= 1e-15 * (1 + r))):
            r = nxt
            break
        r = nxt
    sgn = np.where(u[out] < 0, -1.0, 1.0)
    pu[out] = sgn * r
    pt[out] = wo * r * r
    return pu, pt


def _inf_norm(v):
    return float(np.max(np.abs(v))) if v.size else 0.0


class _Scaled:
    """Ruiz equilibration of the lifted problem."""

    def __init__(self, lp: _Lifted, iters=10):
        n, m = lp.n, lp.m
        d = np.ones(n)
        e = np.ones(m)
        P = lp.P.tocsc()
        A = lp.A.tocsc()
        for _ in range(iters):
            cp = _col_norms(P)
            ca = _col_norms(A)
            col = np.maximum(cp, ca)
            row = _col_norms(A.T.tocsc()) if m else np.zeros(0)
            dd = 1.0 / np.sqrt(np.where(col > 1e-4, col, 1.0))
            ee = 1.0 / np.sqrt(np.where(row > 1e-4, row, 1.0))
            dd = np.clip(dd, 1e-4, 1e4)
            ee = np.clip(ee, 1e-4, 1e4)
            Dm, Em = sp.diags(dd), sp.diags(ee)
            P = (Dm @ P @ Dm).tocsc()
            A = (Em @ A @ Dm).tocsc()
            d *= dd
            e *= ee
        qs = d * lp.q
        pn = _col_norms(P)
        c = 1.0 / max(float(np.mean(pn)) if n else 0.0, _inf_norm(qs), 1e-4)
        c = min(c, 1e4)
        self.D, self.E, self.c = d, e, c
        self.P = (c * P).tocsc()
        self.q = c * qs
        self.A = A.tocsr()
        self.lower = e * lp.lower
        self.upper = e * lp.upper
        self.weight = lp.weight * e[lp.t_rows] / e[lp.u_rows] ** 2 if lp.na else np.zeros(0)


def _col_norms(M):
    M = M.tocsc()
    out = np.zeros(M.shape[1])
    if M.nnz:
        absd = np.abs(M.data)
        nz = np.diff(M.indptr) > 0
        out[nz] = np.maximum.reduceat(absd, M.indptr[:-1][nz])
    return out


class _Solver:
    def __init__(self, prob: ConvexProblem, eps_abs, eps_rel, max_iter, verbose=False):
        self.prob = prob
        self.lp = _Lifted(prob)
        self.lp.row_of_atom = prob.row_atoms.row if len(prob.row_atoms) else np.zeros(0, dtype=np.int64)
        self.sc = _Scaled(self.lp)
        self.eps_abs, self.eps_rel, self.max_iter = eps_abs, eps_rel, max_iter
        lp = self.lp
        self.rho_base = 0.1
        self._kind = np.zeros(lp.m)  # 0 normal, 1 equality, 2 free
        free = np.isinf(lp.lower) & np.isinf(lp.upper) & lp.interval
        eq = (lp.upper - lp.lower < 1e-12) & lp.interval
        self._kind[eq] = 1
        self._kind[free] = 2
        self._set_rho(self.rho_base)

    def _set_rho(self, rho):
        self.rho_base = float(np.clip(rho, _RHO_MIN, _RHO_MAX))
        r = np.full(self.lp.m, self.rho_base)
        r[self._kind == 1] = min(self.rho_base * _EQ_FACTOR, _RHO_MAX)
        r[self._kind == 2] = _RHO_MIN
        self.rho = r
        n = self.lp.n
        kkt = sp.bmat(
            [[self.sc.P + _SIGMA * sp.identity(n), self.sc.A.T], [self.sc.A, -sp.diags(1.0 / r)]], format="csc"
        )
        self.factor = spla.splu(kkt)

    def _kkt_solve(self, rhs):
        return self.factor.solve(rhs)

    # -- unscaled quantities -------------------------------------------------

    def unscale(self, xs, zs, ys):
        sc = self.sc
        return sc.D * xs, zs / sc.E, sc.E * ys / sc.c

    def run(self, warm=None):
        lp, sc = self.lp, self.sc
        n, m = lp.n, lp.m
        if warm is not None:
            x0, z0, y0 = warm
            xs = x0 / sc.D
            zs = z0 * sc.E
            ys = y0 / sc.E * sc.c
        else:
            xs, ys = np.zeros(n), np.zeros(m)
            zs = np.clip(np.zeros(m), sc.lower, sc.upper)
        best = None
        check_every = 10
        adapt_every = 50
        next_polish = 25
        y_prev = ys.copy()
        it = 0
        for it in range(1, self.max_iter + 1):
            rhs = np.concatenate([_SIGMA * xs - sc.q, zs - ys / self.rho])
            sol = self._kkt_solve(rhs)
            xt, nu = sol[:n], sol[n:]
            zt = zs + (nu - ys) / self.rho
            xs = _ALPHA * xt + (1 - _ALPHA) * xs
            zh = _ALPHA * zt + (1 - _ALPHA) * zs
            raw = zh + ys / self.rho
            zn = np.clip(raw, sc.lower, sc.upper)
            if lp.na:
                zn[lp.u_rows], zn[lp.t_rows] = _project_parabola(raw[lp.u_rows], raw[lp.t_rows], sc.weight)
            ys = ys + self.rho * (zh - zn)
            zs = zn

            if it % check_every == 0 or it == self.max_iter:
                x, z, y = self.unscale(xs, zs, ys)
                ax = lp.A @ x
                rp = _inf_norm(ax - z)
                px = lp.P @ x
                aty = lp.A.T @ y
                rd = _inf_norm(px + lp.q + aty)
                tol_p = self.eps_abs + self.eps_rel * max(_inf_norm(ax), _inf_norm(z))
                tol_d = self.eps_abs + self.eps_rel * max(_inf_norm(px), _inf_norm(aty), _inf_norm(lp.q))
                if rp <= tol_p and rd <= tol_d:
                    rep = self._report(OPTIMAL, x, y, it, state=(x, z, y))
                    if rep.optimal:
                        return rep
                if it >= next_polish:
                    rep = self._polish(x, z, y, it)
                    if rep is not None:
                        return rep
                    next_polish = it + max(25, it // 4)
                if self._infeasible(ys - y_prev):
                    return self._report(PRIMAL_INFEASIBLE, x, y, it, state=(x, z, y), force=True)
                y_prev = ys.copy()
                if it % adapt_every == 0:
                    self._adapt(rp, rd, ax, z, px, aty)
        x, z, y = self.unscale(xs, zs, ys)
        rep = self._polish(x, z, y, it)
        if rep is not None:
            return rep
        return self._report(MAX_ITERATIONS, x, y, it, state=(x, z, y), force=True)

    def _adapt(self, rp, rd, ax, z, px, aty):
        lp = self.lp
        num = rp / max(_inf_norm(ax), _inf_norm(z), 1e-10)
        den = rd / max(_inf_norm(px), _inf_norm(aty), _inf_norm(lp.q), 1e-10)
        if num <= 0 or den <= 0:
            return
        new = self.rho_base * np.sqrt(num / den)
        new = float(np.clip(new, _RHO_MIN, _RHO_MAX))
        if new > 5 * self.rho_base or new < self.rho_base / 5:
            self._set_rho(new)

    def _infeasible(self, dys, eps=1e-6):
        sc, lp = self.sc, self.lp
        dy = sc.E * dys / sc.c
        norm = _inf_norm(dy)
        if norm < 1e-12:
            return False
        aty = _inf_norm(lp.A.T @ dy)
        if aty > eps * norm:
            return False
        iv = lp.interval
        d_iv = dy[iv]
        lo, hi = lp.lower[iv], lp.upper[iv]
        if np.any((d_iv > eps * norm) & np.isinf(hi)) or np.any((d_iv < -eps * norm) & np.isinf(lo)):
            return False
        pos, neg = np.maximum(d_iv, 0), np.minimum(d_iv, 0)
        supp = float(np.sum(np.where(pos > eps * norm, hi, 0.0) * pos) + np.sum(np.where(neg < -eps * norm, lo, 0.0) * neg))
        if lp.na:
            a, b = dy[lp.u_rows], dy[lp.t_rows]
            if np.any(b > eps * norm):
                return False
            flat = b >= -eps * norm
            if np.any(flat & (np.abs(a) > eps * norm)):
                return False
            bb = np.where(flat, -1.0, b)
            supp += float(np.sum(np.where(flat, 0.0, a * a / (-4 * lp.weight * bb))))
        return supp < -eps * norm

    def _report(self, status, x, y, it, state=None, force=False, polished=False):
        prob, lp = self.prob, self.lp
        xo = x[: lp.n0]
        yo = lp.unlift_dual(y)
        rp, rd = residuals(prob, xo, yo)
        if status == OPTIMAL and not force:
            scale_p = max(_inf_norm(prob.row_values(xo)), _inf_norm(xo), 1.0)
            scale_d = max(_inf_norm(prob.objective_gradient(xo)), 1.0)
            if rp > self.eps_abs + self.eps_rel * scale_p or rd > self.eps_abs + self.eps_rel * scale_d:
                return SolveReport(MAX_ITERATIONS, xo, yo, prob.objective(xo), rp, rd, it, polished, state)
        return SolveReport(status, xo.copy(), yo, prob.objective(xo), rp, rd, it, polished, state)

    def interior(self, rep):
        """Interior-point fallback from a stalled run; polished like the
        splitting iterates.  None if it fails too."""
        sc, lp = self.sc, self.lp
        x0 = rep.state[0] / sc.D
        xs, ys, iters, ok = interior_point(sc.P, sc.q, sc.A, sc.lower, sc.upper, x0=x0)
        if not np.all(np.isfinite(xs)):
            return None
        x, y = sc.D * xs, sc.E * ys / sc.c
        z = lp.project(lp.A @ x, lp.weight)
        it = rep.iterations + iters
        out = self._polish(x, z, y, it)
        if out is None and ok:
            out = self._report(OPTIMAL, x, y, it, state=(x, z, y))
            out = out if out.optimal else None
        return out

    # -- polishing -----------------------------------------------------------

    def _polish(self, x, z, y, it):
        lp = self.lp
        eq = lp.interval & (lp.upper - lp.lower < 1e-12)
        lower_act = lp.interval & ((z - lp.lower < -y) | eq)
        upper_act = lp.interval & ~lower_act & (lp.upper - z < y)
        par_act = np.zeros(lp.na, dtype=bool)
        if lp.na:
            zt, zu = z[lp.t_rows], z[lp.u_rows]
            par_act = (zt - lp.weight * zu * zu) < -y[lp.t_rows]
        xk, yk = x.copy(), y
        entering = eq.copy()
        entering_p = np.zeros(lp.na, dtype=bool)
        reach = 10.0 * (1.0 + _inf_norm(x))
        seen = set()
        for _ in range(15):
            lower_act, upper_act, par_act = self._independent(xk, yk, lower_act, upper_act, par_act, entering,
                                                              entering_p)
            key = (lower_act.tobytes(), upper_act.tobytes(), par_act.tobytes())
            if key in seen:
                return None  # cycling between active sets
            seen.add(key)
            sol = self._newton(xk, lower_act, upper_act, par_act, yk)
            if sol is None or _inf_norm(sol[0] - x) > reach:
                return None  # a wrong guess sends the step far away
            xk, yk = sol
            rep = self._certify(xk, it)
            if rep is not None:
                return rep
            changed = False
            # multipliers with the wrong sign leave the active set
            scale = 1e-9 * max(1.0, _inf_norm(yk))
            bad_lo = lower_act & (yk > scale) & ~eq
            bad_hi = upper_act & (yk < -scale)
            if bad_lo.any() or bad_hi.any():
                lower_act &= ~bad_lo
                upper_act &= ~bad_hi
                changed = True
            if lp.na:
                bad_p = par_act & (yk[lp.t_rows] > scale)
                if bad_p.any():
                    par_act &= ~bad_p
                    changed = True
            # violated constraints enter it
            ax = lp.A @ xk
            tol = 1e-10 * (1 + np.abs(ax))
            free = lp.interval & ~lower_act & ~upper_act
            v_lo = free & (ax < lp.lower - tol)
            v_hi = free & (ax > lp.upper + tol)
            entering = eq | v_lo | v_hi
            if v_lo.any() or v_hi.any():
                lower_act |= v_lo
                upper_act |= v_hi
                changed = True
            if lp.na:
                u, t = ax[lp.u_rows], ax[lp.t_rows]
                entering_p = ~par_act & (t < lp.weight * u * u - 1e-10 * (1 + np.abs(t)))
                if entering_p.any():
                    par_act |= entering_p
                    changed = True
            if not changed:
                zk = lp.project(ax, lp.weight)
                rep = self._report(OPTIMAL, xk, yk, it, state=(xk, zk, yk), polished=True)
                return rep if rep.optimal else None
        return None

    def _certify(self, x, it):
        """If ``x`` is feasible, look for sign-correct multipliers over every
        constraint active at ``x`` (nonnegative least squares).  Handles
        degenerate vertices where the basis chosen by ``_newton`` carries
        wrong-signed multipliers."""
        lp = self.lp
        ax = lp.A @ x
        tol = 1e-9 * (1 + np.abs(ax))
        iv = lp.interval
        if np.any(iv & (ax < lp.lower - tol)) or np.any(iv & (ax > lp.upper + tol)):
            return None
        pact = np.zeros(lp.na, dtype=bool)
        if lp.na:
            u, t = ax[lp.u_rows], ax[lp.t_rows]
            gap = t - lp.weight * u * u
            if np.any(gap < -1e-9 * (1 + np.abs(t))):
                return None
            pact = gap <= 1e-9 * (1 + np.abs(t))
        lo = np.flatnonzero(iv & (ax <= lp.lower + tol))
        hi = np.flatnonzero(iv & (ax >= lp.upper - tol))
        pidx = np.flatnonzero(pact)
        k = len(lo) + len(hi) + len(pidx)
        if k * lp.n > 4e6:
            return None
        g = lp.P @ x + lp.q
        cols = [-lp.A[lo].T, lp.A[hi].T]
        if len(pidx):
            cols.append(self._jacobian_rows(x, np.zeros(0, dtype=np.int64), pidx).T)
        M = sp.hstack(cols, format="csc").toarray() if k else np.zeros((lp.n, 0))
        if k:
            u_opt, _ = scipy_nnls(M, -g, maxiter=50 * max(k, 10))
        else:
            u_opt = np.zeros(0)
        y = np.zeros(lp.m)
        y[lo] -= u_opt[: len(lo)]
        y[hi] += u_opt[len(lo):len(lo) + len(hi)]
        if len(pidx):
            lam = u_opt[len(lo) + len(hi):]
            y[lp.t_rows[pidx]] = -lam
            y[lp.u_rows[pidx]] = 2 * lp.weight[pidx] * ax[lp.u_rows[pidx]] * lam
        z = lp.project(ax, lp.weight)
        rep = self._report(OPTIMAL, x, y, it, state=(x, z, y), polished=True)
        return rep if rep.optimal else None

    def _jacobian_rows(self, x, act, pidx):
        lp = self.lp
        rows = [lp.A[act]]
        if len(pidx):
            Au = lp.A[lp.u_rows[pidx]]
            u = Au @ x
            rows.append(sp.diags(2 * lp.weight[pidx] * u) @ Au - sp.csr_matrix(
                (np.ones(len(pidx)), (np.arange(len(pidx)), lp.n0 + pidx)), shape=(len(pidx), lp.n)))
        return sp.vstack(rows, format="csr")

    def _independent(self, x, y, lower_act, upper_act, par_act, entering, entering_p):
        """Keep a linearly independent subset of the guessed active set,
        preferring equalities, newly violated constraints and large
        multipliers."""
        lp = self.lp
        act = np.flatnonzero(lower_act | upper_act)
        pidx = np.flatnonzero(par_act)
        k = len(act) + len(pidx)
        if k <= 1 or k * lp.n > 4e6:
            return lower_act, upper_act, par_act
        M = self._jacobian_rows(x, act, pidx).toarray()
        norms = np.linalg.norm(M, axis=1)
        norms[norms == 0] = 1.0
        mult = np.abs(np.concatenate([y[act], y[lp.t_rows[pidx]]]))
        prio = 1.0 + mult / max(float(mult.max()), 1e-300)
        prio[: len(act)][entering[act]] = 3.0
        prio[len(act):][entering_p[pidx]] = 3.0
        W = (M / norms[:, None]) * prio[:, None]
        _, R, piv = scipy_qr(W.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > 1e-9 * max(diag[0], 1e-300))) if diag.size else 0
        if rank == k:
            return lower_act, upper_act, par_act
        keep = np.zeros(k, dtype=bool)
        keep[piv[:rank]] = True
        lo, hi, pa = lower_act.copy(), upper_act.copy(), par_act.copy()
        dropped = act[~keep[: len(act)]]
        lo[dropped] = False
        hi[dropped] = False
        pa[pidx[~keep[len(act):]]] = False
        return lo, hi, pa

    def _newton(self, x, lower_act, upper_act, par_act, y):
        lp = self.lp
        n = lp.n
        act = np.flatnonzero(lower_act | upper_act)
        target = np.where(lower_act, lp.lower, lp.upper)[act]
        pidx = np.flatnonzero(par_act)
        k = len(act) + len(pidx)
        dense = n + k <= DENSE_KKT
        A_act = lp.A[act]
        Au = lp.A[lp.u_rows[pidx]]
        P = lp.P
        if dense:
            A_act, Au, P = A_act.toarray(), Au.toarray(), P.toarray()
            E = np.zeros((len(pidx), n))
            E[np.arange(len(pidx)), lp.n0 + pidx] = 1.0
        else:
            E = sp.csr_matrix((np.ones(len(pidx)), (np.arange(len(pidx)), lp.n0 + pidx)), shape=(len(pidx), n))
        w = lp.weight[pidx]
        lam = np.maximum(-y[lp.t_rows[pidx]], 0.0) if len(pidx) else np.zeros(0)
        reg = np.concatenate([np.full(n, 1e-9), np.full(k, -1e-9)])
        yk = None
        prev = np.inf
        for _ in range(30 if len(pidx) else 1):
            g = P @ x + lp.q
            u = Au @ x
            c = np.concatenate([A_act @ x - target, w * u * u - x[lp.n0 + pidx]])
            if dense:
                J = np.vstack([A_act, (2 * w * u)[:, None] * Au - E])
                H = P + Au.T @ ((2 * w * lam)[:, None] * Au)
                K = np.block([[H, J.T], [J, np.zeros((k, k))]])
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", LinAlgWarning)
                    lu = scipy_lu_factor(K + np.diag(reg), check_finite=False)
                factor = lambda r: scipy_lu_solve(lu, r, check_finite=False)  # noqa: E731
            else:
                J = sp.vstack([A_act, sp.diags(2 * w * u) @ Au - E], format="csr")
                H = P + Au.T @ sp.diags(2 * w * lam) @ Au
                K = sp.bmat([[H, J.T], [J, None]], format="csc") if k else sp.csc_matrix(H)
                try:
                    factor = spla.splu((K + sp.diags(reg)).tocsc()).solve
                except RuntimeError:
                    return None
            rhs = np.concatenate([-g, -c])
            with np.errstate(all="ignore"):
                sol = factor(rhs)
                res = _inf_norm(rhs - K @ sol)
                for _ in range(10):
                    if not res > 1e-15 * (1 + _inf_norm(rhs)):
                        break
                    cand = sol + factor(rhs - K @ sol)
                    cres = _inf_norm(rhs - K @ cand)
                    if not cres < res:
                        break
                    sol, res = cand, cres
            if not np.all(np.isfinite(sol)):
                return None
            dx, mult = sol[:n], sol[n:]
            x = x + dx
            lam = mult[len(act):]
            yk = np.zeros(lp.m)
            yk[act] = mult[: len(act)]
            if len(pidx):
                u = Au @ x
                yk[lp.t_rows[pidx]] = -lam
                yk[lp.u_rows[pidx]] = 2 * w * u * lam
                step = _inf_norm(dx)
                if step <= 1e-14 * (1 + _inf_norm(x)) or (step <= 1e-11 * (1 + _inf_norm(x)) and step >= prev):
                    break
                prev = step
        return x, yk


def solve(problem: ConvexProblem, warm_start=None, eps_abs: float = 1e-8, eps_rel: float = 1e-8,
          max_iter: int = 200000) -> SolveReport:
    """Solve ``problem``.  ``warm_start`` is a previous SolveReport (its lifted
    state is reused when shapes match) or a ``(primal, dual)`` pair."""
    s = _Solver(problem, eps_abs, eps_rel, max_iter)
    warm = None
    if isinstance(warm_start, SolveReport) and warm_start.state is not None:
        x, z, y = warm_start.state
        if len(x) == s.lp.n and len(z) == s.lp.m:
            warm = (x, z, y)
        else:
            warm_start = (warm_start.primal, warm_start.dual)
    if warm is None and warm_start is not None and not isinstance(warm_start, SolveReport):
        x0, y0 = warm_start
        x0 = np.asarray(x0, dtype=float)
        lp = s.lp
        if len(x0) != lp.n0:
            raise ValueError("warm start has the wrong dimension")
        xl = np.concatenate([x0, problem.row_atoms.values(x0)]) if lp.na else x0.copy()
        yy = np.zeros(lp.m0 + lp.n0) if y0 is None else np.asarray(y0, dtype=float)
        y = lp.lift_dual(yy, xl)
        warm = (xl, lp.project(lp.A @ xl, lp.weight), y)
    if s.lp.na or max_iter <= IPM_SWITCH:
        return s.run(warm)
    s.max_iter = IPM_SWITCH
    rep = s.run(warm)
    if rep.optimal or rep.status == PRIMAL_INFEASIBLE:
        return rep
    alt = s.interior(rep)
    if alt is not None:
        return alt
    s.max_iter = max_iter - IPM_SWITCH
    rest = s.run(rep.state)
    rest.iterations += IPM_SWITCH
    return rest
