"""Primal-dual interior-point method (Mehrotra predictor-corrector) for
problems without quadratic constraint rows.

Works on the equilibrated form ``min 1/2 x'Px + q'x  s.t.  l <= Ax <= u``.
Rows with ``l == u`` become equalities, free rows are dropped and every
other row gets a slack ``s = Ax`` kept strictly inside its bounds.  The
bound multipliers are eliminated, leaving one quasi-definite system per
step.  Used by ``solve`` when the splitting iterations stall, which happens
on degenerate LPs with a wide spread of coefficients.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_STEP = 0.995
_REG = 1e-10


def _max_step(v, dv):
    neg = dv < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


class _Kkt:
    def __init__(self, P, A_in, A_eq):
        self.P, self.A_in, self.A_eq = P, A_in, A_eq
        self.n = P.shape[0]
        self.k_in, self.k_eq = A_in.shape[0], A_eq.shape[0]

    def factor(self, inv_sigma):
        n, ki, ke = self.n, self.k_in, self.k_eq
        self.K = sp.bmat(
            [[self.P + _REG * sp.identity(n), self.A_in.T, self.A_eq.T],
             [self.A_in, -sp.diags(inv_sigma + _REG), None],
             [self.A_eq, None, -_REG * sp.identity(ke)]],
            format="csc",
        ) if ki + ke else (self.P + _REG * sp.identity(n)).tocsc()
        self.K0 = self.K.copy()
        self.K0.setdiag(np.concatenate([self.P.diagonal(), -inv_sigma, np.zeros(ke)]))
        self.lu = spla.splu(self.K)

    def solve(self, rhs):
        sol = self.lu.solve(rhs)
        # refine against the unregularized matrix
        for _ in range(3):
            r = rhs - self.K0 @ sol
            if not np.max(np.abs(r)) > 1e-14 * (1 + np.max(np.abs(rhs))):
                break
            sol = sol + self.lu.solve(r)
        return sol


def interior_point(P, q, A, lower, upper, x0=None, eps=1e-14, accept=1e-9, max_iter=200):
    """Returns ``(x, y, iterations, converged)`` with ``y`` the row
    multipliers in the splitting solver's sign convention (negative when a
    lower bound is active).

    Iterates until the relative residuals and the mean complementarity drop
    below ``eps`` (deep enough for an active-set polish to identify the
    optimal face), or until progress stalls; ``converged`` reports whether
    they are at least below ``accept``."""
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return _run(P, q, A, lower, upper, x0, eps, accept, max_iter)


def _run(P, q, A, lower, upper, x0, eps, accept, max_iter):
    m, n = A.shape
    A = A.tocsr()
    eq = np.flatnonzero(np.isfinite(lower) & (upper - lower <= 0))
    free = np.isinf(lower) & np.isinf(upper)
    inr = np.flatnonzero(~free & ~np.isin(np.arange(m), eq))
    A_in, A_eq = A[inr], A[eq]
    b_eq = lower[eq]
    l_in, u_in = lower[inr], upper[inr]
    has_l, has_u = np.isfinite(l_in), np.isfinite(u_in)
    lo = np.where(has_l, l_in, 0.0)
    hi = np.where(has_u, u_in, 0.0)
    qn = max(1.0, float(np.max(np.abs(q))) if n else 0.0)
    is_lp = P.nnz == 0

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    ax = A_in @ x
    width = np.where(has_l & has_u, u_in - l_in, np.inf)
    theta = np.minimum(1.0, 0.25 * width)
    s = np.clip(ax, np.where(has_l, lo + theta, -np.inf), np.where(has_u, hi - theta, np.inf))
    zl = np.where(has_l, qn, 0.0)
    zu = np.where(has_u, qn, 0.0)
    y_in = zu - zl
    y_eq = np.zeros(len(eq))
    nc = int(has_l.sum() + has_u.sum())
    kkt = _Kkt(P.tocsc(), A_in, A_eq)

    tiny = 1e-150  # slacks never reach exactly zero

    def slacks(s):
        return np.where(has_l, np.maximum(s - lo, tiny), 1.0), np.where(has_u, np.maximum(hi - s, tiny), 1.0)

    it = 0
    merit = np.inf
    best_it = 0
    for it in range(1, max_iter + 1):
        tl, tu = slacks(s)
        r_x = P @ x + q + A_in.T @ y_in + A_eq.T @ y_eq
        r_in = A_in @ x - s
        r_eq = A_eq @ x - b_eq
        r_s = -y_in - zl + zu
        mu = float((np.sum(tl * zl * has_l) + np.sum(tu * zu * has_u)) / max(nc, 1))
        p_scale = 1.0 + max(np.max(np.abs(s), initial=0.0), np.max(np.abs(b_eq), initial=0.0))
        d_scale = qn + np.max(np.abs(P @ x), initial=0.0)
        p_res = max(np.max(np.abs(r_in), initial=0.0), np.max(np.abs(r_eq), initial=0.0))
        d_res = max(np.max(np.abs(r_x), initial=0.0), np.max(np.abs(r_s), initial=0.0))
        level = max(p_res / p_scale, d_res / d_scale, mu / d_scale)
        if level <= eps:
            break
        if level < 0.5 * merit:
            merit, best_it = level, it
        elif it - best_it >= 8:
            break  # stalled
        sig_l = np.where(has_l, zl / tl, 0.0)
        sig_u = np.where(has_u, zu / tu, 0.0)
        sigma_s = sig_l + sig_u
        try:
            kkt.factor(1.0 / sigma_s)
        except RuntimeError:
            break

        def direction(cl, cu):
            rho_s = -r_s + np.where(has_l, cl / tl, 0.0) - np.where(has_u, cu / tu, 0.0)
            rhs = np.concatenate([-r_x, -r_in + rho_s / sigma_s, -r_eq])
            sol = kkt.solve(rhs)
            dx = sol[:n]
            dyi = sol[n:n + len(inr)]
            dye = sol[n + len(inr):]
            ds = (dyi + rho_s) / sigma_s
            dzl = np.where(has_l, (cl - zl * ds) / tl, 0.0)
            dzu = np.where(has_u, (cu + zu * ds) / tu, 0.0)
            return dx, ds, dyi, dye, dzl, dzu

        def steps(ds, dzl, dzu):
            ap = min(_max_step(tl[has_l], ds[has_l]), _max_step(tu[has_u], -ds[has_u]))
            ad = min(_max_step(zl[has_l], dzl[has_l]), _max_step(zu[has_u], dzu[has_u]))
            return ap, ad

        # predictor
        dx, ds, dyi, dye, dzl, dzu = direction(-tl * zl, -tu * zu)
        if not np.all(np.isfinite(dx)):
            break
        ap, ad = steps(ds, dzl, dzu)
        mu_aff = (np.sum(((tl + ap * ds) * (zl + ad * dzl))[has_l])
                  + np.sum(((tu - ap * ds) * (zu + ad * dzu))[has_u])) / max(nc, 1)
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        cl = sigma * mu - tl * zl - ds * dzl
        cu = sigma * mu - tu * zu + ds * dzu
        dx, ds, dyi, dye, dzl, dzu = direction(cl, cu)
        if not np.all(np.isfinite(dx)):
            break
        ap, ad = steps(ds, dzl, dzu)
        ap, ad = _STEP * ap, _STEP * ad
        if not is_lp:
            ap = ad = min(ap, ad)
        x = x + ap * dx
        s = s + ap * ds
        y_in = y_in + ad * dyi
        y_eq = y_eq + ad * dye
        zl = np.where(has_l, zl + ad * dzl, 0.0)
        zu = np.where(has_u, zu + ad * dzu, 0.0)

    y = np.zeros(m)
    y[inr] = y_in
    y[eq] = y_eq
    return x, y, it, bool(level <= accept)
