"""LP relaxation of a binary MIP under partial fixings.

The solver is a dense-tableau, bounded-variable primal simplex (two phases,
artificial variables for rows that start infeasible).  Pricing is Dantzig's
rule until ``5 * (n + m)`` iterations have elapsed, then Bland's rule.  All
ties go to the lowest index, so results are reproducible bit for bit.

Before pivoting, fixed columns are substituted out and a small bound
propagation pass removes rows that are empty, redundant, or act on a single
variable (those become bounds).  Removed rows report a zero dual.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mip import FREE, MipInstance

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9


@dataclass
class LpResult:
    status: str  # "optimal", "infeasible" or "iteration_limit"
    primal: np.ndarray
    objective: float
    reduced_costs: np.ndarray
    duals: np.ndarray
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Capped(Exception):
    def __init__(self, phase: int, objective: float, iterations: int):
        self.phase = phase
        self.objective = objective
        self.iterations = iterations


def _row_data(inst: MipInstance):
    """Row arrays in canonical (content-sorted) order, cached on the instance."""
    cache = inst.__dict__.get("_lp_rows")
    if cache is None:
        order = sorted(range(inst.nrows), key=lambda i: (inst.rows[i].coefs, inst.rows[i].rel, inst.rows[i].rhs))
        A = inst.matrix[order].tocsr() if order else inst.matrix
        rel = np.array([inst.rows[i].rel for i in order], dtype="<U2")
        rhs = np.array([inst.rows[i].rhs for i in order], dtype=float)
        Apos = A.maximum(0).tocsr()
        Aneg = A.minimum(0).tocsr()
        nz = (A != 0).astype(float).tocsr()
        cache = (np.array(order, dtype=np.int64), A, rel, rhs, Apos, Aneg, nz)
        inst.__dict__["_lp_rows"] = cache
    return cache


def _propagate(A, Apos, Aneg, nz, rel, rhs, lb, ub):
    """Tighten bounds and drop rows that no longer constrain the LP.

    Returns ``(active_rows, resid)`` or ``None`` if infeasibility is detected.
    ``lb``/``ub`` are modified in place.
    """
    m = A.shape[0]
    active = np.ones(m, dtype=bool)
    is_le = rel == "le"
    is_ge = rel == "ge"
    is_eq = rel == "eq"
    for _ in range(4 * A.shape[1] + 4):
        free = lb < ub
        fixed_val = np.where(free, 0.0, lb)
        resid = rhs - A @ fixed_val
        lbf = np.where(free, lb, 0.0)
        ubf = np.where(free, ub, 0.0)
        minact = Apos @ lbf + Aneg @ ubf
        maxact = Apos @ ubf + Aneg @ lbf
        nfree = nz @ free.astype(float)

        bad = active & (
            ((is_le | is_eq) & (minact > resid + FEAS_TOL)) | ((is_ge | is_eq) & (maxact < resid - FEAS_TOL))
        )
        if bad.any():
            return None
        redundant = active & (
            (is_le & (maxact <= resid + FEAS_TOL))
            | (is_ge & (minact >= resid - FEAS_TOL))
            | (is_eq & (nfree == 0))
        )
        active &= ~redundant
        singles = np.flatnonzero(active & (nfree == 1))
        changed = False
        for i in singles:
            lo, hi = A.indptr[i], A.indptr[i + 1]
            cols = A.indices[lo:hi]
            vals = A.data[lo:hi]
            k = np.flatnonzero(free[cols])[0]
            j, v = cols[k], vals[k]
            bound = resid[i] / v
            upper = rel[i] in ("le", "eq") if v > 0 else rel[i] in ("ge", "eq")
            lower = rel[i] in ("ge", "eq") if v > 0 else rel[i] in ("le", "eq")
            if upper and bound < ub[j]:
                ub[j] = bound
            if lower and bound > lb[j]:
                lb[j] = bound
            if lb[j] > ub[j] + FEAS_TOL:
                return None
            if ub[j] - lb[j] <= FEAS_TOL:
                # snap to the nearer original bound so binary fixings stay exact
                val = lb[j] if lb[j] in (0.0, 1.0) else ub[j]
                lb[j] = ub[j] = val
            active[i] = False
            changed = True
        if not changed:
            free = lb < ub
            fixed_val = np.where(free, 0.0, lb)
            resid = rhs - A @ fixed_val
            return active, resid
    raise RuntimeError("bound propagation did not converge")


def _simplex(M: np.ndarray, b: np.ndarray, c: np.ndarray, U: np.ndarray, iter_cap):
    """Solve ``min c x  s.t.  M x <= b,  0 <= x <= U``.

    Returns ``(status, x, y, iterations)`` with row duals ``y <= 0`` satisfying
    ``c = M.T @ y + d`` at optimality.
    """
    k, nf = M.shape
    # start every structural at whichever common bound leaves fewer rows infeasible
    b_up = b - M @ U
    start_upper = np.count_nonzero(b_up < 0) < np.count_nonzero(b < 0)
    b_start = b_up if start_upper else b
    infeas = b_start < 0
    art_rows = np.flatnonzero(infeas)
    na = len(art_rows)
    N = nf + k + na
    T = np.zeros((k, N))
    T[:, :nf] = M
    T[np.arange(k), nf + np.arange(k)] = 1.0
    T[art_rows, nf + k + np.arange(na)] = -1.0
    T[infeas] *= -1.0
    xB = np.abs(b_start).astype(float)
    basis = np.arange(nf, nf + k)
    basis[art_rows] = nf + k + np.arange(na)
    upper = np.concatenate([U, np.full(k, np.inf), np.full(na, np.inf)])
    at_upper = np.zeros(N, dtype=bool)
    at_upper[:nf] = start_upper & (U > 0)
    is_basic = np.zeros(N, dtype=bool)
    is_basic[basis] = True
    bland_after = 5 * (nf + k)
    hard_cap = iter_cap if iter_cap is not None else 200 * (nf + k) + 1000
    iters = 0
    slack = slice(nf, nf + k)
    rhs_full = b.astype(float)

    def recompute_xB():
        Binv = T[:, slack]
        val = Binv @ rhs_full
        ups = np.flatnonzero(at_upper & ~is_basic)
        if len(ups):
            val -= T[:, ups] @ upper[ups]
        return val

    def run(cost, phase):
        nonlocal iters, T, xB
        d = cost - cost[basis] @ T
        while True:
            elig = (~is_basic) & (upper > 0) & (((~at_upper) & (d < -OPT_TOL)) | (at_upper & (d > OPT_TOL)))
            cand = np.flatnonzero(elig)
            if len(cand) == 0:
                d = cost - cost[basis] @ T
                elig = (~is_basic) & (upper > 0) & (((~at_upper) & (d < -OPT_TOL)) | (at_upper & (d > OPT_TOL)))
                cand = np.flatnonzero(elig)
                if len(cand) == 0:
                    return d
            if iters >= hard_cap:
                if iter_cap is None:
                    raise RuntimeError("simplex iteration safeguard exceeded")
                raise _Capped(phase, float(cost[basis] @ xB + cost[at_upper & ~is_basic] @ upper[at_upper & ~is_basic]), iters)
            if iters >= bland_after:
                j = cand[0]
            else:
                j = cand[np.argmax(np.abs(d[cand]))]
            sign = -1.0 if at_upper[j] else 1.0
            alpha = T[:, j] * sign
            ub_basic = upper[basis]
            ratios = np.full(k, np.inf)
            pos = alpha > PIVOT_TOL
            neg = alpha < -PIVOT_TOL
            ratios[pos] = np.maximum(xB[pos], 0.0) / alpha[pos]
            fin = neg & np.isfinite(ub_basic)
            ratios[fin] = np.maximum(ub_basic[fin] - xB[fin], 0.0) / -alpha[fin]
            tmin = ratios.min() if k else np.inf
            t_flip = upper[j]
            iters += 1
            if t_flip <= tmin:
                if not np.isfinite(t_flip):
                    raise RuntimeError("LP unbounded; impossible with bounded variables")
                xB -= t_flip * alpha
                at_upper[j] = not at_upper[j]
                continue
            ties = np.flatnonzero(ratios <= tmin + 1e-12)
            r = ties[np.argmin(basis[ties])]
            q = basis[r]
            xB -= tmin * alpha
            xB[r] = (upper[j] - tmin) if at_upper[j] else tmin
            to_upper = alpha[r] < 0
            piv = T[r, j]
            T[r] /= piv
            col = T[:, j].copy()
            col[r] = 0.0
            hit = np.flatnonzero(col)
            if len(hit):
                T[hit] -= np.outer(col[hit], T[r])
            d -= d[j] * T[r]
            basis[r] = j
            is_basic[j] = True
            at_upper[j] = False
            is_basic[q] = False
            at_upper[q] = bool(to_upper) and np.isfinite(upper[q])
            np.clip(xB, 0.0, upper[basis], out=xB)

    try:
        if na:
            cost1 = np.zeros(N)
            cost1[nf + k:] = 1.0
            run(cost1, 1)
            xB = recompute_xB()
            infeas_sum = float(xB[basis >= nf + k].sum())
            if infeas_sum > FEAS_TOL * max(1.0, float(np.abs(b_start).max())):
                return "infeasible", None, None, iters
            upper[nf + k:] = 0.0
            at_upper[nf + k:] = False
            np.clip(xB, 0.0, upper[basis], out=xB)
        cost2 = np.zeros(N)
        cost2[:nf] = c
        d = run(cost2, 2)
    except _Capped as cap:
        obj = cap.objective if cap.phase == 2 else np.nan
        return "iteration_limit", obj, None, cap.iterations
    xB = recompute_xB()
    np.clip(xB, 0.0, upper[basis], out=xB)
    x_all = np.where(at_upper, upper, 0.0)
    x_all[~np.isfinite(x_all)] = 0.0
    x_all[basis] = xB
    y = -d[slack]
    return "optimal", x_all[:nf], y, iters


def lp_relax(inst: MipInstance, fixings=None, iter_cap: int | None = None) -> LpResult:
    """Solve the LP relaxation with every free variable in [0, 1].

    Fixed entries of ``fixings`` (0 or 1) become degenerate bounds.  The
    objective, duals and reduced costs are reported in the instance's own
    sense, with ``obj == A.T @ duals + reduced_costs``.  With ``iter_cap``
    set, a run that hits the cap returns status ``iteration_limit`` whose
    ``objective`` is the current phase-2 value (NaN if still in phase 1).
    """
    n = inst.nvars
    order, A, rel, rhs, Apos, Aneg, nz = _row_data(inst)
    sgn = -1.0 if inst.maximize else 1.0
    cmin = sgn * inst.obj
    lb = np.zeros(n)
    ub = np.ones(n)
    if fixings is not None:
        fx = np.asarray(fixings)
        fixed = fx != FREE
        lb[fixed] = fx[fixed]
        ub[fixed] = fx[fixed]

    def infeasible(iters=0):
        return LpResult("infeasible", np.full(n, np.nan), np.nan, np.full(n, np.nan), np.full(inst.nrows, np.nan), iters)

    prop = _propagate(A, Apos, Aneg, nz, rel, rhs, lb, ub)
    if prop is None:
        return infeasible()
    active, resid = prop
    free = np.flatnonzero(lb < ub)
    rows = np.flatnonzero(active)

    y_rows = np.zeros(len(rows))
    iters = 0
    x = lb.copy()
    if len(free):
        sub = A[rows][:, free].toarray() if len(rows) else np.zeros((0, len(free)))
        blocks, rhs_blocks, owners, signs = [], [], [], []
        for t, i in enumerate(rows):
            if rel[i] in ("le", "eq"):
                blocks.append(sub[t])
                rhs_blocks.append(resid[i])
                owners.append(t)
                signs.append(1.0)
            if rel[i] in ("ge", "eq"):
                blocks.append(-sub[t])
                rhs_blocks.append(-resid[i])
                owners.append(t)
                signs.append(-1.0)
        M = np.array(blocks).reshape(len(blocks), len(free))
        bvec = np.array(rhs_blocks, dtype=float)
        lo = lb[free]
        bshift = bvec - M @ lo
        status, xs, y, iters = _simplex(M, bshift, cmin[free], ub[free] - lo, iter_cap)
        if status == "infeasible":
            return infeasible(iters)
        if status == "iteration_limit":
            obj = xs + float(cmin @ lb) if np.isfinite(xs) else np.nan
            return LpResult("iteration_limit", np.full(n, np.nan), sgn * obj, np.full(n, np.nan),
                            np.full(inst.nrows, np.nan), iters)
        x[free] = np.clip(lo + xs, lb[free], ub[free])
        np.add.at(y_rows, np.array(owners, dtype=np.int64), np.array(signs) * y)

    duals_canon = np.zeros(inst.nrows)
    duals_canon[rows] = y_rows
    duals = np.zeros(inst.nrows)
    duals[order] = sgn * duals_canon
    # summed in canonical row order so the result does not depend on how rows were listed
    reduced = inst.obj - A.T @ (sgn * duals_canon)
    objective = float(inst.obj @ x)
    return LpResult("optimal", x, objective, reduced, duals, iters)
