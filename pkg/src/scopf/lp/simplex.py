"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Meant for small models and as an independent cross-check of the HiGHS
backend. Ties in the ratio test go to the lowest basic column, entering
columns are the lowest-index improving ones, so the vertex returned for a
given input is always the same.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
FEAS_TOL = 1e-8


@dataclass
class SimplexResult:
    status: str
    x: Optional[np.ndarray] = None
    fun: float = np.nan
    duals: Optional[np.ndarray] = None
    nit: int = 0
    message: str = ""


def _standardize(c, A, senses, b, lb, ub):
    """Rewrite as ``min c'y, A'y = b', y >= 0`` and return the back-map."""
    n = len(c)
    cols = []  # (original var, sign) per structural column of y
    offset = np.zeros(n)
    bound_rows = []  # (column, upper) for finite ranges
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    M = np.zeros((n, ny))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s
    m = A.shape[0]
    rhs = b - A @ offset
    AM = A @ M
    n_slack = sum(1 for s in senses if s != "=") + len(bound_rows)
    rows = m + len(bound_rows)
    T = np.zeros((rows, ny + n_slack))
    T[:m, :ny] = AM
    rb = np.concatenate([rhs, [u for _, u in bound_rows]])
    s_col = ny
    for r, s in enumerate(senses):
        if s == "<=":
            T[r, s_col] = 1.0
            s_col += 1
        elif s == ">=":
            T[r, s_col] = -1.0
            s_col += 1
    for k, (col, _) in enumerate(bound_rows):
        T[m + k, col] = 1.0
        T[m + k, s_col] = 1.0
        s_col += 1
    cy = np.concatenate([M.T @ c, np.zeros(n_slack)])
    flip = rb < 0
    T[flip] *= -1.0
    rb = np.where(flip, -rb, rb)
    const = float(c @ offset)
    return T, rb, cy, M, offset, const, flip, m


def _pivot(tab, r, q):
    tab[r] /= tab[r, q]
    col = tab[:, q].copy()
    col[r] = 0.0
    nz = np.flatnonzero(np.abs(col) > 0.0)
    if nz.size:
        tab[nz] -= np.outer(col[nz], tab[r])


def _run(tab, basis, n_enter, max_iter):
    """Bland's rule on a tableau whose last row is the reduced-cost row."""
    rows = tab.shape[0] - 1
    it = 0
    while it < max_iter:
        red = tab[-1, :n_enter]
        cand = np.flatnonzero(red < -OPT_TOL)
        if cand.size == 0:
            return "optimal", it
        q = int(cand[0])
        col = tab[:rows, q]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return "unbounded", it
        ratios = tab[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(ties, key=lambda k: basis[k]))
        _pivot(tab, r, q)
        basis[r] = q
        it += 1
    return "iteration_limit", it


def simplex(c, A, senses, b, lb, ub, max_iter: int = 50_000) -> SimplexResult:
    c = np.asarray(c, float)
    A = np.asarray(A, float).reshape(-1, len(c))
    b = np.asarray(b, float)
    lb = np.asarray(lb, float)
    ub = np.asarray(ub, float)
    if np.any(lb > ub):
        return SimplexResult("infeasible", message="inconsistent bounds")
    T, rb, cy, M, offset, const, flip, m_orig = _standardize(c, A, list(senses), b, lb, ub)
    rows, ncols = T.shape
    # phase 1: one artificial per row, kept as trailing columns to read B^-1 off later
    tab = np.zeros((rows + 1, ncols + rows + 1))
    tab[:rows, :ncols] = T
    tab[:rows, ncols : ncols + rows] = np.eye(rows)
    tab[:rows, -1] = rb
    tab[-1, :ncols] = -T.sum(axis=0)
    tab[-1, -1] = -rb.sum()
    basis = list(range(ncols, ncols + rows))
    status, it1 = _run(tab, basis, ncols, max_iter)
    if status == "iteration_limit":
        return SimplexResult("error", nit=it1, message="phase 1 iteration limit")
    if -tab[-1, -1] > FEAS_TOL * max(1.0, np.abs(rb).max(initial=0.0)):
        return SimplexResult("infeasible", nit=it1)
    # drive zero-level artificials out of the basis; rows that cannot be are redundant
    active = np.ones(rows, dtype=bool)
    for r in range(rows):
        if basis[r] >= ncols:
            cand = np.flatnonzero(np.abs(tab[r, :ncols]) > PIVOT_TOL)
            if cand.size:
                q = int(cand[0])
                _pivot(tab, r, q)
                basis[r] = q
            else:
                active[r] = False
    # phase 2 on the original costs
    tab[-1, :] = 0.0
    tab[-1, :ncols] = cy
    for r in range(rows):
        if active[r] and cy[basis[r]] != 0.0:
            tab[-1] -= cy[basis[r]] * tab[r]
    keep = np.concatenate([np.flatnonzero(active), [rows]])
    tab = tab[keep]
    basis = [basis[r] for r in np.flatnonzero(active)]
    status, it2 = _run(tab, basis, ncols, max_iter)
    nit = it1 + it2
    if status != "optimal":
        return SimplexResult("error" if status == "iteration_limit" else status, nit=nit)
    y = np.zeros(ncols)
    for r, q in enumerate(basis):
        if q < ncols:
            y[q] = tab[r, -1]
    x = offset + M @ y[: M.shape[1]]
    # duals: y_row = c_B B^-1, B^-1 read from the artificial block
    binv = tab[:-1, ncols : ncols + rows]
    cb = np.array([cy[q] if q < ncols else 0.0 for q in basis])
    pi = cb @ binv
    pi = np.where(flip, -pi, pi)
    duals = pi[:m_orig].copy()
    fun = float(c @ x)
    return SimplexResult("optimal", x=x, fun=fun, duals=duals, nit=nit)
