"""Solver adapters for :class:`LpModel`."""
from __future__ import annotations

import math

import numpy as np

from .model import INF, LpModel, LpSolution, _Pending
from .simplex import simplex

FEAS_TOL = 1e-8
OPT_TOL = 1e-9


def _highs_instance(options):
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("primal_feasibility_tolerance", options.get("primal_feasibility_tolerance", FEAS_TOL / 10))
    h.setOptionValue("dual_feasibility_tolerance", options.get("dual_feasibility_tolerance", OPT_TOL))
    for key, value in options.items():
        if key not in ("primal_feasibility_tolerance", "dual_feasibility_tolerance"):
            h.setOptionValue(key, value)
    return h


def _start_basis(model: LpModel):
    """HiGHS basis from ``model.start_basis``, or None when it does not fit.

    The hint lists the basic columns; every inequality row is basic as well
    and the remaining columns sit at a finite bound (free ones at zero).
    """
    import highspy

    cols = model.start_basis
    if cols is None:
        return None
    row_basic = np.array(model.senses, dtype=object) != "="
    if len(cols) + int(row_basic.sum()) != model.n_rows:
        return None
    S = highspy.HighsBasisStatus
    code = np.where(np.isfinite(model.lb), 1, np.where(np.isfinite(model.ub), 2, 3))
    code[np.asarray(cols, dtype=np.int64)] = 0
    lookup = (S.kBasic, S.kLower, S.kUpper, S.kZero)
    basis = highspy.HighsBasis()
    basis.col_status = [lookup[c] for c in code.tolist()]
    basis.row_status = [S.kBasic if b else S.kLower for b in row_basic.tolist()]
    basis.valid = True
    return basis


def _i32(a):
    return np.ascontiguousarray(a, dtype=np.int32)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def solve_highs(model: LpModel, incremental: bool = True, **options) -> LpSolution:
    """HiGHS through highspy, kept alive between solves of the same model.

    New columns, rows, cost and bound edits are pushed incrementally so the
    retained basis warm-starts the next solve.
    """
    import highspy

    h = model._highs if incremental else None
    if h is None:
        h = _highs_instance(options)
        model._synced = _Pending()
        if incremental:
            model._highs = h
    sync = model._synced
    n, m = model.n_vars, model.n_rows
    if n > sync.cols:
        new = slice(sync.cols, n)
        k = n - sync.cols
        empty = np.zeros(0, np.int32)
        h.addCols(k, _f64(model._cost[new]), _f64(model._lb[new]), _f64(model._ub[new]), 0, empty, empty, np.zeros(0))
    old_costs = sorted(c for c in sync.costs if c < sync.cols)
    if old_costs:
        h.changeColsCost(len(old_costs), _i32(old_costs), _f64([model._cost[c] for c in old_costs]))
    old_bounds = sorted(c for c in sync.bounds if c < sync.cols)
    if old_bounds:
        h.changeColsBounds(
            len(old_bounds),
            _i32(old_bounds),
            _f64([model._lb[c] for c in old_bounds]),
            _f64([model._ub[c] for c in old_bounds]),
        )
    if m > sync.rows:
        A = model.matrix(sync.rows, m)
        lo, hi = model.row_bounds(sync.rows, m)
        lo = np.where(np.isinf(lo), -highspy.kHighsInf, lo)
        hi = np.where(np.isinf(hi), highspy.kHighsInf, hi)
        h.addRows(m - sync.rows, _f64(lo), _f64(hi), A.nnz, _i32(A.indptr[:-1]), _i32(A.indices), _f64(A.data))
    h.changeObjectiveOffset(float(model.constant))
    if sync.cols == 0 and sync.rows == 0:
        basis = _start_basis(model)
        if basis is not None:
            h.setBasis(basis)
    model._synced = _Pending(cols=n, rows=m)

    h.run()
    status = h.getModelStatus()
    S = highspy.HighsModelStatus
    info = h.getInfo()
    iters = int(info.simplex_iteration_count) + int(getattr(info, "ipm_iteration_count", 0))
    if status == S.kOptimal:
        sol = h.getSolution()
        x = np.array(sol.col_value)
        duals = np.array(sol.row_dual) if sol.dual_valid else None
        return LpSolution("optimal", float(info.objective_function_value), x, duals, "highs", iters)
    if status == S.kInfeasible:
        return LpSolution("infeasible", backend="highs", iterations=iters)
    if status in (S.kUnbounded, S.kUnboundedOrInfeasible):
        # disambiguate with a cold solve without presolve
        if status == S.kUnboundedOrInfeasible and incremental:
            model._highs = None
            return solve_highs(model, incremental=False, presolve="off", **options)
        return LpSolution("unbounded" if status == S.kUnbounded else "infeasible", backend="highs", iterations=iters)
    if incremental:
        # a warm start that ends nowhere gets one cold retry on a fresh instance
        model._highs = None
        return solve_highs(model, incremental=False, **options)
    return LpSolution("error", backend="highs", iterations=iters, message=h.modelStatusToString(status))


def _ub_eq_form(model: LpModel):
    A = model.matrix().tocsr()
    senses = np.array(model.senses)
    b = model.rhs
    le = senses == "<="
    ge = senses == ">="
    eq = senses == "="
    import scipy.sparse as sp

    A_ub = sp.vstack([A[le], -A[ge]]).tocsr()
    b_ub = np.concatenate([b[le], -b[ge]])
    return A_ub, b_ub, A[eq], b[eq], le, ge, eq


def solve_scipy(model: LpModel, **options) -> LpSolution:
    """One-shot HiGHS through ``scipy.optimize.linprog``."""
    from scipy.optimize import linprog

    A_ub, b_ub, A_eq, b_eq, le, ge, eq = _ub_eq_form(model)
    bounds = np.column_stack([model.lb, model.ub])
    bounds = [(None if math.isinf(lo) else lo, None if math.isinf(hi) else hi) for lo, hi in bounds]
    res = linprog(
        model.cost,
        A_ub=A_ub if A_ub.shape[0] else None,
        b_ub=b_ub if A_ub.shape[0] else None,
        A_eq=A_eq if A_eq.shape[0] else None,
        b_eq=b_eq if A_eq.shape[0] else None,
        bounds=bounds,
        method=options.get("method", "highs"),
        options={"primal_feasibility_tolerance": FEAS_TOL / 10, "dual_feasibility_tolerance": OPT_TOL},
    )
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        duals = np.zeros(model.n_rows)
        if res.ineqlin is not None and A_ub.shape[0]:
            m_le = int(le.sum())
            duals[le] = res.ineqlin.marginals[:m_le]
            duals[ge] = -res.ineqlin.marginals[m_le:]
        if res.eqlin is not None and A_eq.shape[0]:
            duals[eq] = res.eqlin.marginals
        return LpSolution("optimal", float(res.fun + model.constant), np.asarray(res.x), duals, "scipy", iters)
    status = {2: "infeasible", 3: "unbounded"}.get(res.status, "error")
    return LpSolution(status, backend="scipy", iterations=iters, message=res.message)


def solve_simplex(model: LpModel, **options) -> LpSolution:
    """Bundled dense two-phase simplex with Bland's rule."""
    A = model.matrix().toarray()
    res = simplex(model.cost, A, model.senses, model.rhs, model.lb, model.ub, **options)
    if res.status == "optimal":
        return LpSolution("optimal", float(res.fun + model.constant), res.x, res.duals, "simplex", res.nit)
    return LpSolution(res.status, backend="simplex", iterations=res.nit, message=res.message)


BACKENDS = {"highs": solve_highs, "scipy": solve_scipy, "simplex": solve_simplex}
