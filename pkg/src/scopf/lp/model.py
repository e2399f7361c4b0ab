"""Incremental linear-programming model.

Variables and rows are appended over the life of a model and keep their
integer handles, so a decomposition loop can add cuts and re-solve. The
persistent HiGHS backend only pushes what changed since the last solve,
which keeps the previous basis as a warm start.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

INF = math.inf

SENSES = ("<=", ">=", "=")

Coeffs = Union[Mapping[int, float], tuple]


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded" | "error"
    objective: float = math.nan
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    backend: str = ""
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def __getitem__(self, handle):
        return self.x[handle]


@dataclass
class _Pending:
    cols: int = 0
    rows: int = 0
    costs: set = field(default_factory=set)
    bounds: set = field(default_factory=set)
    offset: bool = False


class _Names:
    """Variable or row names, stored per block so large models stay small.

    A block added under ``prefix`` names its members ``prefix[0]``,
    ``prefix[1]``, ...; single entries keep their own name.
    """

    def __init__(self, default: str):
        self._default = default
        self._starts: list = []
        self._blocks: list = []  # (prefix or None, explicit name)
        self._n = 0

    def __len__(self) -> int:
        return self._n

    def add(self, name: Optional[str] = None):
        self._starts.append(self._n)
        self._blocks.append((None, name or f"{self._default}{self._n}"))
        self._n += 1

    def add_block(self, n: int, prefix: str):
        if n:
            self._starts.append(self._n)
            self._blocks.append((prefix, None))
            self._n += n

    def __getitem__(self, k: int) -> str:
        if not 0 <= k < self._n:
            raise IndexError(k)
        b = bisect.bisect_right(self._starts, k) - 1
        prefix, name = self._blocks[b]
        return name if prefix is None else f"{prefix}[{k - self._starts[b]}]"


class LpModel:
    """Minimization LP ``min c.x + constant  s.t.  rows, lb <= x <= ub``."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self._lb: list = []
        self._ub: list = []
        self._cost: list = []
        self._names = _Names("x")
        self._blocks: list = []  # (first row, csr block) in row order
        self._pend_idx: list = []
        self._pend_val: list = []
        self._row_sense: list = []
        self._row_rhs: list = []
        self._row_names = _Names("r")
        self.constant = 0.0
        self._synced = _Pending()
        self._highs = None
        # optional starting basis for a fresh HiGHS instance: the basic columns,
        # one per equality row (inequality rows take their slacks)
        self.start_basis: Optional[np.ndarray] = None

    # -- building ------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self._lb)

    @property
    def n_rows(self) -> int:
        return len(self._row_rhs)

    def add_variable(self, name: Optional[str] = None, lb: float = 0.0, ub: float = INF, cost: float = 0.0) -> int:
        if lb > ub:
            raise ValueError(f"variable {name}: lb {lb} > ub {ub}")
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._cost.append(float(cost))
        self._names.add(name)
        return len(self._lb) - 1

    def add_variables(self, n: int, lb=0.0, ub=INF, cost=0.0, prefix: str = "x") -> np.ndarray:
        lb = np.broadcast_to(np.asarray(lb, float), (n,))
        ub = np.broadcast_to(np.asarray(ub, float), (n,))
        cost = np.broadcast_to(np.asarray(cost, float), (n,))
        if np.any(lb > ub):
            raise ValueError(f"{prefix}: some lb > ub")
        start = self.n_vars
        self._lb.extend(lb.tolist())
        self._ub.extend(ub.tolist())
        self._cost.extend(cost.tolist())
        self._names.add_block(n, prefix)
        return np.arange(start, start + n)

    def _check_handle(self, idx: np.ndarray):
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_vars):
            raise KeyError(f"unknown variable handle in {idx.tolist()}")

    @staticmethod
    def _split(coeffs: Coeffs):
        if isinstance(coeffs, Mapping):
            idx = np.fromiter(coeffs.keys(), dtype=np.int64, count=len(coeffs))
            val = np.fromiter(coeffs.values(), dtype=float, count=len(coeffs))
        else:
            idx, val = coeffs
            idx = np.asarray(idx, dtype=np.int64).ravel()
            val = np.asarray(val, dtype=float).ravel()
            if idx.shape != val.shape:
                raise ValueError("index and value arrays differ in length")
        return idx, val

    def add_constraint(self, coeffs: Coeffs, sense: str, rhs: float, name: Optional[str] = None) -> int:
        if sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}, got {sense!r}")
        idx, val = self._split(coeffs)
        self._check_handle(idx)
        if idx.size and np.unique(idx).size != idx.size:
            order = np.argsort(idx, kind="stable")
            idx, val = idx[order], val[order]
            uniq, start = np.unique(idx, return_index=True)
            val = np.add.reduceat(val, start)
            idx = uniq
        self._pend_idx.append(idx)
        self._pend_val.append(val)
        self._row_sense.append(sense)
        self._row_rhs.append(float(rhs))
        self._row_names.add(name)
        return self.n_rows - 1

    def add_constraints(self, A, senses, rhs, prefix: str = "r") -> np.ndarray:
        """Append the rows of sparse ``A`` in one go; returns their indices.

        ``senses`` is one sense for all rows or one per row. Duplicate
        entries in ``A`` are summed.
        """
        A = sp.csr_matrix(A, dtype=float)
        A.sum_duplicates()
        m = A.shape[0]
        if A.shape[1] > self.n_vars:
            raise KeyError(f"block references {A.shape[1]} columns, model has {self.n_vars}")
        senses = [senses] * m if isinstance(senses, str) else list(senses)
        rhs = np.broadcast_to(np.asarray(rhs, float), (m,))
        if len(senses) != m:
            raise ValueError("one sense per row expected")
        bad = set(senses) - set(SENSES)
        if bad:
            raise ValueError(f"sense must be one of {SENSES}, got {sorted(bad)}")
        self._flush()
        start = self.n_rows
        if m:
            self._blocks.append((start, A))
        self._row_sense.extend(senses)
        self._row_rhs.extend(rhs.tolist())
        self._row_names.add_block(m, prefix)
        return np.arange(start, start + m)

    def _flush(self):
        """Move single rows added since the last flush into one CSR block."""
        if not self._pend_idx:
            return
        lens = [i.size for i in self._pend_idx]
        indptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        indices = np.concatenate(self._pend_idx) if indptr[-1] else np.zeros(0, np.int64)
        data = np.concatenate(self._pend_val) if indptr[-1] else np.zeros(0)
        m = len(lens)
        ncols = int(indices.max()) + 1 if indices.size else 0
        block = sp.csr_matrix((data, indices, indptr), shape=(m, ncols))
        self._blocks.append((self.n_rows - m, block))
        self._pend_idx, self._pend_val = [], []

    def set_objective(self, coeffs: Coeffs, constant: float = 0.0):
        idx, val = self._split(coeffs)
        self._check_handle(idx)
        for k in range(self.n_vars):
            if self._cost[k] != 0.0:
                self._cost[k] = 0.0
                self._synced.costs.add(k)
        self.add_to_objective((idx, val), constant - self.constant)

    def add_to_objective(self, coeffs: Coeffs, constant: float = 0.0):
        idx, val = self._split(coeffs)
        self._check_handle(idx)
        for k, v in zip(idx.tolist(), val.tolist()):
            self._cost[k] += v
            self._synced.costs.add(k)
        if constant:
            self.constant += float(constant)
            self._synced.offset = True

    def set_bounds(self, var: int, lb: float, ub: float):
        self._check_handle(np.array([var]))
        if lb > ub:
            raise ValueError(f"lb {lb} > ub {ub}")
        self._lb[var], self._ub[var] = float(lb), float(ub)
        self._synced.bounds.add(var)

    # -- views -----------------------------------------------------------------

    @property
    def lb(self) -> np.ndarray:
        return np.array(self._lb)

    @property
    def ub(self) -> np.ndarray:
        return np.array(self._ub)

    @property
    def cost(self) -> np.ndarray:
        return np.array(self._cost)

    @property
    def senses(self) -> list:
        return list(self._row_sense)

    @property
    def rhs(self) -> np.ndarray:
        return np.array(self._row_rhs)

    def var_name(self, k: int) -> str:
        return self._names[k]

    def row(self, r: int):
        if not 0 <= r < self.n_rows:
            raise IndexError(f"row {r} out of range")
        self._flush()
        starts = [b[0] for b in self._blocks]
        first, block = self._blocks[bisect.bisect_right(starts, r) - 1]
        lo, hi = block.indptr[r - first], block.indptr[r - first + 1]
        return block.indices[lo:hi].astype(np.int64), block.data[lo:hi].copy(), self._row_sense[r], self._row_rhs[r]

    def matrix(self, start: int = 0, stop: Optional[int] = None) -> sp.csr_matrix:
        stop = self.n_rows if stop is None else stop
        self._flush()
        parts = []
        for first, block in self._blocks:
            last = first + block.shape[0]
            if last <= start or first >= stop:
                continue
            b = block[max(start, first) - first : min(stop, last) - first]
            parts.append(sp.csr_matrix((b.data, b.indices, b.indptr), shape=(b.shape[0], self.n_vars)))
        if not parts:
            return sp.csr_matrix((stop - start, self.n_vars))
        return sp.vstack(parts, format="csr")

    def row_bounds(self, start: int = 0, stop: Optional[int] = None):
        stop = self.n_rows if stop is None else stop
        s = np.array(self._row_sense[start:stop], dtype=object)
        b = np.array(self._row_rhs[start:stop], dtype=float)
        lo = np.where(s == "<=", -INF, b)
        hi = np.where(s == ">=", INF, b)
        return lo, hi

    def objective_value(self, x) -> float:
        return float(np.dot(self.cost, x) + self.constant)

    def max_violation(self, x) -> float:
        """Largest bound or row violation of the point ``x``."""
        x = np.asarray(x, float)
        worst = float(max(np.max(self.lb - x, initial=0.0), np.max(x - self.ub, initial=0.0)))
        if self.n_rows:
            act = self.matrix() @ x
            lo, hi = self.row_bounds()
            worst = max(worst, float(np.max(lo - act, initial=0.0)), float(np.max(act - hi, initial=0.0)))
        return worst

    # -- solving ---------------------------------------------------------------

    def solve(self, backend: str = "highs", **options) -> LpSolution:
        """Solve with ``backend`` in {"highs", "scipy", "simplex"}.

        Infeasibility and unboundedness come back as ``status``, never raised.
        """
        from . import backends

        try:
            fn = backends.BACKENDS[backend]
        except KeyError:
            raise ValueError(f"unknown LP backend {backend!r}; choose from {sorted(backends.BACKENDS)}") from None
        return fn(self, **options)

    def to_lp_format(self) -> str:
        """CPLEX-LP text of the model, for debugging."""

        def term(v, name):
            sign = "-" if v < 0 else "+"
            return f"{sign} {abs(v):.12g} {name}"

        lines = [f"\\ {self.name}", "Minimize"]
        obj = [term(c, self._names[k]) for k, c in enumerate(self._cost) if c != 0.0]
        if self.constant:
            obj.append(f"{'-' if self.constant < 0 else '+'} {abs(self.constant):.12g} constant")
        lines.append(" obj: " + (" ".join(obj) if obj else "0 " + (self._names[0] if self._names else "")))
        lines.append("Subject To")
        op = {"<=": "<=", ">=": ">=", "=": "="}
        for r in range(self.n_rows):
            idx, val, s, b = self.row(r)
            lhs = " ".join(term(v, self._names[k]) for k, v in zip(idx.tolist(), val.tolist())) or "0 x0"
            lines.append(f" {self._row_names[r]}: {lhs} {op[s]} {b:.12g}")
        lines.append("Bounds")
        for k in range(self.n_vars):
            lo, hi = self._lb[k], self._ub[k]
            lo_s = "-inf" if lo == -INF else f"{lo:.12g}"
            hi_s = "+inf" if hi == INF else f"{hi:.12g}"
            lines.append(f" {lo_s} <= {self._names[k]} <= {hi_s}")
        if self.constant:
            lines.append(" constant = 1")
        lines.append("End")
        return "\n".join(lines) + "\n"
