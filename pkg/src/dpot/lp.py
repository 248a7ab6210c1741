"""Equality-form linear programs with bounded variables.

Programs are solved with HiGHS through :func:`scipy.optimize.linprog`: dual
simplex for small programs, interior point followed by crossover for large
ones. Both return basic (vertex) solutions and are deterministic for
identical input; a crossover result with more nonzeros than rows is
re-solved with the simplex method. Every optimal solution is re-checked here:
primal residuals against the stated tolerances, and the primal objective
against the dual objective rebuilt from the reported multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sps
from scipy.optimize import linprog

from .errors import InvalidInputError, SolverError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-8
DUALITY_TOL = 1e-7
IPM_MIN_VARS = 20_000


@dataclass(frozen=True)
class LinearProgram:
    """minimize ``c @ x`` subject to ``A @ x == b`` and ``lower <= x <= upper``.

    ``lower`` defaults to 0; use ``-inf`` for free variables. ``upper``
    defaults to ``+inf``.
    """

    c: np.ndarray
    A: sps.csr_matrix
    b: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        A = sps.csr_matrix(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        n = len(c)
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if A.shape != (len(b), n):
            raise InvalidInputError(f"constraint matrix shape {A.shape} does not match "
                                    f"{len(b)} rows and {n} variables")
        if len(lower) != n or len(upper) != n:
            raise InvalidInputError("bound vectors must have one entry per variable")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b)) and np.all(np.isfinite(A.data))):
            raise InvalidInputError("program coefficients must be finite")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)) or np.any(lower == np.inf) \
                or np.any(upper == -np.inf):
            raise InvalidInputError("invalid variable bounds")
        for name, val in (("c", c), ("A", A), ("b", b), ("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, val)

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_eq(self) -> int:
        return len(self.b)


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective_value: Optional[float] = None
    dual_objective: Optional[float] = None
    eq_duals: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def primal_residual(p: LinearProgram, x) -> float:
    return float(np.max(np.abs(p.A @ x - p.b), initial=0.0))


def solve_lp(p: LinearProgram, max_iter: Optional[int] = None, method: str = "auto") -> LpSolution:
    """Solve ``p`` to a basic optimal solution.

    ``method`` is ``"simplex"``, ``"ipm"`` (interior point with crossover) or
    ``"auto"`` (ipm from ``IPM_MIN_VARS`` variables on). Infeasible and
    unbounded programs are reported through ``status``. Iteration limits,
    numerical trouble and failed post-solve checks raise
    :class:`SolverError` with diagnostics attached.
    """
    if method not in ("auto", "simplex", "ipm"):
        raise InvalidInputError(f"unknown LP method {method!r}")
    if method == "auto":
        method = "ipm" if p.n_vars >= IPM_MIN_VARS else "simplex"
    options = {
        "primal_feasibility_tolerance": 1e-10,
        "dual_feasibility_tolerance": 1e-10,
        "presolve": True,
    }
    if max_iter is not None:
        options["maxiter"] = int(max_iter)
    bounds = np.column_stack([
        np.where(np.isfinite(p.lower), p.lower, -np.inf),
        np.where(np.isfinite(p.upper), p.upper, np.inf),
    ])
    A_eq = p.A if p.n_eq else None
    b_eq = p.b if p.n_eq else None
    highs = "highs-ipm" if method == "ipm" else "highs-ds"
    res = linprog(p.c, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method=highs, options=options)
    if method == "ipm" and res.status == 0 and np.count_nonzero(res.x) > p.n_eq:
        return solve_lp(p, max_iter, "simplex")
    diag = {"status": res.status, "message": res.message, "n_vars": p.n_vars, "n_eq": p.n_eq,
            "iterations": getattr(res, "nit", None)}
    if res.status == 2:
        return LpSolution(INFEASIBLE, iterations=res.nit)
    if res.status == 3:
        return LpSolution(UNBOUNDED, iterations=res.nit)
    if res.status != 0:
        raise SolverError(f"LP solve failed: {res.message}", diag)

    x = np.asarray(res.x, dtype=float)
    # HiGHS may leave values a hair outside their bounds; snap them back
    x = np.clip(x, p.lower, p.upper)
    resid = primal_residual(p, x)
    b_scale = 1.0 + float(np.max(np.abs(p.b), initial=0.0))
    if resid > FEAS_TOL * b_scale:
        raise SolverError(f"primal residual {resid:.3e} exceeds tolerance", {**diag, "residual": resid})

    objective = float(p.c @ x)
    y = np.zeros(p.n_eq) if res.eqlin is None else np.asarray(res.eqlin.marginals, dtype=float)
    lam_lo = np.asarray(res.lower.marginals, dtype=float)
    lam_hi = np.asarray(res.upper.marginals, dtype=float)
    fin_lo = np.isfinite(p.lower)
    fin_hi = np.isfinite(p.upper)
    dual = float(p.b @ y + p.lower[fin_lo] @ lam_lo[fin_lo] + p.upper[fin_hi] @ lam_hi[fin_hi])
    if abs(objective - dual) > DUALITY_TOL * (1.0 + abs(objective)):
        raise SolverError(f"duality gap {abs(objective - dual):.3e} exceeds tolerance",
                          {**diag, "primal": objective, "dual": dual})
    return LpSolution(OPTIMAL, x, objective, dual, y, int(res.nit))
