"""Small dense LP solves with primal and dual solutions (HiGHS via scipy)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog


@dataclass
class LPSolution:
    """Result of ``min c.x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, lo <= x <= hi``.

    Duals follow the sensitivity convention: ``eq_duals = d value / d b_eq``
    and ``ub_duals = d value / d b_ub`` (so ``ub_duals <= 0``).
    """

    status: str
    x: np.ndarray | None
    value: float
    eq_duals: np.ndarray
    ub_duals: np.ndarray
    residual: float = float("nan")
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


_STATUS = {0: "optimal", 1: "iteration_limit", 2: "infeasible", 3: "unbounded", 4: "error"}


def _mat(A, ncols):
    if A is None:
        return None
    if sp.issparse(A):
        return A.tocsr()
    A = np.asarray(A, dtype=float)
    return A.reshape(-1, ncols)


def restricted_lp_solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                        bounds=(0, None)) -> LPSolution:
    """Solve a small LP; the complementary-slackness residual is reported.

    Infeasible and unbounded problems come back with the matching ``status``
    rather than raising.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub, A_eq = _mat(A_ub, n), _mat(A_eq, n)
    if A_ub is not None and A_ub.shape[0] == 0:
        A_ub = b_ub = None
    if A_eq is not None and A_eq.shape[0] == 0:
        A_eq = b_eq = None
    lo, hi = _bounds_arrays(bounds, n)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=np.column_stack([lo, hi]), method="highs")
    status = _STATUS.get(res.status, "error")
    m_eq = 0 if A_eq is None else A_eq.shape[0]
    m_ub = 0 if A_ub is None else A_ub.shape[0]
    if status != "optimal":
        return LPSolution(status, None, float("nan"), np.zeros(m_eq), np.zeros(m_ub),
                          message=res.message)
    y_eq = np.asarray(res.eqlin.marginals) if m_eq else np.zeros(0)
    y_ub = np.asarray(res.ineqlin.marginals) if m_ub else np.zeros(0)
    x = np.asarray(res.x)
    residual = _cs_residual(c, x, A_ub, b_ub, y_ub, A_eq, b_eq, y_eq, lo, hi, res)
    return LPSolution(status, x, float(res.fun), y_eq, y_ub, residual, res.message)


def _cs_residual(c, x, A_ub, b_ub, y_ub, A_eq, b_eq, y_eq, lo, hi, res) -> float:
    """Largest complementary-slackness product, plus the duality gap."""
    products = [0.0]
    dual_obj = 0.0
    if A_eq is not None:
        dual_obj += float(np.asarray(b_eq) @ y_eq)
    if A_ub is not None:
        slack = np.asarray(b_ub) - A_ub @ x
        products.append(float(np.max(np.abs(slack * y_ub), initial=0.0)))
        dual_obj += float(np.asarray(b_ub) @ y_ub)
    lo_m = np.asarray(res.lower.marginals)
    hi_m = np.asarray(res.upper.marginals)
    fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
    dual_obj += float(lo[fin_lo] @ lo_m[fin_lo]) + float(hi[fin_hi] @ hi_m[fin_hi])
    if fin_lo.any():
        products.append(float(np.max(np.abs((x - lo)[fin_lo] * lo_m[fin_lo]))))
    if fin_hi.any():
        products.append(float(np.max(np.abs((hi - x)[fin_hi] * hi_m[fin_hi]))))
    gap = abs(float(c @ x) - dual_obj)
    return max(products) + gap


def _bounds_arrays(bounds, n) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper bound vectors from a shared pair, a list of pairs, or an (n, 2) array."""
    if bounds is None:
        bounds = (0, None)
    if isinstance(bounds, tuple) and len(bounds) == 2 and np.ndim(bounds[0]) == 0 \
            and np.ndim(bounds[1]) == 0:
        pairs = [bounds] * n
    else:
        pairs = list(bounds)
    lo = np.array([-np.inf if p[0] is None else float(p[0]) for p in pairs])
    hi = np.array([np.inf if p[1] is None else float(p[1]) for p in pairs])
    return lo, hi
