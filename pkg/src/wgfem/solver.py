"""Direct solution of the assembled sparse symmetric indefinite system.

The saddle-point block structure rules out plain Cholesky, so the solver
uses SuperLU with partial pivoting. The contract is the certified residual,
not the factorization: the relative residual is always measured against the
original assembled triplets and must come out below 1e-10.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import SparseSystem

__all__ = ["SolverError", "SolverAccuracyError", "SolveReport", "solve", "solve_dense"]

RESIDUAL_LIMIT = 1e-10
# one step of iterative refinement is applied inside this residual window
REFINE_LOW = 1e-12
REFINE_HIGH = 1e-8


class SolverError(Exception):
    pass


class SolverAccuracyError(SolverError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(
            f"relative residual {residual:.3e} exceeds the {RESIDUAL_LIMIT:g} limit"
        )


@dataclass(frozen=True)
class SolveReport:
    solution: np.ndarray
    relative_residual: float
    nnz_factor: int
    wall_time: float


def _residual(A, b, x) -> float:
    r = b - A @ x
    nb = np.linalg.norm(b)
    nr = np.linalg.norm(r)
    return float(nr / nb) if nb > 0.0 else float(nr)


def solve(system: SparseSystem) -> SolveReport:
    """Factor and solve; certifies the residual against the original triplets."""
    t0 = time.perf_counter()
    A = system.matrix()
    b = system.rhs
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    x = lu.solve(b)
    if not np.isfinite(x).all():
        raise SolverError("factorization produced non-finite values")
    res = _residual(A, b, x)
    if REFINE_LOW < res <= REFINE_HIGH:
        x = x + lu.solve(b - A @ x)
        res = _residual(A, b, x)
    if res > RESIDUAL_LIMIT:
        raise SolverAccuracyError(res)
    return SolveReport(
        solution=x,
        relative_residual=res,
        nnz_factor=int(lu.L.nnz + lu.U.nnz),
        wall_time=time.perf_counter() - t0,
    )


def solve_dense(system: SparseSystem, limit: int = 200) -> np.ndarray:
    """Dense-factorization oracle for small systems (tests only)."""
    if system.n > limit:
        raise SolverError(f"dense oracle limited to {limit} unknowns, got {system.n}")
    A = system.matrix().toarray()
    return np.linalg.solve(A, system.rhs)
