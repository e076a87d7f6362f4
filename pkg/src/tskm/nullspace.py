"""SVD-based elimination of equality constraints.

Every solution of ``C z = d`` is written as ``z = z_proj + N w`` where ``N``
is an orthonormal basis of ``null(C)`` and ``z_proj`` is the point of the
affine set nearest to the start ``y0``. Inequalities ``A z <= b`` become
``(A N) w <= b - A z_proj`` in the reduced coordinates ``w``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConstraintSystem, TransformedSystem, check, ineq_violation


class InconsistentEqualities(ValueError):
    """``d`` is not in the range of ``C``."""


class InfeasibleFullRank(ValueError):
    """``C`` pins a unique point and that point violates an inequality."""


@dataclass(frozen=True, eq=False)
class Factorization:
    """Reusable pieces of the SVD of ``C`` (for a fixed equality matrix).

    ``U_r``, ``s_r``, ``V_r`` hold the singular triplets above the rank
    cutoff, ``N`` the orthonormal null-space basis.
    """

    U_r: np.ndarray
    s_r: np.ndarray
    V_r: np.ndarray
    N: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.s_r)

    def pinv_apply(self, r):
        """``C^+ r``."""
        return self.V_r @ ((self.U_r.T @ r) / self.s_r)


def factorize(C) -> Factorization:
    """SVD of ``C`` with the numerical-rank cutoff ``max(q, n) * eps * s_max``."""
    C = np.asarray(C, dtype=np.float64)
    q, n = C.shape
    if q == 0:
        return Factorization(np.zeros((0, 0)), np.zeros(0), np.zeros((n, 0)), np.eye(n))
    U, s, Vt = np.linalg.svd(C, full_matrices=True)
    tol = max(q, n) * np.finfo(np.float64).eps * (s[0] if len(s) else 0.0)
    r = int(np.count_nonzero(s > tol))
    if r == 0:
        return Factorization(np.zeros((q, 0)), np.zeros(0), np.zeros((n, 0)), np.eye(n))
    return Factorization(U[:, :r], s[:r], Vt[:r].T, np.ascontiguousarray(Vt[r:].T))


def equality_tolerance(d) -> float:
    return 1e-8 * max(1.0, float(np.max(np.abs(d))) if len(d) else 1.0)


def transform(system: ConstraintSystem, factorization: Factorization | None = None) -> TransformedSystem:
    """Rewrite the mixed system as a pure inequality system in ``w``.

    Parameters
    ----------
    system : ConstraintSystem
        Must pass validation. A missing ``y0`` is taken as the zero vector.
    factorization : Factorization, optional
        Precomputed :func:`factorize` output for ``system.C``; skips the SVD.

    Raises
    ------
    InconsistentEqualities
        If ``C z_proj`` misses ``d`` by more than ``1e-8 * max(1, |d|_inf)``.
    InfeasibleFullRank
        If ``C`` has full column rank and its unique solution breaks an inequality.
    """
    check(system)
    C, d, A, b = system.C, system.d, system.A, system.b
    y0 = system.start()
    f = factorization if factorization is not None else factorize(C)

    if f.rank == 0:
        z_proj = y0
    else:
        z_proj = y0 - f.pinv_apply(C @ y0 - d)
    if system.q and float(np.max(np.abs(C @ z_proj - d))) > equality_tolerance(d):
        raise InconsistentEqualities(
            f"equality residual {np.max(np.abs(C @ z_proj - d)):.3e} after projection; d is not in range(C)"
        )

    N = f.N
    if f.rank == 0:
        A_new = A.copy()
    else:
        A_new = A @ N
    b_new = b - A @ z_proj
    if N.shape[1] == 0 and A.shape[0]:
        slack = 1e-9 * max(1.0, float(np.max(np.abs(b))))
        if ineq_violation(A, b, z_proj) > slack:
            raise InfeasibleFullRank(
                f"C fixes z uniquely but it violates inequalities by {ineq_violation(A, b, z_proj):.3e}"
            )
    projector = f.V_r @ f.V_r.T
    return TransformedSystem(N=N, z_proj=z_proj, A_new=A_new, b_new=b_new, rank_C=f.rank, row_projector=projector)


def recover(t: TransformedSystem, w) -> np.ndarray:
    """Map reduced coordinates back: ``z = z_proj + N w``."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (t.m,):
        raise ValueError(f"w has shape {w.shape}, expected ({t.m},)")
    if t.m == 0:
        return t.z_proj.copy()
    return t.z_proj + t.N @ w
