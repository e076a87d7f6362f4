"""Seeded random problem instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import ConstraintSystem, check
from .pipeline import tskm_solve
from .skm import SkmConfig, make_rng


def _unit_rows(rng, k, n):
    M = rng.standard_normal((k, n))
    return M / np.linalg.norm(M, axis=1, keepdims=True)


def gen_feasible_mixed(n: int, p: int, q: int, seed: int, margin: float = 0.1) -> ConstraintSystem:
    """Random ``{A z <= b, C z = d}`` around a known interior point.

    ``A`` and ``C`` have standard Gaussian entries with rows scaled to unit
    norm. A Gaussian witness ``z_w`` satisfies ``C z_w = d`` and
    ``A z_w <= b - margin`` (slack is ``margin + U(0, 1)``). The witness is
    returned as the system's ``y0``; pair with :func:`gen_infeasible_start`
    to get a point that needs repair.
    """
    if n < 1 or p < 0 or q < 0:
        raise ValueError(f"invalid shape n={n}, p={p}, q={q}")
    if q >= n:
        raise ValueError("need q < n for a nontrivial null space")
    if margin < 0:
        raise ValueError("margin must be >= 0")
    rng = make_rng(seed)
    z_w = rng.standard_normal(n)
    A = _unit_rows(rng, p, n) if p else np.zeros((0, n))
    C = _unit_rows(rng, q, n) if q else np.zeros((0, n))
    slack = margin + rng.uniform(0.0, 1.0, p)
    return check(ConstraintSystem(A=A, b=A @ z_w + slack, C=C, d=C @ z_w, y0=z_w))


def max_violation(system: ConstraintSystem, z) -> float:
    """Largest violation over both blocks."""
    return max(system.violations(z))


def _feasible_anchor(system):
    if system.y0 is not None and max_violation(system, system.y0) <= 1e-9:
        return np.array(system.y0)
    res = tskm_solve(system, SkmConfig(tolerance=1e-12, max_iters=1_000_000))
    if max_violation(system, res.z_star) > 1e-8:
        raise ValueError("could not find a feasible point to start from")
    return res.z_star


def gen_infeasible_start(system: ConstraintSystem, seed: int, violation_scale: float = 100.0) -> np.ndarray:
    """A point whose largest constraint violation equals ``violation_scale``.

    Starts at a feasible point (``system.y0`` when it is feasible, as
    produced by :func:`gen_feasible_mixed`) and walks along a random
    direction until the max violation, a convex piecewise-linear function of
    the step length, hits the target.
    """
    anchor = _feasible_anchor(system)
    if violation_scale <= 0:
        return anchor
    rng = make_rng(seed)
    for _ in range(100):
        u = rng.standard_normal(len(anchor))
        u /= np.linalg.norm(u)

        def excess(t):
            return max_violation(system, anchor + t * u) - violation_scale

        hi = 1.0
        while excess(hi) < 0 and hi < 1e12:
            hi *= 2.0
        if excess(hi) < 0:
            # direction lies in the recession cone; try another
            continue
        t = brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-15)
        return anchor + t * u
    raise ValueError("no direction leaves the feasible region")


@dataclass(frozen=True, eq=False)
class QpFamily:
    """``min 1/2 y^T Q y + p^T y  s.t.  A y = x,  G y <= h`` for inputs ``x``.

    Only the constraints are used by the solver; ``Q`` and ``p_vec`` are kept
    to score repaired points.
    """

    Q: np.ndarray
    p_vec: np.ndarray
    A: np.ndarray
    G: np.ndarray
    h: np.ndarray

    def system(self, x, y0=None) -> ConstraintSystem:
        return ConstraintSystem(A=self.G, b=self.h, C=self.A, d=np.asarray(x, dtype=np.float64), y0=y0)

    def objective(self, y) -> float:
        return float(0.5 * y @ self.Q @ y + self.p_vec @ y)

    def sample_input(self, seed: int) -> np.ndarray:
        """``x`` uniform on ``[-1, 1]^n_eq``; ``A^+ x`` is then feasible by construction of ``h``."""
        return make_rng(seed).uniform(-1.0, 1.0, self.A.shape[0])


def gen_qp_family(n_var: int, n_eq: int, n_ineq: int, seed: int) -> QpFamily:
    """Random QP family with inputs entering through the equalities.

    ``Q = F F^T / n_var + I`` is positive definite; ``h_i = sum_j |(G A^+)_ij|`` so
    that ``y = A^+ x`` satisfies ``G y <= h`` whenever ``|x|_inf <= 1``.
    """
    if not (0 < n_eq < n_var) or n_ineq < 0:
        raise ValueError(f"invalid QP shape n_var={n_var}, n_eq={n_eq}, n_ineq={n_ineq}")
    rng = make_rng(seed)
    F = rng.standard_normal((n_var, n_var))
    Q = F @ F.T / n_var + np.eye(n_var)
    p_vec = rng.uniform(0.0, 1.0, n_var)
    A = rng.standard_normal((n_eq, n_var))
    G = rng.standard_normal((n_ineq, n_var))
    h = np.sum(np.abs(G @ np.linalg.pinv(A)), axis=1)
    return QpFamily(Q=Q, p_vec=p_vec, A=A, G=G, h=h)
