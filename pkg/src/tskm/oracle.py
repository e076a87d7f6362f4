"""Exact Euclidean projection onto ``{A z <= b, C z = d}`` for small problems.

Two independent exact routes are provided:

* :func:`project_exact` enumerates every candidate active set and keeps the
  KKT point of least distance. Total but exponential, capped at n, p <= 16.
* :func:`project_active_set` runs a primal active-set method from a vertex
  found by an LP, for problems past the enumeration budget.

Both return a :class:`ProjectionCertificate` whose KKT conditions are checked
before returning, so neither can hand back an approximate answer silently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .model import ConstraintSystem, check

MAX_N = 16
MAX_P = 16
FEAS_TOL = 1e-9
DUAL_TOL = 1e-9
STAT_TOL = 1e-8


class Infeasible(ValueError):
    """The feasible region is empty."""


class BudgetExceeded(ValueError):
    """Problem too large for subset enumeration."""


class CertificateError(RuntimeError):
    """The returned point failed its own KKT check."""


@dataclass(frozen=True, eq=False)
class ProjectionCertificate:
    point: np.ndarray
    active_set: tuple[int, ...]
    ineq_multipliers: np.ndarray
    eq_multipliers: np.ndarray
    kkt_residual: float
    y0: np.ndarray

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.point - self.y0))


@dataclass(frozen=True)
class _Equalities:
    """Equalities rewritten with orthonormal rows: ``Q z = e``, ``Q = V_r^T``."""

    Q: np.ndarray
    e: np.ndarray
    # maps multipliers of Q back to multipliers of the original C
    back: np.ndarray


def _reduce_equalities(C, d) -> _Equalities:
    q, n = C.shape
    if q == 0:
        return _Equalities(np.zeros((0, n)), np.zeros(0), np.zeros((0, 0)))
    U, s, Vt = np.linalg.svd(C, full_matrices=False)
    r = int(np.count_nonzero(s > max(q, n) * np.finfo(float).eps * s[0])) if s[0] > 0 else 0
    U, s, Vt = U[:, :r], s[:r], Vt[:r]
    e = (U.T @ d) / s
    resid = Vt.T @ e
    if len(d) and float(np.max(np.abs(C @ resid - d))) > 1e-8 * max(1.0, float(np.max(np.abs(d)))):
        raise Infeasible("equality constraints are inconsistent")
    return _Equalities(Vt, e, U / s)


def _solve_on(M, rhs, y0, rank_tol=1e-10):
    """Nearest point to ``y0`` on ``{M z = rhs}`` and the multipliers ``mu``
    with ``(z - y0) + M^T mu = 0``; ``None`` when ``M`` lacks full row rank."""
    if M.shape[0] == 0:
        return y0.copy(), np.zeros(0)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[-1] <= rank_tol * max(1.0, s[0]):
        return None
    mu = U @ ((U.T @ (M @ y0 - rhs)) / s**2)
    z = y0 - M.T @ mu
    return z, mu


def _certificate(system, eqs, y0, z, W, lam, nu_hat) -> ProjectionCertificate:
    nu = eqs.back @ nu_hat if len(nu_hat) else np.zeros(system.q)
    grad = (z - y0) + system.A[list(W)].T @ lam + system.C.T @ nu
    kkt = float(np.max(np.abs(grad))) if len(grad) else 0.0
    return ProjectionCertificate(
        point=z,
        active_set=tuple(sorted(int(i) for i in W)),
        ineq_multipliers=lam,
        eq_multipliers=nu,
        kkt_residual=kkt,
        y0=y0,
    )


def _verify(system, cert: ProjectionCertificate):
    ineq, eq = system.violations(cert.point)
    problems = []
    if ineq > FEAS_TOL:
        problems.append(f"inequality violation {ineq:.3e}")
    if eq > FEAS_TOL * max(1.0, float(np.max(np.abs(system.d))) if system.q else 1.0):
        problems.append(f"equality residual {eq:.3e}")
    if len(cert.ineq_multipliers) and float(np.min(cert.ineq_multipliers)) < -DUAL_TOL:
        problems.append(f"negative multiplier {np.min(cert.ineq_multipliers):.3e}")
    if cert.kkt_residual > STAT_TOL:
        problems.append(f"stationarity residual {cert.kkt_residual:.3e}")
    if problems:
        raise CertificateError("; ".join(problems))


def _start(system, y0):
    check(system)
    y0 = system.start() if y0 is None else np.asarray(y0, dtype=np.float64)
    if y0.shape != (system.n,):
        raise ValueError(f"y0 has shape {y0.shape}, expected ({system.n},)")
    return y0


def project_exact(system: ConstraintSystem, y0=None, *, reverse: bool = False) -> ProjectionCertificate:
    """Projection by enumerating all ``2^p`` working sets.

    For each set ``W`` the equality-constrained problem ``min |z - y0|^2``
    s.t. ``C z = d``, ``A_W z = b_W`` is solved in closed form; rank-deficient
    sets are skipped (a maximal independent subset reaches the same point).
    Among the primal- and dual-feasible candidates the nearest is returned.
    ``reverse`` flips the enumeration order (the answer must not change).
    """
    y0 = _start(system, y0)
    n, p = system.n, system.p
    if n > MAX_N or p > MAX_P:
        raise BudgetExceeded(f"enumeration budget is n, p <= {MAX_N}, {MAX_P}; got n={n}, p={p}")
    eqs = _reduce_equalities(system.C, system.d)
    r = eqs.Q.shape[0]
    A, b = system.A, system.b
    sizes = range(0, min(p, n - r) + 1)
    if reverse:
        sizes = reversed(sizes)
    best = None
    for size in sizes:
        combos = itertools.combinations(range(p), size)
        if reverse:
            combos = reversed(list(combos))
        for W in combos:
            W = list(W)
            M = np.vstack([eqs.Q, A[W]])
            rhs = np.concatenate([eqs.e, b[W]])
            sol = _solve_on(M, rhs, y0)
            if sol is None:
                continue
            z, mu = sol
            lam = mu[r:]
            if len(lam) and float(np.min(lam)) < -DUAL_TOL:
                continue
            if p and float(np.max(A @ z - b)) > FEAS_TOL:
                continue
            dist = float(np.linalg.norm(z - y0))
            if best is None or dist < best[0]:
                best = (dist, z, W, lam, mu[:r])
    if best is None:
        raise Infeasible("no working set yields a feasible KKT point")
    _, z, W, lam, nu_hat = best
    cert = _certificate(system, eqs, y0, z, W, lam, nu_hat)
    _verify(system, cert)
    return cert


def _independent(eqs_Q, A, candidates, tol=1e-10):
    """Greedy maximal subset of ``candidates`` whose rows stay independent of ``eqs_Q``."""
    W = []
    M = eqs_Q
    for i in candidates:
        trial = np.vstack([M, A[i]])
        s = np.linalg.svd(trial, compute_uv=False)
        if s[-1] > tol * max(1.0, s[0]):
            W.append(i)
            M = trial
    return W


def project_active_set(system: ConstraintSystem, y0=None, *, max_steps: int | None = None) -> ProjectionCertificate:
    """Projection by a primal active-set method (exact up to rounding).

    A feasible vertex from an LP seeds the working set; each iteration moves
    to the minimizer over the current working set, blocked by the first
    inactive constraint hit, or drops the constraint with the most negative
    multiplier. The final point is recomputed directly from ``y0`` on the
    optimal working set and certified.
    """
    y0 = _start(system, y0)
    eqs = _reduce_equalities(system.C, system.d)
    A, b = system.A, system.b
    n, p = system.n, system.p
    r = eqs.Q.shape[0]
    if p == 0:
        sol = _solve_on(eqs.Q, eqs.e, y0)
        z, mu = sol
        cert = _certificate(system, eqs, y0, z, [], np.zeros(0), mu)
        _verify(system, cert)
        return cert

    lp = linprog(
        np.zeros(n),
        A_ub=A,
        b_ub=b,
        A_eq=eqs.Q if r else None,
        b_eq=eqs.e if r else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if lp.status == 2:
        raise Infeasible("LP phase one found no feasible point")
    if lp.status != 0:
        raise CertificateError(f"LP phase one failed: {lp.message}")
    z = np.asarray(lp.x, dtype=np.float64)
    slack = b - A @ z
    W = _independent(eqs.Q, A, [int(i) for i in np.flatnonzero(slack <= 1e-9)])

    max_steps = 50 * (n + p) if max_steps is None else max_steps
    for _ in range(max_steps):
        M = np.vstack([eqs.Q, A[W]]) if W else eqs.Q
        g = z - y0
        if M.shape[0]:
            mu, *_ = np.linalg.lstsq(M.T, -g, rcond=None)
            step = -g - M.T @ mu
        else:
            mu = np.zeros(0)
            step = -g
        if np.linalg.norm(step) <= 1e-12 * max(1.0, np.linalg.norm(g)):
            lam = mu[r:]
            if len(lam) == 0 or float(np.min(lam)) >= -DUAL_TOL:
                break
            W.pop(int(np.argmin(lam)))
            continue
        As = A @ step
        alpha, block = 1.0, None
        for i in range(p):
            if As[i] > 1e-14 and i not in W:
                a_i = max(0.0, b[i] - A[i] @ z) / As[i]
                if a_i < alpha:
                    alpha, block = a_i, i
        z = z + alpha * step
        if block is not None:
            W.append(block)
    else:
        raise CertificateError("active-set method did not terminate")

    M = np.vstack([eqs.Q, A[W]])
    rhs = np.concatenate([eqs.e, b[W]])
    sol = _solve_on(M, rhs, y0)
    if sol is None:
        raise CertificateError("final working set is rank deficient")
    z, mu = sol
    cert = _certificate(system, eqs, y0, z, W, mu[r:], mu[:r])
    _verify(system, cert)
    return cert


def project(system: ConstraintSystem, y0=None) -> ProjectionCertificate:
    """Enumeration when within budget, otherwise the active-set method."""
    if system.n <= MAX_N and system.p <= MAX_P:
        return project_exact(system, y0)
    return project_active_set(system, y0)


def distance_to_feasible(system: ConstraintSystem, y0=None) -> float:
    """``min_{z feasible} |z - y0|_2``, via :func:`project_exact`."""
    return project_exact(system, y0).distance
