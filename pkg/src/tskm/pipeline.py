"""End-to-end repair of a point: null-space transform, SKM, recovery."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import nullspace
from .model import ConstraintSystem, SolveResult, Termination, check
from .nullspace import Factorization, InconsistentEqualities, equality_tolerance
from .skm import SkmConfig, SkmRun, derive_seed, run


def _result(system, z, w, skm_run: SkmRun) -> SolveResult:
    ineq, eq = system.violations(z)
    return SolveResult(
        z_star=z,
        w_final=w,
        iterations=skm_run.iterations,
        max_ineq_violation=ineq,
        max_eq_violation=eq,
        termination=skm_run.termination,
        distance_moved=float(np.linalg.norm(z - system.start())),
        residual_trace=list(skm_run.trace),
    )


def _start_feasible(system, tol) -> bool:
    ineq, eq = system.violations(system.start())
    return ineq <= tol and eq <= equality_tolerance(system.d)


def tskm_solve(
    system: ConstraintSystem,
    config: SkmConfig = SkmConfig(),
    factorization: Factorization | None = None,
    *,
    record: bool = False,
):
    """Repair ``system.y0`` into a point of ``{A z <= b, C z = d}``.

    SKM runs on the reduced system starting from ``w = 0`` (or ``config.w0``),
    so equalities hold to ``1e-8 * max(1, |d|_inf)`` whatever the iteration
    does. Non-convergence is reported through ``termination``, not raised.
    ``AlreadyFeasible`` means ``y0`` itself was feasible; a start repaired by
    the equality projection alone is ``Converged`` after 0 iterations.

    With ``record=True`` returns ``(result, transformed, skm_run)``.
    """
    t = nullspace.transform(system, factorization)
    if t.m == 0:
        skm_run = SkmRun(np.zeros(0), 0, [0.0], Termination.ALREADY_FEASIBLE, [] if record else None)
    else:
        skm_run = run(t.A_new, t.b_new, config, record=record)
    if skm_run.termination is Termination.ALREADY_FEASIBLE and not _start_feasible(system, config.tolerance):
        # the equality projection alone repaired y0
        skm_run.termination = Termination.CONVERGED
    z = nullspace.recover(t, skm_run.w)
    result = _result(system, z, skm_run.w, skm_run)
    if record:
        return result, t, skm_run
    return result


def split_equalities(system: ConstraintSystem):
    """Stack ``C z = d`` as ``C z <= d`` and ``-C z <= -d`` under ``A z <= b``.

    Zero rows of ``C`` carry no direction and are dropped (after checking
    their right-hand side is zero).
    """
    C, d = system.C, system.d
    keep = np.linalg.norm(C, axis=1) > 0 if len(d) else np.zeros(0, dtype=bool)
    if np.any(np.abs(d[~keep]) > equality_tolerance(d)):
        raise InconsistentEqualities("zero equality row with nonzero right-hand side")
    C, d = C[keep], d[keep]
    A = np.vstack([system.A, C, -C])
    b = np.concatenate([system.b, d, -d])
    return A, b


def naive_solve(system: ConstraintSystem, config: SkmConfig = SkmConfig()) -> SolveResult:
    """Baseline without elimination: SKM in the original space from ``y0``.

    Equalities only hold to ``config.tolerance`` at convergence.
    """
    check(system)
    A, b = split_equalities(system)
    y0 = system.start()
    skm_run = run(A, b, config, w0=y0)
    return _result(system, skm_run.w, skm_run.w, skm_run)


def default_workers() -> int:
    env = os.environ.get("SKM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def batch_solve(systems, config: SkmConfig = SkmConfig(), workers: int | None = None, solver=tskm_solve) -> list:
    """Solve independent systems, item ``i`` seeded with ``config.seed ^ i``.

    Output order follows input order and does not depend on ``workers``.
    A failing item leaves its exception in its slot.
    """
    systems = list(systems)

    def one(i):
        try:
            return solver(systems[i], config.with_seed(derive_seed(config.seed, i)))
        except Exception as exc:  # noqa: BLE001 - isolate per-item failures
            return exc

    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(systems) <= 1:
        return [one(i) for i in range(len(systems))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(systems))))
