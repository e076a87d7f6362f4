"""Sensitivity of the repaired point ``z*`` to the input point ``y0``.

With the sampling sequence frozen, every step of the basic iteration is an
affine map of ``y0`` (once the chosen row and whether it was violated are
fixed), so ``z*`` is piecewise affine in ``y0`` and its Jacobian can be
accumulated forward alongside the iterates::

    dz_proj = I - C^+ C
    db_new  = -A (I - C^+ C)
    dw     <- (I - s delta a a^T/|a|^2) dw + s delta/|a|^2 a db_new[i]
    J       = dz_proj + N dw

``A``, ``b``, ``C`` and ``d`` are held fixed. Steps that sit on a tie or
exactly on a constraint boundary are flagged; the derivative of ``(r)_+`` at
``r = 0`` is taken as zero there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nullspace
from .model import ConstraintSystem, SolveResult
from .pipeline import tskm_solve
from .skm import Sampling, SkmConfig, StepRecord, Variant, derive_seed, replay


class UnsupportedVariant(ValueError):
    pass


def step_jacobian(a, delta: float, active: bool) -> np.ndarray:
    """Jacobian of one basic step w.r.t. the iterate: ``I - delta a a^T/|a|^2`` or ``I``."""
    a = np.asarray(a, dtype=np.float64)
    nsq = float(a @ a)
    if not nsq > 0.0:
        raise ValueError("zero row has no step Jacobian")
    J = np.eye(len(a))
    if active:
        J -= (delta / nsq) * np.outer(a, a)
    return J


@dataclass(frozen=True, eq=False)
class PathJacobian:
    """``dz*/dy0`` along one recorded sampling path.

    ``growth[k]`` is the spectral norm of ``dw_k/dy0``, ``c_bound``
    the largest per-step increment ``delta |db_new[i]| / |a_i|`` seen, so
    ``|J|_2 <= 1 + K * c_bound``.
    """

    J: np.ndarray
    path: list[StepRecord]
    growth: np.ndarray
    c_bound: float

    @property
    def steps(self) -> int:
        return len(self.path)

    @property
    def boundary_steps(self) -> int:
        return sum(rec.boundary for rec in self.path)

    @property
    def samples(self):
        return [rec.sample for rec in self.path]


def _require_basic(config):
    if config.variant is not Variant.BASIC:
        raise UnsupportedVariant(f"path Jacobians exist for the basic variant only, not {config.variant.value}")


def path_jacobian(
    system: ConstraintSystem, config: SkmConfig = SkmConfig(), *, track_growth: bool = True
) -> tuple[SolveResult, PathJacobian]:
    """Solve and accumulate ``dz*/dy0`` along the realized path.

    ``track_growth=False`` skips the per-step spectral norms (``growth`` is
    then empty), which dominate the cost on long paths.
    """
    _require_basic(config)
    result, t, skm_run = tskm_solve(system, config, record=True)
    n = system.n
    dz_proj = np.eye(n) - t.row_projector
    db_new = -system.A @ dz_proj
    m = t.m
    dw = np.zeros((m, n))
    growth = [0.0] if track_growth else []
    c_bound = 0.0
    A_new, delta = t.A_new, config.delta
    for rec in skm_run.path:
        if rec.active:
            a = A_new[rec.i_star]
            nsq = float(a @ a)
            g = db_new[rec.i_star]
            coef = delta / nsq
            dw = dw - coef * np.outer(a, a @ dw - g)
            c_bound = max(c_bound, coef * np.sqrt(nsq) * float(np.linalg.norm(g)))
        if track_growth:
            growth.append(float(np.linalg.norm(dw, 2)) if m else 0.0)
    J = dz_proj + (t.N @ dw if m else 0.0)
    return result, PathJacobian(J=J, path=list(skm_run.path), growth=np.asarray(growth), c_bound=c_bound)


def replay_output(system: ConstraintSystem, samples, config: SkmConfig, y0=None):
    """``z*`` for input ``y0`` along fixed samples, plus the replayed step records."""
    s = system if y0 is None else system.with_y0(y0)
    t = nullspace.transform(s)
    w0 = np.zeros(t.m) if config.w0 is None else np.asarray(config.w0)
    w = w0
    records = []
    for _, w, rec in replay(t.A_new, t.b_new, samples, config.delta, w0):
        records.append(rec)
    return nullspace.recover(t, w), records


def _same_choices(ref, other, noise: float) -> bool:
    """Same row chosen at every step, and no activity flip beyond rounding noise.

    A step landing exactly on a hyperplane (``r == 0`` after a ``delta = 1``
    projection) flips to ``r = +-1e-17`` under perturbation; both branches
    have the same derivative there, so such flips are not kinks.
    """
    for a, b in zip(ref, other):
        if a.i_star != b.i_star:
            return False
        if a.active != b.active and max(abs(a.residual), abs(b.residual)) > noise:
            return False
    return True


@dataclass(frozen=True)
class PathCheck:
    """Analytic vs. fixed-path central differences, one entry per input coordinate."""

    rel_errors: np.ndarray
    excluded: bool
    reason: str = ""

    @property
    def max_error(self) -> float:
        return float(np.max(self.rel_errors)) if len(self.rel_errors) else 0.0


def check_path(system: ConstraintSystem, config: SkmConfig, eps: float = 1e-6, pj: PathJacobian | None = None) -> PathCheck:
    """Compare each column of the path Jacobian with ``(z*(y0+eps e_j) - z*(y0-eps e_j)) / 2eps``.

    The error of column ``j`` is ``|J e_j - fd_j|_inf / max(1, |J e_j|_inf)``.
    A path is excluded when it has a tie or when a perturbation changes any
    selection along it, since the finite difference then straddles a kink.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if pj is None:
        _, pj = path_jacobian(system, config)
    y0 = system.start()
    n = len(y0)
    errs = np.zeros(n)
    reason = "tie on path" if any(rec.tie for rec in pj.path) else ""
    samples = pj.samples
    noise = 1e-10 * max(1.0, float(np.max(np.abs(system.b))) if system.p else 1.0)
    for j in range(n):
        e = np.zeros(n)
        e[j] = eps
        zp, rp = replay_output(system, samples, config, y0 + e)
        zm, rm = replay_output(system, samples, config, y0 - e)
        if not reason and not (_same_choices(pj.path, rp, noise) and _same_choices(pj.path, rm, noise)):
            reason = f"selection changes within eps along coordinate {j}"
        fd = (zp - zm) / (2 * eps)
        col = pj.J[:, j]
        errs[j] = float(np.max(np.abs(col - fd))) / max(1.0, float(np.max(np.abs(col))))
    return PathCheck(rel_errors=errs, excluded=bool(reason), reason=reason)


@dataclass(frozen=True)
class GradientReport:
    analytic_mean: np.ndarray
    fd_of_mean: np.ndarray
    sem_analytic: np.ndarray
    sem_fd: np.ndarray
    num_paths: int
    eps: float

    @property
    def sem(self) -> np.ndarray:
        return np.sqrt(self.sem_analytic**2 + self.sem_fd**2)

    @property
    def gap(self) -> np.ndarray:
        return np.abs(self.analytic_mean - self.fd_of_mean)

    @property
    def allowed(self) -> np.ndarray:
        return 3.0 * self.sem + 10.0 * self.eps

    @property
    def passed(self) -> bool:
        return bool(np.all(self.gap <= self.allowed))


def _deterministic(system, config) -> bool:
    return config.sampling is Sampling.WITHOUT_REPLACEMENT and config.beta != "auto" and int(config.beta) >= system.p


def _sem(x):
    if len(x) < 2:
        return np.zeros(x.shape[1:])
    return x.std(axis=0, ddof=1) / np.sqrt(len(x))


def gradient_samples(system, config, num_paths, probe) -> np.ndarray:
    """``J_i @ probe`` for paths seeded ``config.seed ^ i``."""
    probe = np.asarray(probe, dtype=np.float64)
    return np.array(
        [
            path_jacobian(system, config.with_seed(derive_seed(config.seed, i)), track_growth=False)[1].J @ probe
            for i in range(num_paths)
        ]
    )


def expected_gradient_check(
    system: ConstraintSystem,
    config: SkmConfig,
    num_paths: int = 200,
    probe=None,
    eps: float = 1e-6,
) -> GradientReport:
    """Mean path derivative vs. finite difference of the mean output.

    Path ``i`` uses seed ``config.seed ^ i``; the finite difference re-solves
    from ``y0 +- eps * probe`` with the same seeds (common random numbers)
    and the solver's own stopping rule. Fewer than 50 paths are accepted only
    when sampling is deterministic (``beta >= p`` without replacement).
    """
    _require_basic(config)
    if not eps > 0:
        raise ValueError("eps must be positive")
    if num_paths < 50 and not _deterministic(system, config):
        raise ValueError("num_paths must be >= 50 for randomized sampling")
    y0 = system.start()
    probe = np.ones(len(y0)) / np.sqrt(len(y0)) if probe is None else np.asarray(probe, dtype=np.float64)
    analytic, fds = [], []
    up, down = system.with_y0(y0 + eps * probe), system.with_y0(y0 - eps * probe)
    for i in range(num_paths):
        cfg = config.with_seed(derive_seed(config.seed, i))
        _, pj = path_jacobian(system, cfg, track_growth=False)
        analytic.append(pj.J @ probe)
        fds.append((tskm_solve(up, cfg).z_star - tskm_solve(down, cfg).z_star) / (2 * eps))
    analytic, fds = np.array(analytic), np.array(fds)
    return GradientReport(
        analytic_mean=analytic.mean(axis=0),
        fd_of_mean=fds.mean(axis=0),
        sem_analytic=_sem(analytic),
        sem_fd=_sem(fds),
        num_paths=num_paths,
        eps=eps,
    )
