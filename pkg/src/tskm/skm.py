"""Sampling Kaczmarz-Motzkin iteration for ``A w <= b``.

Each step samples ``beta`` rows, picks the most violated one among them and
moves ``delta`` of the way to its hyperplane::

    w <- w - delta * (a_i^T w - b_i)_+ / |a_i|^2 * a_i

Three momentum-style variants are supported. Their exact recursions are our
reconstruction from the one-line descriptions usually given for them:

* ``GSKM``: ``w <- (1 - xi) * step(w) + xi * w``           (default ``xi = -0.25``)
* ``MSKM``: ``w <- step(w) + mu * (w - w_prev)``           (heavy ball, ``mu = 0.25``)
* ``NSKM``: ``w <- step(w + mu * (w - w_prev))``           (Nesterov look-ahead, ``mu = 0.25``)

With ``xi = 0`` or ``mu = 0`` each collapses to the basic step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import Termination

AUTO = "auto"


class Variant(enum.Enum):
    BASIC = "basic"
    GSKM = "gskm"
    NSKM = "nskm"
    MSKM = "mskm"


class Sampling(enum.Enum):
    WITH_REPLACEMENT = "with"
    WITHOUT_REPLACEMENT = "without"


_DEFAULT_VARIANT_PARAM = {Variant.BASIC: 0.0, Variant.GSKM: -0.25, Variant.NSKM: 0.25, Variant.MSKM: 0.25}


@dataclass(frozen=True)
class SkmConfig:
    """Tunables of one SKM solve.

    ``beta`` is either a positive int or ``"auto"`` (resolved per problem by
    :func:`resolve_beta`). ``variant_param`` is ``xi`` for GSKM and ``mu`` for
    NSKM/MSKM; ``None`` picks the usual default for the variant. ``w0`` is an
    optional warm start in the space the iteration runs in.
    """

    delta: float = 1.0
    beta: int | str = AUTO
    max_iters: int = 100_000
    tolerance: float = 1e-6
    check_every: int = 10
    variant: Variant = Variant.BASIC
    variant_param: float | None = None
    sampling: Sampling = Sampling.WITH_REPLACEMENT
    seed: int = 0
    w0: tuple | None = None

    def __post_init__(self):
        if not (0.0 < self.delta < 2.0):
            raise ValueError("delta must be in (0,2)")
        if self.beta != AUTO and (isinstance(self.beta, bool) or not isinstance(self.beta, (int, np.integer)) or self.beta < 1):
            raise ValueError(f"beta must be 'auto' or a positive integer, got {self.beta!r}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not self.tolerance >= 0:
            raise ValueError("tolerance must be >= 0")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "sampling", Sampling(self.sampling))
        if self.w0 is not None:
            object.__setattr__(self, "w0", tuple(float(v) for v in self.w0))

    @property
    def coef(self) -> float:
        if self.variant_param is None:
            return _DEFAULT_VARIANT_PARAM[self.variant]
        return float(self.variant_param)

    def with_seed(self, seed: int) -> SkmConfig:
        return replace(self, seed=seed)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_seed(seed: int, index: int) -> int:
    """Seed of the ``index``-th item of a batch rooted at ``seed``."""
    return (int(seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF


class _Draws:
    """Index sets drawn in blocks from one generator.

    With-replacement samples are drawn ``block`` at a time, which is far
    cheaper than one generator call per step; the stream is still a pure
    function of the seed.
    """

    def __init__(self, rng):
        self.rng = rng
        self._key = None
        self._buf = None
        self._pos = self._len = 0

    def next(self, p, beta, mode):
        if mode is Sampling.WITHOUT_REPLACEMENT:
            return self.rng.choice(p, size=beta, replace=False)
        pos = self._pos
        if pos == self._len or self._key != (p, beta):
            self._key = (p, beta)
            self._buf = self.rng.integers(0, p, size=(max(1, 8192 // beta), beta))
            self._len = len(self._buf)
            pos = 0
        self._pos = pos + 1
        return self._buf[pos]


@dataclass
class SkmState:
    w: np.ndarray
    w_prev: np.ndarray
    k: int = 0
    draws: _Draws = field(default_factory=lambda: _Draws(make_rng(0)), repr=False)

    @classmethod
    def initial(cls, w0, seed: int) -> SkmState:
        w0 = np.array(w0, dtype=np.float64)
        return cls(w=w0, w_prev=w0.copy(), k=0, draws=_Draws(make_rng(seed)))


@dataclass(frozen=True)
class StepRecord:
    """What one step saw: the sample, the chosen row and its residual.

    ``tie`` marks a step whose maximal residual (>= 0) was shared by two
    distinct sampled rows; ``active`` is ``residual > 0``.
    """

    sample: np.ndarray
    i_star: int
    residual: float
    tie: bool

    @property
    def active(self) -> bool:
        return self.residual > 0.0

    @property
    def boundary(self) -> bool:
        """Step sits on a non-differentiable point of the update map."""
        return self.tie or self.residual == 0.0


@dataclass
class SkmRun:
    w: np.ndarray
    iterations: int
    trace: list[float]
    termination: Termination
    path: list[StepRecord] | None = None

    def __iter__(self):
        # allows ``w, k, trace, term = run(...)``
        return iter((self.w, self.iterations, self.trace, self.termination))


def resolve_beta(beta, p: int) -> int:
    """Sample size for ``p`` rows: ``auto`` means ``max(10, round(sqrt(p)))``, clamped to ``[1, p]``."""
    if p < 1:
        raise ValueError("resolve_beta needs p >= 1")
    if beta == AUTO or beta is None:
        want = max(10, int(round(math.sqrt(p))))
    else:
        want = int(beta)
    return min(max(want, 1), p)


def sample_indices(state: SkmState, p: int, beta: int, mode: Sampling = Sampling.WITH_REPLACEMENT) -> np.ndarray:
    """Draw the next index set ``S_k`` (``beta`` indices in ``[0, p)``) from the state's stream."""
    return state.draws.next(p, beta, Sampling(mode))


def row_norms_sq(A) -> np.ndarray:
    return np.einsum("ij,ij->i", A, A)


def _select(A, b, w, S):
    res = A.take(S, axis=0) @ w
    res -= b.take(S)
    j = res.argmax()
    r = float(res[j])
    hits = S[res == r]
    if hits.size == 1:
        return int(S[j]), r, False
    i = int(hits.min())
    return i, r, r >= 0.0 and int(hits.max()) != i


def select_most_violated(A, b, w, S) -> tuple[int, float]:
    """Most violated sampled row and its residual ``a_i^T w - b_i``.

    Exact ties go to the smallest row index. The residual may be <= 0, in
    which case the SKM step does nothing.
    """
    S = np.asarray(S)
    if S.size == 0:
        raise ValueError("empty sample")
    i, r, _ = _select(A, b, w, S)
    return i, r


def _project_step(A, w, i, r, delta, norms_sq):
    if r <= 0.0:
        return w
    return w - (delta * r / norms_sq[i]) * A[i]


def skm_step(state: SkmState, A, b, config: SkmConfig, *, beta: int | None = None, norms_sq=None) -> SkmState:
    """Advance one iteration of the configured variant; returns a new state.

    The sample stream in ``state.draws`` is shared with (and advanced for)
    the returned state.
    """
    p = A.shape[0]
    beta = resolve_beta(config.beta, p) if beta is None else beta
    norms_sq = row_norms_sq(A) if norms_sq is None else norms_sq
    w_new = _advance(state, A, b, config, beta, norms_sq)[0]
    return SkmState(w=w_new, w_prev=state.w, k=state.k + 1, draws=state.draws)


def _advance(state, A, b, config, beta, norms_sq, coef=None):
    """One step; returns ``(w_new, S, i_star, residual, tie)``."""
    S = state.draws.next(A.shape[0], beta, config.sampling)
    w, variant = state.w, config.variant
    if variant is Variant.BASIC:
        i, r, tie = _select(A, b, w, S)
        return _project_step(A, w, i, r, config.delta, norms_sq), S, i, r, tie
    c = config.coef if coef is None else coef
    at = w + c * (w - state.w_prev) if variant is Variant.NSKM else w
    i, r, tie = _select(A, b, at, S)
    z = _project_step(A, at, i, r, config.delta, norms_sq)
    if variant is Variant.GSKM:
        z = (1.0 - c) * z + c * w
    elif variant is Variant.MSKM:
        z = z + c * (w - state.w_prev)
    return z, S, i, r, tie


def run(A, b, config: SkmConfig, w0=None, *, record: bool = False) -> SkmRun:
    """Iterate until every row is within ``tolerance`` or ``max_iters`` steps.

    Feasibility is checked over all rows at ``k = 0`` and then every
    ``check_every`` steps (and at the cap); each check appends the current
    max violation to the trace. When the cap is hit the last iterate is
    returned. With ``record=True`` the per-step :class:`StepRecord` list
    (the sampling path) is attached.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    p, m = A.shape
    if w0 is None:
        w0 = config.w0 if config.w0 is not None else np.zeros(m)
    w0 = np.array(w0, dtype=np.float64)
    if w0.shape != (m,):
        raise ValueError(f"w0 has shape {w0.shape}, expected ({m},)")
    path = [] if record else None
    if p == 0:
        return SkmRun(w0, 0, [0.0], Termination.ALREADY_FEASIBLE, path)

    def violation(w):
        return max(0.0, float(np.max(A @ w - b)))

    tol = config.tolerance
    v = violation(w0)
    trace = [v]
    if v <= tol:
        return SkmRun(w0, 0, trace, Termination.ALREADY_FEASIBLE, path)

    beta = resolve_beta(config.beta, p)
    norms_sq = row_norms_sq(A)
    state = SkmState.initial(w0, config.seed)
    every, coef, cap = config.check_every, config.coef, config.max_iters
    k = 0
    while k < cap:
        w_new, S, i, r, tie = _advance(state, A, b, config, beta, norms_sq, coef)
        state.w_prev, state.w = state.w, w_new
        k += 1
        if record:
            path.append(StepRecord(S, i, r, tie))
        if k % every == 0 or k == cap:
            v = violation(state.w)
            trace.append(v)
            if v <= tol:
                return SkmRun(state.w, k, trace, Termination.CONVERGED, path)
    return SkmRun(state.w, k, trace, Termination.ITERATION_CAP, path)


def replay(A, b, samples, delta: float, w0):
    """Re-run the basic iteration on fixed samples, yielding ``(w_k, w_k+1, record)``.

    The selection inside each sample is re-evaluated on the given data, so
    replaying a recorded path with perturbed inputs shows whether the
    perturbation changed any choice.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norms_sq = row_norms_sq(A)
    w = np.array(w0, dtype=np.float64)
    for S in samples:
        i, r, tie = _select(A, b, w, S)
        w_new = _project_step(A, w, i, r, delta, norms_sq)
        yield w, w_new, StepRecord(S, i, r, tie)
        w = w_new
