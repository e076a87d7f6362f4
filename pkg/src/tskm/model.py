"""Constraint systems, solve results, and their JSON file formats."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np


class ParseError(Exception):
    """Problem or result file is malformed."""


class ValidationError(ValueError):
    """A constraint system violates one of its invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


# violation descriptors returned by validate()


@dataclass(frozen=True)
class DimensionMismatch:
    field: str
    expected: int
    got: int

    def __str__(self):
        return f"DimensionMismatch({self.field!r}: expected {self.expected}, got {self.got})"


@dataclass(frozen=True)
class ZeroInequalityRow:
    index: int

    def __str__(self):
        return f"ZeroInequalityRow({self.index})"


@dataclass(frozen=True)
class NonFiniteEntry:
    field: str

    def __str__(self):
        return f"NonFiniteEntry({self.field!r})"


class Termination(enum.Enum):
    CONVERGED = "converged"
    ITERATION_CAP = "iteration_cap"
    ALREADY_FEASIBLE = "already_feasible"


def _frozen(x):
    x = np.array(x, dtype=np.float64)
    x.setflags(write=False)
    return x


def _as_matrix(x, n):
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return np.zeros((0, n))
    if x.ndim == 1:
        x = x.reshape(1, -1)
    return x


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """Mixed linear system ``A z <= b``, ``C z = d`` with an optional point to repair.

    Either block may be empty. Arrays are copied to read-only float64 on
    construction; shape consistency is *not* enforced here so that
    :func:`validate` can report every problem at once.
    """

    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    d: np.ndarray
    y0: np.ndarray | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        C = np.asarray(self.C, dtype=np.float64)
        if A.ndim == 2 and A.shape[1] > 0:
            n = A.shape[1]
        elif C.ndim == 2 and C.shape[1] > 0:
            n = C.shape[1]
        elif self.y0 is not None:
            n = len(self.y0)
        else:
            n = 0
        object.__setattr__(self, "A", _frozen(_as_matrix(A, n)))
        object.__setattr__(self, "C", _frozen(_as_matrix(C, n)))
        object.__setattr__(self, "b", _frozen(np.asarray(self.b, dtype=np.float64).reshape(-1)))
        object.__setattr__(self, "d", _frozen(np.asarray(self.d, dtype=np.float64).reshape(-1)))
        if self.y0 is not None:
            object.__setattr__(self, "y0", _frozen(np.asarray(self.y0, dtype=np.float64).reshape(-1)))

    @property
    def n(self) -> int:
        if self.A.shape[0]:
            return self.A.shape[1]
        if self.C.shape[0]:
            return self.C.shape[1]
        return self.A.shape[1] if self.A.shape[1] else len(self.y0 if self.y0 is not None else ())

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    def start(self) -> np.ndarray:
        """The point to repair, zero when absent."""
        return np.zeros(self.n) if self.y0 is None else np.array(self.y0)

    def with_y0(self, y0) -> ConstraintSystem:
        return ConstraintSystem(self.A, self.b, self.C, self.d, y0)

    def violations(self, z) -> tuple[float, float]:
        """Return ``(max inequality violation, max equality residual)`` at ``z``."""
        return ineq_violation(self.A, self.b, z), eq_violation(self.C, self.d, z)

    def __eq__(self, other):
        if not isinstance(other, ConstraintSystem):
            return NotImplemented
        same_y0 = (self.y0 is None and other.y0 is None) or (
            self.y0 is not None and other.y0 is not None and np.array_equal(self.y0, other.y0)
        )
        return same_y0 and all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in ((self.A, other.A), (self.b, other.b), (self.C, other.C), (self.d, other.d))
        )

    __hash__ = None


def ineq_violation(A, b, z) -> float:
    """``max_i (a_i^T z - b_i)_+``; zero for an empty block."""
    if A.shape[0] == 0:
        return 0.0
    return max(0.0, float(np.max(A @ z - b)))


def eq_violation(C, d, z) -> float:
    """``||C z - d||_inf``; zero for an empty block."""
    if C.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(C @ z - d)))


@dataclass(frozen=True, eq=False)
class TransformedSystem:
    """Pure inequality system in null-space coordinates ``z = z_proj + N w``."""

    N: np.ndarray
    z_proj: np.ndarray
    A_new: np.ndarray
    b_new: np.ndarray
    rank_C: int
    # C^+ C, kept for sensitivity computations
    row_projector: np.ndarray = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return self.N.shape[1]


@dataclass(frozen=True, eq=False)
class SolveResult:
    z_star: np.ndarray
    w_final: np.ndarray
    iterations: int
    max_ineq_violation: float
    max_eq_violation: float
    termination: Termination
    distance_moved: float
    residual_trace: list[float] | None = None

    @property
    def ok(self) -> bool:
        return self.termination is not Termination.ITERATION_CAP

    def to_dict(self) -> dict[str, Any]:
        out = {
            "z_star": [float(v) for v in self.z_star],
            "w_final": [float(v) for v in self.w_final],
            "iterations": int(self.iterations),
            "max_ineq_violation": float(self.max_ineq_violation),
            "max_eq_violation": float(self.max_eq_violation),
            "termination": self.termination.value,
            "distance_moved": float(self.distance_moved),
        }
        if self.residual_trace is not None:
            out["residual_trace"] = [float(v) for v in self.residual_trace]
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SolveResult:
        try:
            return cls(
                z_star=np.asarray(data["z_star"], dtype=np.float64),
                w_final=np.asarray(data["w_final"], dtype=np.float64),
                iterations=int(data["iterations"]),
                max_ineq_violation=float(data["max_ineq_violation"]),
                max_eq_violation=float(data["max_eq_violation"]),
                termination=Termination(data["termination"]),
                distance_moved=float(data["distance_moved"]),
                residual_trace=data.get("residual_trace"),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"bad result record: {exc}") from exc


def validate(system: ConstraintSystem) -> list:
    """List every invariant the system violates; empty means well-formed."""
    out = []
    n = system.n
    A, C = system.A, system.C
    if A.ndim != 2:
        out.append(DimensionMismatch("A", 2, A.ndim))
        return out
    if C.ndim != 2:
        out.append(DimensionMismatch("C", 2, C.ndim))
        return out
    if A.shape[0] and A.shape[1] != n:
        out.append(DimensionMismatch("A", n, A.shape[1]))
    if C.shape[0] and C.shape[1] != n:
        out.append(DimensionMismatch("C", n, C.shape[1]))
    if len(system.b) != A.shape[0]:
        out.append(DimensionMismatch("b", A.shape[0], len(system.b)))
    if len(system.d) != C.shape[0]:
        out.append(DimensionMismatch("d", C.shape[0], len(system.d)))
    if system.y0 is not None and len(system.y0) != n:
        out.append(DimensionMismatch("y0", n, len(system.y0)))
    for name in ("A", "b", "C", "d", "y0"):
        arr = getattr(system, name)
        if arr is not None and not np.all(np.isfinite(arr)):
            out.append(NonFiniteEntry(name))
    if A.shape[0] and np.all(np.isfinite(A)):
        scale = max(1.0, float(np.max(np.abs(A))))
        norms = np.linalg.norm(A, axis=1)
        out.extend(ZeroInequalityRow(int(i)) for i in np.flatnonzero(norms < 1e-12 * scale))
    return out


def check(system: ConstraintSystem) -> ConstraintSystem:
    errors = validate(system)
    if errors:
        raise ValidationError(errors)
    return system


# --- file I/O ---------------------------------------------------------------

_REQUIRED = ("A", "b", "C", "d")


def _floats(name, value):
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{name}: not numeric") from exc
    return arr


def system_from_dict(data: dict[str, Any]) -> ConstraintSystem:
    if not isinstance(data, dict):
        raise ParseError("problem file must hold a JSON object")
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise ParseError(f"missing keys: {', '.join(missing)}")
    for key in ("A", "C"):
        rows = data[key]
        if not isinstance(rows, list) or any(not isinstance(r, list) for r in rows):
            raise ParseError(f"{key} must be an array of arrays")
        if len({len(r) for r in rows}) > 1:
            raise ParseError(f"{key} is ragged")
    for key in ("b", "d", "y0"):
        if key in data and data[key] is not None and not isinstance(data[key], list):
            raise ParseError(f"{key} must be an array")
    arrays = {k: _floats(k, data[k]) for k in _REQUIRED}
    y0 = data.get("y0")
    return ConstraintSystem(y0=None if y0 is None else _floats("y0", y0), **arrays)


def system_to_dict(system: ConstraintSystem) -> dict[str, Any]:
    out = {
        "A": system.A.tolist(),
        "b": system.b.tolist(),
        "C": system.C.tolist(),
        "d": system.d.tolist(),
    }
    if system.y0 is not None:
        out["y0"] = system.y0.tolist()
    return out


def _dump(obj, path):
    # json writes floats with repr(), the shortest string that round-trips exactly
    text = json.dumps(obj, allow_nan=False)
    try:
        Path(path).write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def load_system(path) -> ConstraintSystem:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return check(system_from_dict(data))


def save_system(system: ConstraintSystem, path) -> None:
    _dump(system_to_dict(system), path)


def save_result(result: SolveResult, path) -> None:
    _dump(result.to_dict(), path)


def load_result(path) -> SolveResult:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return SolveResult.from_dict(data)
