import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tskm.generators import gen_feasible_mixed
from tskm.model import (
    ConstraintSystem,
    DimensionMismatch,
    ParseError,
    SolveResult,
    Termination,
    ValidationError,
    ZeroInequalityRow,
    load_result,
    load_system,
    save_result,
    save_system,
    validate,
)


def test_validate_well_formed():
    s = ConstraintSystem(A=[[1, 0], [0, 1]], b=[1, 1], C=[[1, 1]], d=[0])
    assert validate(s) == []


def test_validate_zero_row():
    s = ConstraintSystem(A=[[1, 0], [0, 0]], b=[1, 1], C=[], d=[])
    assert validate(s) == [ZeroInequalityRow(1)]


def test_validate_b_length():
    s = ConstraintSystem(A=[[1, 0], [0, 1]], b=[1], C=[], d=[])
    v = validate(s)
    assert any(isinstance(x, DimensionMismatch) and x.field == "b" for x in v)


def test_validate_nonfinite():
    s = ConstraintSystem(A=[[1, np.nan]], b=[1], C=[], d=[])
    assert validate(s)


def test_pure_equality_and_pure_inequality_admissible():
    assert validate(ConstraintSystem(A=[], b=[], C=[[1, 0]], d=[1])) == []
    assert validate(ConstraintSystem(A=[[1, 0]], b=[1], C=[], d=[])) == []


def test_arrays_are_read_only():
    s = ConstraintSystem(A=[[1.0, 0.0]], b=[0.0], C=[], d=[])
    with pytest.raises(ValueError):
        s.A[0, 0] = 5.0


def test_load_example_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"A": [[1, 0]], "b": [0], "C": [], "d": [], "y0": [2, 0]}))
    s = load_system(path)
    assert (s.p, s.q, s.n) == (1, 0, 2)
    np.testing.assert_array_equal(s.y0, [2.0, 0.0])


def test_load_missing_key(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"A": [[1, 0]], "C": [], "d": []}))
    with pytest.raises(ParseError):
        load_system(path)


@pytest.mark.parametrize("text", ["not json", "[1, 2]", '{"A": [[1, 0], [1]], "b": [0, 0], "C": [], "d": []}'])
def test_load_malformed(tmp_path, text):
    path = tmp_path / "s.json"
    path.write_text(text)
    with pytest.raises(ParseError):
        load_system(path)


def test_load_zero_row_is_validation_error(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"A": [[0, 0]], "b": [0], "C": [], "d": []}))
    with pytest.raises(ValidationError) as info:
        load_system(path)
    assert info.value.violations == [ZeroInequalityRow(0)]


def test_generated_round_trip_bit_exact(tmp_path):
    s = gen_feasible_mixed(9, 7, 3, seed=11)
    path = tmp_path / "s.json"
    save_system(s, path)
    back = load_system(path)
    for name in ("A", "b", "C", "d", "y0"):
        assert np.array_equal(getattr(s, name), getattr(back, name))
    assert back == s


finite = st.floats(min_value=-1e100, max_value=1e100, allow_nan=False, width=64)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=finite))
def test_round_trip_any_floats(tmp_path_factory, A):
    A = A.copy()
    # a dominant entry per row keeps every row well above the degeneracy threshold
    A[:, 0] = 1e100
    s = ConstraintSystem(A=A, b=A[:, -1], C=[], d=[], y0=A[-1])
    path = tmp_path_factory.mktemp("rt") / "s.json"
    save_system(s, path)
    back = load_system(path)
    assert np.array_equal(back.A.view(np.uint64), s.A.view(np.uint64))
    assert np.array_equal(back.y0.view(np.uint64), s.y0.view(np.uint64))


def _result():
    return SolveResult(
        z_star=np.array([0.8, 0.2]),
        w_final=np.array([0.1]),
        iterations=10,
        max_ineq_violation=0.0,
        max_eq_violation=1e-17,
        termination=Termination.CONVERGED,
        distance_moved=0.1 + 0.2,
        residual_trace=[1.0, 0.0],
    )


def test_result_json_fields(tmp_path):
    path = tmp_path / "r.json"
    save_result(_result(), path)
    data = json.loads(path.read_text())
    assert data["termination"] == "converged"
    assert set(data) >= {"z_star", "w_final", "iterations", "max_ineq_violation", "max_eq_violation", "distance_moved"}
    back = load_result(path)
    assert back.distance_moved == 0.1 + 0.2
    assert back.termination is Termination.CONVERGED


@pytest.mark.skipif(hasattr(os, "geteuid") and os.geteuid() == 0, reason="root ignores file permissions")
def test_save_read_only_dir(tmp_path):
    tmp_path.chmod(0o500)
    try:
        with pytest.raises(IOError):
            save_result(_result(), tmp_path / "r.json")
    finally:
        tmp_path.chmod(0o700)


def test_save_missing_dir(tmp_path):
    with pytest.raises(IOError):
        save_result(_result(), tmp_path / "nope" / "r.json")
