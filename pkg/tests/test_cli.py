import csv
import json

import pytest

from tskm.cli import main, parse_values
from tskm.generators import gen_feasible_mixed
from tskm.model import ConstraintSystem, save_system


@pytest.fixture
def mixed_file(tmp_path):
    path = tmp_path / "mixed.json"
    save_system(gen_feasible_mixed(8, 6, 2, seed=3).with_y0([30.0] * 8), path)
    return path


@pytest.fixture
def feasible_file(tmp_path):
    path = tmp_path / "feasible.json"
    save_system(gen_feasible_mixed(8, 6, 2, seed=3), path)
    return path


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_project_feasible(feasible_file, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["project", "--input", str(feasible_file), "--output", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["iterations"] == 0 and data["termination"] == "already_feasible"
    assert "distance_moved=" in capsys.readouterr().out


def test_project_bad_delta(mixed_file, capsys):
    assert main(["project", "--input", str(mixed_file), "--delta", "2.5"]) == 1
    assert "delta must be in (0,2)" in capsys.readouterr().err


def test_project_naive_dispatch(mixed_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["project", "--input", str(mixed_file), "--output", str(a)]) == 0
    assert main(["project", "--input", str(mixed_file), "--naive", "--output", str(b)]) == 0
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    assert len(rb["w_final"]) == 8 and len(ra["w_final"]) == 6
    assert rb["max_eq_violation"] > ra["max_eq_violation"]


def test_project_iteration_cap(mixed_file):
    assert main(["project", "--input", str(mixed_file), "--max-iters", "1", "--naive"]) == 2


def test_project_missing_file(tmp_path, capsys):
    assert main(["project", "--input", str(tmp_path / "none.json")]) == 1
    assert capsys.readouterr().err


def test_project_invalid_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"A": [[0, 0]], "b": [0], "C": [], "d": []}))
    assert main(["project", "--input", str(path)]) == 1


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["project"])
    assert info.value.code == 1


def test_parse_values():
    assert parse_values("0.2:1.8:0.2", "delta")[-1] == 1.8
    assert len(parse_values("0.2:1.8:0.2", "delta")) == 9
    assert parse_values("1,sqrt,p", "beta") == [1, "sqrt", "p"]
    from tskm.cli import UsageError

    for bad in ("1:0:0.1", "a,b", "1:2:0"):
        with pytest.raises(UsageError):
            parse_values(bad, "delta")


def test_sweep_rows(tmp_path):
    out = tmp_path / "s.csv"
    argv = ["sweep", "--param", "delta", "--values", "0.6,1.0", "--dims", "8", "--trials", "2", "--csv", str(out)]
    assert main(argv) == 0
    got = rows(out)
    assert [(r["param_value"], r["trial"]) for r in got] == [("0.6", "0"), ("0.6", "1"), ("1.0", "0"), ("1.0", "1")]
    assert all(r["oracle_distance"] for r in got)
    assert all(int(r["wall_time_ns"]) > 0 for r in got)


def test_sweep_oracle_blank_past_budget(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--param", "beta", "--values", "p", "--dims", "40", "--trials", "1", "--csv", str(out)]) == 0
    assert rows(out)[0]["oracle_distance"] == ""


def test_sweep_zero_trials(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--param", "beta", "--values", "1,sqrt,p", "--dims", "12", "--trials", "0", "--csv", str(out)]) == 0
    assert out.read_text() == (
        "param_value,dim,trial,iterations,wall_time_ns,max_violation,distance_moved,oracle_distance\n"
    )


def test_sweep_bad_range(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--param", "delta", "--values", "1.8:0.2:0.2", "--dims", "8", "--csv", str(out)]) == 1
    assert main(["sweep", "--param", "delta", "--values", "0.5,2.0", "--dims", "8", "--trials", "1", "--csv", str(out)]) == 1


def test_bench_one_row_per_mode(tmp_path, capsys):
    out = tmp_path / "b.csv"
    argv = ["bench", "--dims", "10", "--trials", "1", "--modes", "tskm,naive,gskm,nskm,mskm", "--csv", str(out)]
    assert main(argv) == 0
    assert [r["mode"] for r in rows(out)] == ["tskm", "naive", "gskm", "nskm", "mskm"]
    assert "median_iterations" in capsys.readouterr().out


def test_bench_unknown_mode(tmp_path):
    assert main(["bench", "--dims", "10", "--modes", "fast", "--csv", str(tmp_path / "b.csv")]) == 1


def test_gradcheck_halfspace(tmp_path, capsys):
    path = tmp_path / "h.json"
    save_system(ConstraintSystem(A=[[1.0, 0.0]], b=[0.0], C=[], d=[], y0=[2.0, 0.0]), path)
    out = tmp_path / "g.csv"
    assert main(["gradcheck", "--input", str(path), "--paths", "50", "--csv", str(out)]) == 0
    errs = [float(r["rel_error"]) for r in rows(out)]
    assert len(errs) == 100 and max(errs) < 1e-8


def test_gradcheck_ties_counted(tmp_path, capsys):
    path = tmp_path / "t.json"
    save_system(ConstraintSystem(A=[[1.0, 0.0], [1.0, 0.0]], b=[0.0, 0.0], C=[], d=[], y0=[2.0, 1.0]), path)
    main(["gradcheck", "--input", str(path), "--paths", "50", "--beta", "2", "--sampling", "without"])
    line = capsys.readouterr().out.splitlines()[0]
    assert int(line.split("excluded=")[1].split()[0]) > 0


def test_gradcheck_eps_zero(feasible_file, capsys):
    assert main(["gradcheck", "--input", str(feasible_file), "--eps", "0"]) == 1
    assert "eps must be positive" in capsys.readouterr().err


def test_gradcheck_variant_unsupported(feasible_file):
    assert main(["gradcheck", "--input", str(feasible_file), "--variant", "mskm"]) == 1


def test_generate(tmp_path):
    out = tmp_path / "g.json"
    assert main(["generate", "--n", "6", "--p", "4", "--q", "2", "--seed", "1", "--output", str(out)]) == 0
    data = json.loads(out.read_text())
    assert len(data["A"]) == 4 and len(data["y0"]) == 6


def test_rerun_byte_identical(mixed_file, tmp_path):
    outs = []
    for i in range(2):
        j, s, b = tmp_path / f"r{i}.json", tmp_path / f"s{i}.csv", tmp_path / f"b{i}.csv"
        main(["project", "--input", str(mixed_file), "--seed", "9", "--output", str(j)])
        main(["sweep", "--param", "delta", "--values", "0.5:1.5:0.5", "--dims", "8", "--trials", "2", "--seed", "4", "--csv", str(s), "--no-timing"])
        main(["bench", "--dims", "10", "--trials", "2", "--seed", "4", "--csv", str(b), "--no-timing"])
        outs.append((j.read_bytes(), s.read_bytes(), b.read_bytes()))
    assert outs[0] == outs[1]
