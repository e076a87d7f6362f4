import numpy as np
import pytest

from tskm.generators import gen_feasible_mixed, gen_infeasible_start, gen_qp_family, max_violation
from tskm.model import validate
from tskm.pipeline import tskm_solve


def test_feasible_mixed_witness():
    s = gen_feasible_mixed(10, 6, 4, seed=1, margin=0.2)
    assert validate(s) == []
    assert np.all(s.A @ s.y0 <= s.b - 0.2 + 1e-12)
    np.testing.assert_allclose(s.C @ s.y0, s.d, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(s.A, axis=1), 1.0)
    np.testing.assert_allclose(np.linalg.norm(s.C, axis=1), 1.0)


def test_half_split_shape():
    s = gen_feasible_mixed(20, 10, 10, seed=0)
    assert (s.n, s.p, s.q) == (20, 10, 10)


def test_determinism():
    assert gen_feasible_mixed(8, 5, 3, seed=4) == gen_feasible_mixed(8, 5, 3, seed=4)
    assert gen_feasible_mixed(8, 5, 3, seed=4) != gen_feasible_mixed(8, 5, 3, seed=5)


@pytest.mark.parametrize("args", [(3, 2, 3), (0, 1, 0), (3, -1, 0)])
def test_bad_shapes(args):
    with pytest.raises(ValueError):
        gen_feasible_mixed(*args, seed=0)


def test_infeasible_start_scale():
    s = gen_feasible_mixed(12, 8, 4, seed=2)
    y0 = gen_infeasible_start(s, 2, 100.0)
    assert 50 <= max_violation(s, y0) <= 200
    np.testing.assert_array_equal(y0, gen_infeasible_start(s, 2, 100.0))
    np.testing.assert_array_equal(gen_infeasible_start(s, 2, 0.0), s.y0)
    assert max_violation(s, gen_infeasible_start(s, 2, 0.0)) == 0


def test_infeasible_start_without_witness():
    s = gen_feasible_mixed(12, 8, 4, seed=2)
    from tskm.model import ConstraintSystem

    bare = ConstraintSystem(A=s.A, b=s.b, C=s.C, d=s.d)
    y0 = gen_infeasible_start(bare, 1, 10.0)
    assert 5 <= max_violation(s, y0) <= 20


def test_generated_instances_converge():
    for seed in range(10):
        s = gen_feasible_mixed(16, 8, 8, seed=seed)
        assert tskm_solve(s.with_y0(gen_infeasible_start(s, seed))).ok


def test_qp_family():
    fam = gen_qp_family(100, 50, 50, seed=0)
    assert fam.A.shape == (50, 100) and fam.G.shape == (50, 100)
    np.testing.assert_allclose(fam.Q, fam.Q.T)
    assert np.min(np.linalg.eigvalsh(fam.Q)) >= 1 - 1e-9
    y_w = np.random.default_rng(0).standard_normal(100)
    s = fam.system(fam.A @ y_w, y0=np.zeros(100))
    assert validate(s) == []
    x = fam.sample_input(3)
    anchor = np.linalg.pinv(fam.A) @ x
    assert max_violation(fam.system(x), anchor) <= 1e-9
    fam2 = gen_qp_family(100, 50, 50, seed=0)
    assert np.array_equal(fam.G, fam2.G) and np.array_equal(fam.h, fam2.h)
    r = tskm_solve(fam.system(x, y0=np.zeros(100)))
    assert r.ok and np.isfinite(fam.objective(r.z_star))
