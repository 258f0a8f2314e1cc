import numpy as np
import pytest

from cfmlab.autodiff import NonFiniteError
from cfmlab.sampler import (Trajectory, record_trajectory, sample_euler,
                            sample_segment_jumps)
from cfmlab.theorems import AffineOracle
from tests.test_field import make_constant_field


def test_one_jump_constant_field(rng):
    c = np.array([0.5, -1.0])
    f = make_constant_field(c)
    x0 = rng.standard_normal((8, 2))
    assert np.allclose(sample_segment_jumps(f, x0, 1), x0 + c, atol=1e-14)


def test_two_half_steps_constant_field(rng):
    c = np.array([0.5, -1.0])
    f = make_constant_field(c)
    x0 = rng.standard_normal((8, 2))
    out = sample_segment_jumps(f, x0, 2)
    assert np.allclose(out, x0 + c, atol=1e-14)
    # hand-rolled two half-steps
    manual = x0 + 0.5 * c + 0.5 * c
    assert np.allclose(out, manual, atol=1e-14)


@pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
def test_affine_oracle_transported_exactly(k, rng):
    """Straight conditional flows are integrated exactly by segment jumps."""
    oracle = AffineOracle(np.array([[1.4, 0.3], [-0.2, 0.8]]), np.array([0.5, -0.7]))
    x0 = rng.standard_normal((16, 2))
    out = sample_segment_jumps(oracle.as_fn(), x0, k)
    assert np.allclose(out, x0 @ oracle.A.T + oracle.b, atol=1e-10)


def test_euler_m1_identical_to_jumps(rng):
    f = make_constant_field([0.3, 0.3])
    # perturb so the field is not trivially constant
    gen = np.random.default_rng(0)
    for p in f.params:
        p += 0.05 * gen.standard_normal(p.shape)
    f.ema = [p.copy() for p in f.params]
    x0 = rng.standard_normal((8, 2))
    a = sample_euler(f, x0, 4, 1)
    b = sample_segment_jumps(f, x0, 4)
    assert np.array_equal(a, b)


def test_growth_ode_reaches_e():
    vf = lambda t, x: x  # dx/dt = x  ->  x(1) = e * x(0)
    x0 = np.array([[1.0], [2.0], [-0.5]])
    out = sample_euler(vf, x0, 1, 100)
    assert np.allclose(out, np.e * x0, rtol=0.02)


def test_euler_first_order_convergence():
    vf = lambda t, x: x
    x0 = np.array([[1.0]])
    errs = []
    for m in (50, 100, 200):
        errs.append(abs(float(sample_euler(vf, x0, 1, m)) - np.e))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.1)


def test_consistent_field_endpoint_independent_of_steps(rng):
    """Straight flows are simulated exactly at any step count."""
    oracle = AffineOracle(np.array([[0.6, 0.1], [0.2, 1.3]]), np.array([0.4, 0.2]))
    x0 = rng.standard_normal((8, 2))
    one_jump = sample_segment_jumps(oracle.as_fn(), x0, 1)
    for m in (2, 7, 33):
        assert np.allclose(sample_euler(oracle.as_fn(), x0, 1, m), one_jump,
                           atol=1e-10)


def test_nfe_accounting_via_counter(rng):
    f = make_constant_field([0.1, 0.1])
    x0 = rng.standard_normal((4, 2))
    before = f.eval_count
    _, traj = sample_euler(f, x0, 3, 4, record=True)
    assert traj.nfe == 12
    assert f.eval_count - before == 12
    before = f.eval_count
    traj2 = record_trajectory(f, x0, np.linspace(0, 1, 9))
    assert traj2.nfe == 8
    assert f.eval_count - before == 8


def test_record_trajectory_constant_field_colinear(rng):
    f = make_constant_field([1.0, 2.0])
    x0 = rng.standard_normal((4, 2))
    traj = record_trajectory(f, x0, np.linspace(0, 1, 17))
    # states lie on the segment from x0 to x0 + c
    c = np.array([1.0, 2.0])
    expect = x0[None] + traj.times[:, None, None] * c
    assert np.allclose(traj.states, expect, atol=1e-12)


def test_record_trajectory_two_point_grid_is_one_step(rng):
    f = make_constant_field([0.2, -0.4])
    x0 = rng.standard_normal((4, 2))
    traj = record_trajectory(f, x0, np.array([0.0, 1.0]))
    assert np.array_equal(traj.states[-1], sample_segment_jumps(f, x0, 1))


def test_record_trajectory_matches_oracle_flow(rng):
    oracle = AffineOracle(np.array([[1.5, 0.0], [0.0, 0.7]]), np.array([0.3, 0.1]))
    x0 = rng.standard_normal((6, 2))
    grid = np.linspace(0, 1, 33)
    traj = record_trajectory(oracle.as_fn(), x0, grid)
    for i, t in enumerate(grid):
        assert np.allclose(traj.states[i], oracle.flow(t, x0), atol=1e-9)


def test_invalid_grids_rejected(rng):
    f = make_constant_field([0.0, 0.0])
    x0 = rng.standard_normal((2, 2))
    with pytest.raises(ValueError):
        record_trajectory(f, x0, np.array([0.0]))
    with pytest.raises(ValueError):
        record_trajectory(f, x0, np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValueError):
        record_trajectory(f, x0, np.array([0.1, 1.0]))


def test_nonfinite_state_raises():
    bad = lambda t, x: np.full_like(x, np.nan)
    with pytest.raises(NonFiniteError):
        sample_euler(bad, np.zeros((2, 2)), 1, 1)


def test_invalid_step_counts(rng):
    f = make_constant_field([0.0, 0.0])
    with pytest.raises(ValueError):
        sample_euler(f, rng.standard_normal((2, 2)), 0, 1)
    with pytest.raises(ValueError):
        sample_euler(f, rng.standard_normal((2, 2)), 1, 0)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.0, 0.5]), states=np.zeros((3, 1, 2)), nfe=1)
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.0, 0.5, 0.4]), states=np.zeros((3, 1, 2)), nfe=2)
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.0, 0.5, 0.9]), states=np.zeros((3, 1, 2)), nfe=2)
