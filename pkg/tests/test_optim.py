import numpy as np
import pytest

from cfmlab.optim import AdamState, adam_step


def test_zero_gradient_leaves_params_unchanged():
    p = [np.array([1.0, -2.0, 3.0])]
    st = AdamState.for_params(p, lr=0.1)
    adam_step(p, [np.zeros(3)], st)
    assert np.array_equal(p[0], [1.0, -2.0, 3.0])
    assert st.step == 1


def test_first_step_is_bias_corrected_unit_direction():
    # m_hat = 1, v_hat = 1 -> delta = lr / (1 + eps)
    p = [np.zeros(4)]
    st = AdamState.for_params(p, lr=0.1, eps=1e-8)
    adam_step(p, [np.ones(4)], st)
    assert np.allclose(p[0], -0.1 / (1.0 + 1e-8), rtol=0, atol=1e-15)


def test_determinism_two_identical_runs(rng_factory):
    def run():
        gen = rng_factory(5, 0)
        p = [gen.standard_normal((3, 2)), gen.standard_normal(2)]
        st = AdamState.for_params(p, lr=1e-2)
        for _ in range(25):
            g = [gen.standard_normal(a.shape) for a in p]
            adam_step(p, g, st)
        return p

    a, b = run(), run()
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_layout_mismatch_raises():
    p = [np.zeros((2, 2))]
    st = AdamState.for_params(p)
    with pytest.raises(ValueError):
        adam_step(p, [np.zeros(3)], st)
    with pytest.raises(ValueError):
        adam_step(p, [np.zeros((2, 2)), np.zeros(1)], st)


def test_moments_match_param_layout_and_step_increases():
    p = [np.zeros((4, 3)), np.zeros(3)]
    st = AdamState.for_params(p)
    assert [m.shape for m in st.m] == [(4, 3), (3,)]
    assert [v.shape for v in st.v] == [(4, 3), (3,)]
    for expect in (1, 2, 3):
        adam_step(p, [np.ones((4, 3)), np.ones(3)], st)
        assert st.step == expect


def test_matches_reference_formula(rng):
    p = [rng.standard_normal(6)]
    g_seq = [rng.standard_normal(6) for _ in range(5)]
    st = AdamState.for_params(p, lr=3e-3, beta1=0.8, beta2=0.95, eps=1e-7)
    ref = p[0].copy()
    m = np.zeros(6)
    v = np.zeros(6)
    for k, g in enumerate(g_seq, start=1):
        adam_step(p, [g], st)
        m = 0.8 * m + 0.2 * g
        v = 0.95 * v + 0.05 * g * g
        ref -= 3e-3 * (m / (1 - 0.8**k)) / (np.sqrt(v / (1 - 0.95**k)) + 1e-7)
    assert np.allclose(p[0], ref, rtol=1e-12, atol=1e-14)
