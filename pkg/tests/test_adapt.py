import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagmc import adapt as ad


def state_1d(mean=0.0, L=1.0, theta=1.0):
    return ad.AdaptState(theta=theta, shape=np.array([[L]]), mean=np.array([mean]))


def test_eta_examples():
    assert ad.eta(ad.WeightSchedule("reciprocal"), 1) == 0.5
    assert ad.eta(ad.WeightSchedule("constant", eta0=0.01), 10 ** 6) == 0.01
    assert ad.eta(ad.WeightSchedule("power", gamma=0.6), 99) == pytest.approx(0.0630957, abs=1e-7)


def test_weight_schedule_validation():
    with pytest.raises(ValueError):
        ad.WeightSchedule("constant", eta0=1.0)
    with pytest.raises(ValueError):
        ad.WeightSchedule("power", gamma=0.5)
    with pytest.raises(ValueError):
        ad.WeightSchedule("harmonic")


def test_am_update_scalar():
    s = ad.am_update(state_1d(), [2.0], 0.5)
    assert s.mean[0] == 1.0
    assert s.shape[0, 0] == pytest.approx(math.sqrt(2.5), rel=1e-15)
    assert s.theta == 1.0


def test_am_update_zero_innovation():
    L = np.array([[1.0, 0.0], [0.3, 0.8]])
    s0 = ad.AdaptState(theta=0.7, shape=L, mean=np.array([0.2, -1.0]))
    s = ad.am_update(s0, [0.2, -1.0], 0.3)
    np.testing.assert_array_equal(s.mean, s0.mean)
    np.testing.assert_allclose(s.shape, math.sqrt(0.7) * L, rtol=1e-15)


def test_am_update_2d():
    s0 = ad.AdaptState(theta=1.0, shape=np.eye(2), mean=np.zeros(2))
    s = ad.am_update(s0, [1.0, 1.0], 0.5)
    np.testing.assert_allclose(s.shape, np.linalg.cholesky([[1.0, 0.5], [0.5, 1.0]]), rtol=1e-14)
    np.testing.assert_array_equal(s.mean, [0.5, 0.5])


def test_rb_am_example():
    s = ad.rb_am_update(state_1d(), [0.0], [2.0], 0.5, 0.5)
    assert s.mean[0] == 0.5
    assert s.shape[0, 0] == pytest.approx(math.sqrt(1.5), rel=1e-15)


def test_rb_am_degenerate_cases(rng):
    for _ in range(100):
        d = int(rng.integers(1, 5))
        s0 = ad.AdaptState(theta=1.0, shape=np.eye(d) * rng.uniform(0.5, 2), mean=rng.normal(size=d))
        x, y, eta = rng.normal(size=d), rng.normal(size=d), rng.uniform(0.01, 0.9)
        for alpha, target in ((1.0, y), (0.0, x)):
            rb = ad.rb_am_update(s0, x, y, alpha, eta)
            am = ad.am_update(s0, target, eta)
            np.testing.assert_allclose(rb.mean, am.mean, rtol=0, atol=1e-14)
            np.testing.assert_allclose(rb.shape, am.shape, rtol=0, atol=1e-14)


def test_ascm_examples():
    assert ad.ascm_update(1.0, 0.234, 0.1, 0.234) == 1.0
    assert ad.ascm_update(2.0, 0.0, 0.5, 0.234) == 1.0
    assert ad.ascm_update(1.0, 0.468, 0.1, 0.234) == pytest.approx(1.1, abs=1e-15)


def test_amcmc_examples():
    assert ad.amcmc_scaling(1.0, 0.5, 9999) == pytest.approx(1.0100502, abs=1e-7)
    assert ad.amcmc_scaling(1.0, 0.44, 9999) == pytest.approx(0.9900498, abs=1e-7)
    assert ad.amcmc_scaling(2.0, 0.0, 0) == pytest.approx(2.0 * math.exp(-0.01), rel=1e-15)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0, 1), st.integers(9999, 10 ** 9))
def test_amcmc_step_bounded(sc, alpha, k):
    r = ad.amcmc_scaling(sc, alpha, k) / sc
    assert math.exp(-0.01) * (1 - 1e-15) <= r <= math.exp(0.01) * (1 + 1e-15)


def test_default_target_alpha():
    assert ad.default_target_alpha(1) == 0.44
    assert ad.default_target_alpha(2) == 0.234
    assert ad.default_target_alpha(100) == 0.234


def test_mix_probability():
    assert ad.mix_probability(ad.MixSchedule("constant", 0.0), 17) == 0.0
    assert ad.mix_probability(ad.MixSchedule("constant", 1.0), 17) == 1.0
    seq = ad.MixSchedule("user_sequence", sequence=lambda n: 1.0 / n)
    assert ad.mix_probability(seq, 4) == 0.25
    clamp = ad.MixSchedule("user_sequence", sequence=lambda n: n - 5.0)
    assert ad.mix_probability(clamp, 1) == 0.0
    assert ad.mix_probability(clamp, 9) == 1.0
    with pytest.raises(ValueError):
        ad.mix_probability(ad.MixSchedule("user_sequence", sequence=lambda n: float("nan")), 1)


def test_adaptation_active():
    assert ad.adaptation_active(ad.BurninStrategy("greedy", 100), 1) == (True, False)
    trad = ad.BurninStrategy("traditional", 100)
    assert ad.adaptation_active(trad, 50) == (True, True)
    assert ad.adaptation_active(trad, 150) == (True, False)
    freeze = ad.BurninStrategy("freeze", 100)
    assert ad.adaptation_active(freeze, 100) == (True, False)
    assert ad.adaptation_active(freeze, 150) == (False, False)


def test_algorithm_names():
    a = ad.AlgorithmChoice.from_name("rbam+ascm")
    assert (a.covariance_adapt, a.scaling_adapt) == ("rb_am", "ascm")
    assert not ad.AlgorithmChoice.from_name("metropolis").adaptive
    with pytest.raises(ValueError):
        ad.AlgorithmChoice.from_name("hmc")
    with pytest.raises(ValueError):
        ad.AlgorithmChoice(scaling_adapt="user_rule")


def test_initial_defaults():
    s = ad.AdaptState.initial([1.0, 2.0, 3.0, 4.0])
    assert s.theta == pytest.approx(2.38 / 2)
    np.testing.assert_array_equal(s.shape, np.eye(4))
    np.testing.assert_array_equal(s.mean, [1.0, 2.0, 3.0, 4.0])
    assert s.theta0 == s.theta and s.step == 0


def reference_recursion(x0, xs, etas):
    """Plain covariance recursion, no factorization."""
    M = np.array(x0, dtype=float)
    C = np.eye(len(M))
    for x, e in zip(xs, etas):
        diff = x - M
        C = (1 - e) * C + e * np.outer(diff, diff)
        M = M + e * diff
    return M, C


def test_am_matches_direct_recursion(rng):
    for d in range(1, 6):
        x0 = rng.normal(size=d)
        xs = rng.normal(size=(1000, d)) * rng.uniform(0.1, 3, size=d)
        etas = [1.0 / (n + 1) for n in range(1, 1001)]
        s = ad.AdaptState.initial(x0)
        for x, e in zip(xs, etas):
            s = ad.am_update(s, x, e)
        M, C = reference_recursion(x0, xs, etas)
        np.testing.assert_allclose(s.covariance, C, rtol=1e-9, atol=1e-9 * np.abs(C).max())
        np.testing.assert_allclose(s.mean, np.vstack([x0, xs]).mean(axis=0), rtol=0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(1, 200), st.integers(0, 2**32 - 1))
def test_running_mean_property(d, n, seed):
    r = np.random.default_rng(seed)
    pts = r.normal(size=(n + 1, d)) * 10
    s = ad.AdaptState.initial(pts[0])
    for k in range(1, n + 1):
        s = ad.am_update(s, pts[k], ad.eta(ad.WeightSchedule(), k))
    np.testing.assert_allclose(s.mean, pts.mean(axis=0), rtol=0, atol=1e-12 * max(1.0, np.abs(pts).max()))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4),
       st.lists(st.tuples(st.floats(0.001, 0.999), st.floats(0, 1)), min_size=1, max_size=40),
       st.integers(0, 2**32 - 1))
def test_positivity_property(d, steps, seed):
    r = np.random.default_rng(seed)
    s = ad.AdaptState.initial(r.normal(size=d))
    for eta, alpha in steps:
        x, y = r.normal(size=d), r.normal(size=d)
        s = ad.rb_am_update(s, x, y, alpha, eta)
        s.theta = ad.ascm_update(s.theta, alpha, eta, 0.234)
        assert s.theta > 0
        assert np.all(np.diag(s.shape) > 0)
