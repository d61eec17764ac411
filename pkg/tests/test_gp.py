import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import dense_posterior, random_dataset
from priormean import gp as gpmod
from priormean.errors import InvalidArgumentError, SingularKernelError
from priormean.gp import (
    Dataset,
    KernelHyperparams,
    build_posterior,
    fit_hyperparameters,
    hyper_box,
    log_marginal_likelihood,
    matern52,
    matern52_matrix,
    mll_and_gradient,
    restart_points,
)
from priormean.means import ConstantMean, fit_constant

finite = st.floats(-10, 10, allow_nan=False)


def test_matern_at_zero_distance_is_amplitude():
    assert matern52([0.3, 0.1], [0.3, 0.1], KernelHyperparams(2.5, 7.0)) == 2.5


def test_matern_zero_inverse_lengthscale():
    assert matern52([0.0], [0.9], KernelHyperparams(1.7, 0.0)) == 1.7


def test_matern_unit_distance_matches_high_precision():
    mpmath.mp.dps = 40
    s5 = mpmath.sqrt(5)
    expected = (1 + s5 + mpmath.mpf(5) / 3) * mpmath.exp(-s5)
    got = matern52([0.0, 0.0], [0.6, 0.8], KernelHyperparams(1.0, 1.0))
    assert got == pytest.approx(float(expected), rel=1e-14)


def test_matern_rejects_nonfinite():
    with pytest.raises(InvalidArgumentError):
        matern52([np.nan], [0.0], KernelHyperparams(1.0, 1.0))


@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite),
       st.floats(1e-3, 1e3), st.floats(0, 1e2))
def test_matern_symmetric_and_bounded(x, y, t0, t1):
    h = KernelHyperparams(t0, t1)
    k = matern52(x, y, h)
    assert k == matern52(y, x, h)
    assert 0.0 <= k <= t0


def test_kernel_matrix_psd_with_default_nugget(rng):
    for _ in range(20):
        t, d = rng.integers(1, 13), rng.integers(1, 4)
        X = rng.random((t, d))
        h = KernelHyperparams(10 ** rng.uniform(-2, 2), 10 ** rng.uniform(-1, 2))
        K = matern52_matrix(X, X, h) + 1e-6 * h.theta0 * np.eye(t)
        assert np.linalg.eigvalsh(K).min() >= 0.0


def test_single_point_interpolates(zero_mean):
    data = Dataset([[0.4, 0.6]], [1.3])
    post = build_posterior(data, zero_mean, KernelHyperparams(2.0, 3.0), nugget=0.0)
    p = post.predict([0.4, 0.6])
    assert p.mu == pytest.approx(1.3, abs=1e-12)
    assert p.sigma2 == pytest.approx(0.0, abs=1e-12)


def test_prior_reversion_far_from_data(rng):
    data = random_dataset(rng, 8, 2)
    mean = ConstantMean("Max", 0.7)
    h = KernelHyperparams(1.9, 4.0)
    post = build_posterior(data, mean, h)
    far = np.array([10.0 / h.theta1 + 1.0 + 3.0, 5.0])
    p = post.predict(far)
    assert abs(p.mu - 0.7) <= 1e-6 * h.theta0
    assert abs(p.sigma2 - h.theta0) <= 1e-6 * h.theta0


def _two_point_oracle(x1, x2, f, m, xq, mq, h, eps):
    k = lambda a, b: matern52(a, b, h)
    a, b, c = k(x1, x1) + eps, k(x1, x2), k(x2, x2) + eps
    det = a * c - b * b
    inv = np.array([[c, -b], [-b, a]]) / det
    kq = np.array([k(xq, x1), k(xq, x2)])
    r = np.asarray(f) - np.asarray(m)
    mu = mq + kq @ inv @ r
    s2 = h.theta0 - kq @ inv @ kq
    mll = -0.5 * math.log(det) - 0.5 * r @ inv @ r
    return mu, s2, mll


def test_two_point_posterior_matches_explicit_inverse():
    h = KernelHyperparams(1.5, 2.0)
    x1, x2, xq = [0.1, 0.2], [0.7, 0.4], [0.35, 0.9]
    mean = ConstantMean("Median", 0.25)
    data = Dataset([x1, x2], [1.0, -0.5])
    post = build_posterior(data, mean, h, nugget=1e-6)
    mu, s2, mll = _two_point_oracle(x1, x2, [1.0, -0.5], [0.25, 0.25], xq, 0.25, h, post.nugget)
    p = post.predict(xq)
    assert p.mu == pytest.approx(mu, rel=1e-12)
    assert p.sigma2 == pytest.approx(s2, rel=1e-10)
    assert log_marginal_likelihood(data, mean, h, nugget=1e-6) == pytest.approx(mll, rel=1e-12)


def test_mll_single_point_with_exact_mean():
    data = Dataset([[0.5]], [2.0])
    mean = fit_constant("Arithmetic", [2.0])
    h = KernelHyperparams(3.0, 1.0)
    assert log_marginal_likelihood(data, mean, h, nugget=0.01) == pytest.approx(-0.5 * math.log(3.01), rel=1e-14)


def test_dense_oracle_equivalence(rng):
    for _ in range(25):
        t, d = int(rng.integers(1, 13)), int(rng.integers(1, 4))
        data = random_dataset(rng, t, d)
        mean = ConstantMean("Arithmetic", float(rng.normal()))
        h = KernelHyperparams(10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-0.5, 1))
        post = build_posterior(data, mean, h)
        Xq = rng.random((7, d))
        mu, s2 = post.predict_batch(Xq)
        omu, os2, omll = dense_posterior(data.X, data.f, mean(data.X), mean(Xq), Xq, h.theta0, h.theta1, post.nugget)
        np.testing.assert_allclose(mu, omu, rtol=1e-8, atol=1e-12)
        np.testing.assert_allclose(s2, np.maximum(os2, 0), rtol=1e-8, atol=1e-10 * h.theta0)
        assert log_marginal_likelihood(data, mean, h) == pytest.approx(omll, rel=1e-8)


def test_interpolation_with_tiny_nugget(rng, zero_mean):
    for _ in range(10):
        data = random_dataset(rng, int(rng.integers(2, 10)), 2)
        post = build_posterior(data, zero_mean, KernelHyperparams(1.0, 3.0), nugget=1e-10)
        mu, _ = post.predict_batch(data.X)
        assert np.max(np.abs(mu - data.f)) <= 1e-5


def test_variance_never_exceeds_prior(rng, zero_mean):
    data = random_dataset(rng, 10, 2)
    h = KernelHyperparams(2.0, 5.0)
    post = build_posterior(data, zero_mean, h)
    _, s2 = post.predict_batch(rng.random((500, 2)) * 1.4 - 0.2)
    assert np.all(s2 >= 0) and np.all(s2 <= h.theta0 + post.nugget)


def test_prediction_gradient_matches_finite_differences(rng):
    data = random_dataset(rng, 9, 3)
    mean = ConstantMean("Min", -0.3)
    post = build_posterior(data, mean, KernelHyperparams(1.3, 3.0))
    x = rng.random(3)
    mu, s2, dmu, ds2 = post.predict_with_gradient(x)
    h = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        mp, sp = post.predict_batch(x + e)
        mm, sm = post.predict_batch(x - e)
        assert dmu[j] == pytest.approx((mp[0] - mm[0]) / (2 * h), rel=1e-5, abs=1e-7)
        assert ds2[j] == pytest.approx((sp[0] - sm[0]) / (2 * h), rel=1e-5, abs=1e-7)


def test_mll_gradient_matches_finite_differences(rng):
    data = random_dataset(rng, 12, 2)
    resid = data.f - np.mean(data.f)
    step = 1e-5
    for _ in range(5):
        z = np.array([rng.uniform(-1, 1), rng.uniform(0, 2)])
        _, g = mll_and_gradient(z, data, resid)
        for j in range(2):
            e = np.zeros(2)
            e[j] = step
            fd = (mll_and_gradient(z + e, data, resid)[0] - mll_and_gradient(z - e, data, resid)[0]) / (2 * step)
            assert abs(g[j] - fd) <= 1e-4 * max(abs(fd), 1.0)


def test_singular_kernel_raises_when_jitter_exhausted(monkeypatch, zero_mean):
    monkeypatch.setattr(gpmod, "JITTER_MAX", 1e-7)
    data = Dataset([[0.5], [0.5]], [0.0, 1.0])
    with pytest.raises(SingularKernelError):
        build_posterior(data, zero_mean, KernelHyperparams(1.0, 1.0), nugget=0.0)


def test_duplicate_points_recover_by_jitter(zero_mean):
    data = Dataset([[0.5], [0.5]], [0.0, 1.0])
    post = build_posterior(data, zero_mean, KernelHyperparams(1.0, 1.0), nugget=0.0)
    assert post.nugget > 0


def test_fit_beats_every_start_and_is_deterministic(rng):
    data = random_dataset(rng, 15, 2)
    mean = fit_constant("Arithmetic", data.f)
    theta = fit_hyperparameters(data, mean, restarts=6, seed=11)
    best = log_marginal_likelihood(data, mean, theta)
    for z in restart_points(2, 6, 11):
        h = KernelHyperparams(*np.exp(z))
        assert best >= log_marginal_likelihood(data, mean, h) - 1e-9
    assert fit_hyperparameters(data, mean, restarts=6, seed=11) == theta
    lo, hi = hyper_box(2).T
    assert np.all(np.array([theta.theta0, theta.theta1]) >= lo * (1 - 1e-12))
    assert np.all(np.array([theta.theta0, theta.theta1]) <= hi * (1 + 1e-12))


def test_incumbent_is_a_start():
    inc = KernelHyperparams(0.5, 3.0)
    starts = restart_points(2, 4, 0, inc)
    np.testing.assert_allclose(np.exp(starts[0]), [0.5, 3.0])


def test_recovers_generating_lengthscale():
    rng = np.random.default_rng(5)
    X = rng.random((40, 2))
    h_true = KernelHyperparams(1.0, 5.0)
    K = matern52_matrix(X, X, h_true) + 1e-8 * np.eye(40)
    f = np.linalg.cholesky(K) @ rng.normal(size=40)
    data = Dataset(X, f)
    mean = ConstantMean("Arithmetic", 0.0)
    theta = fit_hyperparameters(data, mean, restarts=10, seed=3)
    # oracle: dense log-grid search over the box
    lo, hi = np.log(hyper_box(2)).T
    g0 = np.linspace(lo[0], hi[0], 60)
    g1 = np.linspace(lo[1], hi[1], 60)
    vals = np.array([[log_marginal_likelihood(data, mean, KernelHyperparams(np.exp(a), np.exp(b)))
                      for b in g1] for a in g0])
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    assert 2.5 <= theta.theta1 <= 10.0
    assert 0.5 <= theta.theta1 / np.exp(g1[j]) <= 2.0
    assert log_marginal_likelihood(data, mean, theta) >= vals.max() - 1e-6


def test_fallback_when_all_restarts_fail(monkeypatch, rng):
    def broken(*args, **kwargs):
        raise SingularKernelError("nope")

    monkeypatch.setattr(gpmod, "mll_and_gradient", broken)
    data = random_dataset(rng, 5, 1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        theta = fit_hyperparameters(data, fit_constant("Arithmetic", data.f), restarts=3, seed=0)
    assert theta.fallback
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)
    mid = np.exp(np.log(hyper_box(1)).mean(axis=1))
    np.testing.assert_allclose([theta.theta0, theta.theta1], mid)


def test_dataset_validation():
    with pytest.raises(InvalidArgumentError):
        Dataset([[0.1], [0.2]], [1.0])
    with pytest.raises(InvalidArgumentError):
        Dataset([[np.inf]], [1.0])
