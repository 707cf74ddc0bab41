import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from ibc.analytic import (
    MomentPair,
    QuadCoeffs,
    Weights,
    expected_cost,
    filter_step,
    ibc_step1,
    ibc_step2,
    olfo_objective,
    predicted_mi,
    propagate_moments,
    psi,
    step2_coeffs,
)
from ibc.dp import r1_eval
from ibc.lingauss import DiscreteModel, GaussianBelief, kf_predict, kf_update, simulate_step
from ibc.optim import SearchSpec

# value returned by tune_nu for the default setup (checked in test_optim)
NU_TUNED = 0.05873078
S0_POST = np.diag([5.0, 0.1 * 0.01 / 0.11])


def _lq_model(a=0.9, b=0.5):
    z = np.zeros((2, 2))
    return DiscreteModel(A0=np.diag([1.0, a]), A1=z, B=[0.0, b], D0=np.diag([0.1, 0.2]), D1=z, D2=z,
                         C=[0.0, 1.0], s_v=0.01)


def test_propagate_equals_predict(model, belief):
    for u in (-2.0, 0.0, 0.7, 4.0):
        p = propagate_moments(model, belief, u)
        k = kf_predict(belief, model, u)
        assert np.allclose(p.mu, k.m, atol=0) and np.allclose(p.sigma, k.S, atol=0)


def test_propagate_zero():
    p = propagate_moments(_lq_model(), MomentPair(np.zeros(2), np.eye(2)), 0.0)
    assert np.allclose(p.mu, 0.0)


def test_sigma1_entrywise(model, coef):
    u = 2.0352
    p = propagate_moments(model, (np.zeros(2), S0_POST), u)
    want = (coef["a3"] * u) ** 2 * 5.0 + coef["a2"] ** 2 * S0_POST[1, 1] + coef["d3"] + coef["d4"] * u * u
    assert p.sigma[1, 1] == pytest.approx(want, rel=1e-12)


def test_predicted_mi_entrywise(model, coef):
    b = GaussianBelief([0.0, 0.0], S0_POST)
    c = 4.0 * coef["a3"] ** 2 * 5.0 + coef["a2"] ** 2 * S0_POST[1, 1] + coef["d3"] + 4.0 * coef["d4"]
    assert predicted_mi(model, b, 2.0) == pytest.approx(0.5 * np.log1p(c / 0.01), rel=1e-12)


def test_predicted_mi_trivial_cases():
    z = np.zeros((2, 2))
    m = DiscreteModel(A0=np.eye(2), A1=np.eye(2), B=[0.0, 1.0], D0=z, D1=z, D2=z, C=[0.0, 1.0], s_v=1.0)
    assert predicted_mi(m, GaussianBelief([0, 0], z), 3.0) == 0.0
    noisy = DiscreteModel(A0=np.eye(2), A1=np.eye(2), B=[0.0, 1.0], D0=np.eye(2), D1=z, D2=z,
                          C=[0.0, 1.0], s_v=1e300)
    assert predicted_mi(noisy, GaussianBelief([0, 0], np.eye(2)), 1.0) < 1e-299


def test_predicted_mi_nonnegative_and_even(model, belief):
    for u in np.linspace(-6, 6, 49):
        v = predicted_mi(model, belief, u)
        assert v >= 0
        assert v == pytest.approx(predicted_mi(model, belief, -u), abs=1e-9)


def test_expected_cost_pure_control(model, belief):
    w = Weights(q=(0.0, 0.0), r=(0.3, 0.7))
    assert expected_cost(model, belief, 1.5, -2.0, w) == pytest.approx(0.5 * (0.3 * 2.25 + 0.7 * 4.0))


def test_expected_cost_drift_only(model, belief, weights):
    s1 = model.A0 @ belief.S @ model.A0.T + model.D0
    s2 = model.A0 @ s1 @ model.A0.T + model.D0
    assert expected_cost(model, belief, 0.0, 0.0, weights) == pytest.approx(0.5 * s2[1, 1], rel=1e-12)


def test_expected_cost_monte_carlo(model, weights):
    b = GaussianBelief([0.1, 0.4], np.diag([5.0, 0.1]))
    u0, u1 = 1.2, -0.8
    rng = np.random.default_rng(3)
    n = 100_000
    x = rng.multivariate_normal(b.m, b.S, size=n)
    costs = np.zeros(n)
    for u in (u0, u1):
        x = x @ model.A(u).T + model.B * u + rng.standard_normal((n, 2)) @ np.linalg.cholesky(model.D(u)).T
        if u == u1:
            costs += x[:, 1] ** 2
    costs = 0.5 * (costs + weights.r[0] * u0**2 + weights.r[1] * u1**2)
    se = costs.std() / np.sqrt(n)
    assert abs(costs.mean() - expected_cost(model, b, u0, u1, weights)) < 3 * se


def test_step2_coeffs_trivial(model):
    z = np.zeros((2, 2))
    m = DiscreteModel(A0=model.A0, A1=model.A1, B=model.B, D0=z, D1=z, D2=z, C=model.C, s_v=0.01)
    w = Weights()
    c = step2_coeffs(m, np.zeros(2), z, w)
    # the input still acts through B
    assert (c.alpha, c.beta, c.gamma) == pytest.approx((model.B[1] ** 2 + w.r[1], 0.0, 0.0))
    m0 = DiscreteModel(A0=model.A0, A1=model.A1, B=[0.0, 0.0], D0=z, D1=z, D2=z, C=model.C, s_v=0.01)
    c = step2_coeffs(m0, np.zeros(2), z, w)
    assert (c.alpha, c.beta, c.gamma) == pytest.approx((w.r[1], 0.0, 0.0))
    c = step2_coeffs(model, [0.3, 1.0], np.eye(2), Weights(q=(1.0, 0.0)))
    assert (c.alpha, c.beta, c.gamma) == pytest.approx((w.r[1], 0.0, 0.0))


def test_step2_coeffs_against_expected_cost(model, weights):
    b = GaussianBelief([0.0, 0.5], np.diag([5.0, 0.1]))
    u0 = 1.1
    p1 = propagate_moments(model, b, u0)
    c = step2_coeffs(model, p1.mu, p1.sigma, weights)
    Q1 = weights.Q(1)
    first = 0.5 * (p1.mu @ Q1 @ p1.mu + weights.r[0] * u0**2 + np.trace(Q1 @ p1.sigma))
    for u in np.linspace(-2, 2, 5):
        assert c(u) + first == pytest.approx(expected_cost(model, b, u0, u, weights), abs=1e-10)


def test_quad_coeffs_alpha_dominates_r(model):
    c = step2_coeffs(model, [1.0, -1.0], np.eye(2), Weights())
    assert c.alpha >= 1e-3
    assert isinstance(c, QuadCoeffs)


def test_psi_zero_nu_is_olfo(model, belief, weights):
    for u0 in np.linspace(-4, 4, 17):
        brute = minimize_scalar(lambda u1: expected_cost(model, belief, u0, u1, weights),
                                bracket=(-50, 50), tol=1e-12).fun
        assert olfo_objective(model, belief, u0, weights) == pytest.approx(brute, abs=1e-10)


def test_psi_even(model, belief, weights):
    for u in np.linspace(0, 6, 25):
        for cov in ("filtered", "predicted"):
            a = psi(model, belief, u, 0.3, weights, covariance=cov)
            b = psi(model, belief, -u, 0.3, weights, covariance=cov)
            assert a == pytest.approx(b, abs=1e-9)


def test_psi_rejects_bad_mode(model, belief, weights):
    with pytest.raises(ValueError):
        psi(model, belief, 1.0, 0.1, weights, covariance="smoothed")
    with pytest.raises(ValueError):
        psi(model, belief, 1.0, -0.1, weights)


def test_min_psi_nonincreasing_in_nu(model, belief, weights):
    grid = np.linspace(-6, 6, 241)
    mins = [min(psi(model, belief, u, nu, weights) for u in grid) for nu in np.linspace(0, 1.5, 7)]
    assert all(b <= a + 1e-12 for a, b in zip(mins, mins[1:]))


def test_ibc_step1_tuned_nu(model, belief, weights):
    res = ibc_step1(model, belief, NU_TUNED, weights)
    assert res.multiplicity == 2
    assert res.control == pytest.approx(2.0352, abs=0.05)
    assert res.minimizers[0] == pytest.approx(-res.minimizers[1], abs=1e-6)


def test_ibc_step1_idle_control(model, belief):
    res = ibc_step1(model, belief, 0.0, Weights(q=(0.0, 1.0), r=(100.0, 1e-3)), SearchSpec(step=0.05))
    assert abs(res.control) < 1e-4


def test_ibc_step1_lq_sanity():
    a, b, r0, r1, mean = 0.9, 0.5, 0.1, 0.1, 1.0
    m = _lq_model(a, b)
    w = Weights(q=(0.0, 1.0), r=(r0, r1))
    bel = GaussianBelief([0.0, mean], np.diag([1.0, 0.2]))
    e = a * a * mean / (1.0 + a * a * b * b / r0 + b * b / r1)
    want = -a * b * e / r0
    for nu in (0.0, 0.8):
        res = ibc_step1(m, bel, nu, w, SearchSpec(lo=-3, hi=3, step=0.01, tol=1e-9))
        assert res.control == pytest.approx(want, abs=1e-6)


def test_ibc_step2_matches_dp(model, weights):
    rng = np.random.default_rng(5)
    for _ in range(100):
        u0, y0, y1 = rng.uniform(-4, 4), rng.normal(0, 0.5), rng.normal(0, 2)
        b0 = kf_update(GaussianBelief([0.0, 0.0], np.diag([5.0, 0.1])), model, y0)
        post = filter_step(model, b0, u0, y1)
        assert ibc_step2(model, post, weights) == pytest.approx(r1_eval(model, b0, u0, y1, weights).u1,
                                                                abs=1e-12)


def test_ibc_step2_is_minimum(model, belief, weights):
    post = filter_step(model, belief, 2.0, 0.4)
    c = step2_coeffs(model, post.m, post.S, weights)
    u = ibc_step2(model, post, weights)
    assert c(u + 1e-4) > c(u) and c(u - 1e-4) > c(u)


def test_ibc_step2_no_incentive():
    z = np.zeros((2, 2))
    m = DiscreteModel(A0=np.eye(2), A1=np.zeros((2, 2)), B=[0.0, 1.0], D0=np.eye(2), D1=z, D2=z,
                      C=[0.0, 1.0], s_v=0.01)
    assert ibc_step2(m, GaussianBelief([0, 0], np.eye(2)), Weights()) == 0.0


def test_ibc_step2_regression(model, belief, weights):
    # closed loop with the tuned first control and a simulated observation
    rng = np.random.default_rng(2024)
    x0 = rng.multivariate_normal(belief.m, belief.S)
    u0 = ibc_step1(model, belief, NU_TUNED, weights, SearchSpec(step=0.05)).control
    _, y1 = simulate_step(model, x0, u0, rng)
    u1 = ibc_step2(model, filter_step(model, belief, u0, y1), weights)
    assert u1 == pytest.approx(REGRESSION_U1, rel=1e-9)


REGRESSION_U1 = -1.5120837335206918
