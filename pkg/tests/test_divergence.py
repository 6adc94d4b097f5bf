import math

import numpy as np
import pytest
from scipy import stats

from scolab import (
    CertificateError,
    InputError,
    NormBall,
    Sample,
    bregman,
    build_certificate,
    build_net,
    check_conditional_claims,
    derived_rng,
    derived_seed,
    divergence_report,
    draw_sample,
    dual_norm_eval,
    empirical_bregman,
    make_appendix_instance,
    make_coin_instance,
    make_hard_instance,
    make_quadratic_instance,
    minimize_empirical,
    near_erm_candidates,
    population_minimizer,
    representativeness,
    truncated_divergence,
    uniform_ball_sample,
    verify_concentration,
)
from scolab.divergence import divergence_values


@pytest.fixture(scope="module")
def coin():
    return make_coin_instance(0.1)


@pytest.fixture(scope="module")
def coin_cert(coin):
    return build_certificate(coin, np.zeros(1), tol=1e-9)


@pytest.fixture(scope="module")
def quad():
    return make_quadratic_instance([[-1.0], [1.0]], NormBall("l2", 1))


@pytest.fixture(scope="module")
def quad_cert(quad):
    return build_certificate(quad, np.zeros(1), tol=1e-9)


@pytest.fixture(scope="module")
def hard():
    return make_hard_instance(2, 0.5, 2, seed=7)


@pytest.fixture(scope="module")
def hard_cert(hard):
    return build_certificate(hard, np.zeros(2), tol=1e-9)


# --- certificates -----------------------------------------------------------


def test_quadratic_certificate_gradients(quad, quad_cert):
    # gradients of the smooth family at the center: (xstar - z)/2 = -z/2
    assert np.allclose(quad_cert.subgradients.ravel(), [0.5, -0.5])
    assert np.allclose(quad_cert.mean_subgradient, [0.0])
    assert quad_cert.violation == 0.0


def test_coin_certificate_inside_subdifferential(coin, coin_cert):
    g_heads, g_tails = coin_cert.subgradients.ravel()
    assert 1 - 0.2 <= g_heads <= 1 + 0.2
    assert -1 - 0.2 <= g_tails <= -1 + 0.2
    assert np.allclose(coin_cert.mean_subgradient, [0.0])
    assert coin_cert.violation <= 1e-9


def test_hard_certificate_constant_zero(hard, hard_cert):
    assert hard_cert.is_constant
    assert np.allclose(hard_cert.constant_gradient, 0.0)
    assert hard_cert.violation == 0.0


def test_appendix_certificate_decomposition():
    inst = make_appendix_instance()
    cert = build_certificate(inst, np.array([-0.1]), tol=1e-9)
    g1, g2 = cert.subgradients.ravel()
    assert cert.violation <= 1e-9
    assert g1 == pytest.approx(-0.4, abs=1e-9)
    assert g2 == pytest.approx(0.4, abs=1e-9)
    assert -1.0 <= g2 <= 1.0
    # the mean subgradient vanishes: 0 = (g1 + g2)/2 decomposes optimality
    assert abs(g1 + g2) <= 2e-9


def test_certificate_mean_matches_weights(coin, coin_cert, quad, quad_cert):
    for inst, cert in ((coin, coin_cert), (quad, quad_cert)):
        assert np.allclose(
            inst.weights @ cert.subgradients, cert.mean_subgradient, atol=1e-12
        )


def test_certificate_subgradient_inequality_probes(coin, coin_cert):
    rng = derived_rng(11)
    ys = uniform_ball_sample(coin.ball, rng, 1000)
    x0 = coin_cert.minimizer
    for zi, z in enumerate(coin.outcomes):
        g = coin_cert.subgradients[zi]
        f0 = coin.loss(z, x0)
        for y in ys:
            assert coin.loss(z, y) >= f0 + g @ (y - x0) - 1e-9


def test_certificate_dual_norm_cap(coin, coin_cert, quad, quad_cert):
    for inst, cert in ((coin, coin_cert), (quad, quad_cert)):
        for g in cert.subgradients:
            assert dual_norm_eval(inst.ball, g) <= inst.lipschitz + 1e-9


def test_certificate_rejects_non_minimizer(quad):
    with pytest.raises(InputError):
        build_certificate(quad, np.array([0.9]), tol=1e-9)


def test_certificate_error_carries_direction():
    # a biased mixture: the mean slope at x=0 cannot be driven to zero
    inst = make_quadratic_instance([[0.5], [0.9]], NormBall("l2", 1))
    with pytest.raises((CertificateError, InputError)):
        build_certificate(inst, np.zeros(1), tol=1e-9)


# --- divergences -------------------------------------------------------------


def test_quadratic_divergence_closed_form(quad, quad_cert):
    rng = derived_rng(21)
    for x in uniform_ball_sample(quad.ball, rng, 100):
        assert bregman(quad_cert, quad, x) == pytest.approx(float(x[0] ** 2) / 4, abs=1e-9)


def test_divergence_zero_at_minimizer(coin, coin_cert, quad, quad_cert):
    assert bregman(coin_cert, coin, coin_cert.minimizer) == 0.0
    assert bregman(quad_cert, quad, quad_cert.minimizer) == 0.0


def test_coin_divergence_formula(coin, coin_cert):
    for x in np.linspace(-1, 1, 9):
        assert bregman(coin_cert, coin, np.array([x])) == pytest.approx(0.2 * abs(x))


def test_empirical_divergence_single_outcome(coin, coin_cert):
    sample = Sample(indices=np.array([0]), n=1, seed=0)
    x = np.array([0.7])
    per_outcome = float(divergence_values(coin_cert, coin, np.array([0]), x)[0])
    assert empirical_bregman(coin_cert, coin, sample, x) == pytest.approx(per_outcome)
    assert per_outcome >= -1e-12


def test_coin_empirical_divergence_sample_free(coin, coin_cert):
    # the sample dependence cancels: D_hat(x, 0) = 0.2 |x| for every sample
    for seed in range(5):
        sample = draw_sample(coin, 30, seed=seed)
        for x in (-0.8, 0.3, 1.0):
            assert empirical_bregman(coin_cert, coin, sample, np.array([x])) == pytest.approx(
                0.2 * abs(x), abs=1e-12
            )


def test_exact_expectation_sample_gives_population(coin, coin_cert):
    sample = Sample(indices=np.array([0, 1]), n=2, seed=0)
    for x in np.linspace(-1, 1, 7):
        point = np.array([x])
        assert empirical_bregman(coin_cert, coin, sample, point) == pytest.approx(
            bregman(coin_cert, coin, point), abs=1e-12
        )


def test_population_divergence_is_weighted_mean(coin, coin_cert):
    x = np.array([0.6])
    table = divergence_values(coin_cert, coin, np.arange(2), x)
    assert bregman(coin_cert, coin, x) == pytest.approx(
        float(coin.weights @ table), abs=1e-12
    )


def test_divergence_nonnegative_on_net(quad, quad_cert, coin, coin_cert):
    net = build_net(NormBall("l2", 1), 0.05, seed=1)
    sample = draw_sample(coin, 25, seed=3)
    for x in net.points:
        assert bregman(coin_cert, coin, x) >= -1e-9
        assert bregman(quad_cert, quad, x) >= -1e-9
        assert empirical_bregman(coin_cert, coin, sample, x) >= -1e-9


# --- truncated divergence ----------------------------------------------------


def test_truncation_inactive_matches_bregman(coin, coin_cert):
    # |<g, x - x*>| <= L < 2c here, so clipping never engages
    sample = draw_sample(coin, 40, seed=5)
    for x in (-1.0, -0.2, 0.5):
        point = np.array([x])
        trunc_pop, trunc_emp = truncated_divergence(coin_cert, coin, sample, point)
        assert trunc_pop == pytest.approx(bregman(coin_cert, coin, point), abs=1e-12)
        assert trunc_emp == pytest.approx(
            empirical_bregman(coin_cert, coin, sample, point), abs=1e-12
        )


def test_hard_truncated_values(hard, hard_cert):
    v0 = hard.meta["directions"][0]
    covered = Sample(indices=np.array([1, 1, 0, 2]), n=4, seed=0)
    trunc_pop, trunc_emp = truncated_divergence(hard_cert, hard, covered, v0)
    assert trunc_pop == pytest.approx(0.25)
    assert trunc_emp == pytest.approx(0.25)  # two of four draws activate v0


def test_per_outcome_truncated_range(hard, hard_cert):
    rng = derived_rng(31)
    sample = draw_sample(hard, 50, seed=9)
    c = hard.bound
    for x in uniform_ball_sample(hard.ball, rng, 20):
        losses = hard.losses(sample.indices, np.vstack([x, np.zeros(2)]))
        lin = hard_cert.gradients_for(sample.indices) @ x
        per_outcome = losses[:, 0] - losses[:, 1] - np.maximum(lin, -2 * c)
        assert np.all(per_outcome >= -1e-9)
        assert np.all(per_outcome <= 4 * c + 1e-9)


# --- representativeness ------------------------------------------------------


def test_representativeness_exact_expectation_zero(coin, coin_cert):
    net = build_net(coin.ball, 0.1, seed=2)
    sample = Sample(indices=np.array([0, 1]), n=2, seed=0)
    assert representativeness(coin_cert, coin, sample, net) == pytest.approx(0.0, abs=1e-12)


def test_representativeness_coin_matches_mean(coin, coin_cert):
    net = build_net(coin.ball, 0.1, seed=2)
    sample = Sample(indices=np.zeros(10, dtype=np.int64), n=10, seed=0)  # mean +1
    # gap at x is -mean * x; the net maximum sits at its most negative point
    expected = max(-(1.0) * float(x[0]) for x in net.points)
    assert representativeness(coin_cert, coin, sample, net) == pytest.approx(expected)


def test_representativeness_single_outcome_zero():
    quad = make_quadratic_instance([[0.5]], NormBall("l2", 1))
    cert = build_certificate(quad, np.array([0.5]), tol=1e-8)
    net = build_net(quad.ball, 0.1, seed=2)
    sample = draw_sample(quad, 7, seed=1)
    assert representativeness(cert, quad, sample, net) == pytest.approx(0.0, abs=1e-12)


def test_representativeness_constant_certificate_exact(hard, hard_cert):
    sample = draw_sample(hard, 10, seed=4)
    assert representativeness(hard_cert, hard, sample, None) == 0.0


def test_divergence_report_fields(coin, coin_cert):
    net = build_net(coin.ball, 0.1, seed=2)
    sample = draw_sample(coin, 20, seed=6)
    report = divergence_report(coin_cert, coin, sample, np.array([0.5]), net)
    assert report.population_divergence == pytest.approx(0.1)
    assert report.empirical_divergence == pytest.approx(0.1)
    assert report.truncated_population >= -1e-9
    assert report.certificate_label == coin_cert.label
    assert report.sample_seed == 6


# --- concentration verifiers --------------------------------------------------


def test_bregman_mode_hard_matches_binomial_oracle(hard, hard_cert):
    v0 = hard.meta["directions"][0]
    out = verify_concentration(hard, hard_cert, v0, n=100, trials=2000, seed=13, mode="bregman")
    assert out["analytic_bound"] == pytest.approx(math.exp(-0.625))
    oracle = float(stats.binom.cdf(25, 100, 0.5))
    gate = 3.0 * math.sqrt(oracle * (1 - oracle) / 2000) + 1e-12
    assert abs(out["empirical"] - oracle) <= gate
    assert out["passed"]


def test_bregman_mode_rejects_zero_divergence(coin, coin_cert):
    with pytest.raises(InputError):
        verify_concentration(coin, coin_cert, np.zeros(1), 50, 100, 0, "bregman")


def test_gradient_mode_coin(coin, coin_cert):
    out = verify_concentration(coin, coin_cert, np.array([0.5]), n=100, trials=2000,
                               seed=14, mode="gradient")
    assert out["analytic_bound"] == pytest.approx(0.04)
    assert abs(out["empirical"] - 0.01) <= 4.0 * out["mc_stderr"]
    assert out["passed"]


def test_variance_mode_coin_constant(coin, coin_cert):
    out = verify_concentration(coin, coin_cert, np.array([0.5]), n=20, trials=100,
                               seed=15, mode="variance")
    assert out["empirical"] == pytest.approx(0.0, abs=1e-15)
    assert out["passed"]


def test_variance_mode_bound_formula(hard, hard_cert):
    v0 = hard.meta["directions"][0]
    out = verify_concentration(hard, hard_cert, v0, n=50, trials=400, seed=16, mode="variance")
    lam = 0.25
    assert out["analytic_bound"] == pytest.approx((4 * hard.bound - lam) * lam)
    # exact per-outcome variance is (1/4) eps0 (1 - eps0) = 1/16
    assert abs(out["empirical"] - 1.0 / 16.0) <= 4.0 * out["mc_stderr"] + 1e-3
    assert out["passed"]


def test_rep_mode_coin(coin, coin_cert):
    net = build_net(coin.ball, 0.1, seed=2)
    out = verify_concentration(coin, coin_cert, np.zeros(1), n=400, trials=200,
                               seed=17, mode="rep", net=net, delta=0.1)
    assert out["analytic_bound"] == 0.1
    assert out["passed"]


def test_unknown_mode_rejected(coin, coin_cert):
    with pytest.raises(InputError):
        verify_concentration(coin, coin_cert, np.zeros(1), 10, 100, 0, "bogus")


# --- conditional claims --------------------------------------------------------


def test_conditional_claims_hold_on_live_samples(coin, coin_cert):
    net = build_net(coin.ball, 0.05, seed=2)
    xstar = population_minimizer(coin, 0.01).point
    total = 0
    for t in range(300):
        sample = draw_sample(coin, 100, derived_seed(800, t))
        xhat = minimize_empirical(coin, sample, 0.01).point
        points = near_erm_candidates(coin, sample, net, xhat, xstar)
        total += len(
            check_conditional_claims(coin_cert, coin, sample, points, 0.3, net.radius)
        )
    assert total == 0


def test_conditional_claims_hold_for_quadratic(quad, quad_cert):
    net = build_net(quad.ball, 0.05, seed=2)
    for t in range(100):
        sample = draw_sample(quad, 60, derived_seed(801, t))
        violations = check_conditional_claims(
            quad_cert, quad, sample, net.points, 0.2, net.radius
        )
        assert violations == []


def test_conditional_claims_flag_fabricated_breach(coin, coin_cert):
    # a corrupted subgradient table satisfies the hypotheses (gap zero) while
    # inflating the empirical divergence far beyond the 7 eps conclusion
    sample = Sample(indices=np.array([0, 1] * 10), n=20, seed=0)
    fake = coin_cert.__class__(
        minimizer=np.zeros(1),
        mean_subgradient=np.array([10.0]),
        violation=0.0,
        label="fake",
        subgradients=np.array([[10.0], [10.0]]),
    )
    violations = check_conditional_claims(
        fake, coin, sample, np.array([[-1.0]]), eps=0.1, net_radius=0.0
    )
    assert {v["claim"] for v in violations} >= {"emp_divergence_upper"}
