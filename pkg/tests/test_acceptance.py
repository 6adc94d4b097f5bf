"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.  The sweeps behind A5/A6 are shared module fixtures;
A10 reads their conditional-claim counters.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from scolab import (
    NormBall,
    SweepConfig,
    build_certificate,
    build_net,
    bregman,
    check_monotonicity,
    derived_rng,
    draw_sample,
    empirical_bregman,
    fit_scaling,
    make_appendix_instance,
    make_coin_instance,
    make_hard_instance,
    make_quadratic_instance,
    measure_cover_radius,
    packing_bound,
    rad_exact,
    rad_inverse,
    rad_mc,
    run_sweep,
    sample_size_bound,
    uniform_ball_sample,
    verify_concentration,
)
from scolab.instances import Sample

MASTER_SEED = 20260810


def criterion(name: str, ok: bool, detail: str) -> None:
    print(f"{name}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, f"{name}: {detail}"


# --- shared sweeps ------------------------------------------------------------


@pytest.fixture(scope="module")
def a5_sweeps():
    n0 = sample_size_bound(1, 0.3)
    common = dict(
        d_grid=[1],
        eps_grid=[0.3],
        n_grid=[n0],
        trials=200,
        multiplier=40.0,
        net_policy="third",
        check_claims=True,
        master_seed=MASTER_SEED,
        record_trials=False,
    )
    start = time.perf_counter()
    coin = run_sweep(SweepConfig(family="coin", instance={"eps0": 0.1}, **common))
    quad = run_sweep(
        SweepConfig(
            family="quadratic",
            instance={"centers": [[-1.0], [1.0]], "ball": {"family": "l2", "dim": 1}},
            **common,
        )
    )
    return {"coin": coin, "quadratic": quad, "n0": n0,
            "elapsed": time.perf_counter() - start}


@pytest.fixture(scope="module")
def a6_sweep():
    # failure = an uncovered spurious direction survives: its population
    # excess is exactly eps0/2 = 0.125 and the threshold is
    # multiplier * eps = 40 * 0.0025 = 0.1 < 0.125.  The uniform-convergence
    # accuracy is matched at half that detection threshold (certifying the
    # ERM event needs deviations below excess/2).
    cfg = SweepConfig(
        family="hard",
        instance={"eps0": 0.25, "m_by_d": {"4": 2, "8": 4, "16": 16}},
        d_grid=[4, 8, 16],
        eps_grid=[0.0025],
        n_grid=None,
        trials=400,
        multiplier=40.0,
        target=0.25,
        net_policy="none",
        check_claims=True,
        uc_enabled=True,
        uc_eps=0.05,
        uc_trials=800,
        n_max=2048,
        master_seed=MASTER_SEED,
        record_trials=False,
    )
    start = time.perf_counter()
    result = run_sweep(cfg)
    return {"result": result, "elapsed": time.perf_counter() - start}


# --- criteria ------------------------------------------------------------------


def test_a1_first_order_certificate():
    start = time.perf_counter()
    inst = make_appendix_instance()
    cert = build_certificate(inst, np.array([-0.1]), tol=1e-9)
    g1, g2 = cert.subgradients.ravel()
    elapsed = time.perf_counter() - start
    ok = (
        cert.violation <= 1e-9
        and abs(g1 - (-0.4)) <= 1e-9
        and abs(g2 - 0.4) <= 1e-9
        and -1.0 <= g2 <= 1.0
        and elapsed < 1.0
    )
    criterion(
        "A1 first-order certificate",
        ok,
        f"violation={cert.violation:.2e}, g=({g1:+.10f},{g2:+.10f}), {elapsed:.2f}s",
    )


def test_a2_divergence_oracle_equivalence():
    start = time.perf_counter()
    ball = NormBall("l2", 2)
    inst = make_quadratic_instance([[-1.0, 0.5], [0.2, 0.8], [0.4, -0.6]], ball)
    xstar = inst.known_minimizer
    cert = build_certificate(inst, xstar, tol=1e-9)
    xs = uniform_ball_sample(ball, derived_rng(MASTER_SEED, 2), 100)
    worst = max(
        abs(bregman(cert, inst, x) - float(((x - xstar) ** 2).sum()) / 4.0) for x in xs
    )
    exact = Sample(indices=np.arange(3), n=3, seed=0)
    worst_identity = max(
        abs(empirical_bregman(cert, inst, exact, x) - bregman(cert, inst, x)) for x in xs
    )
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and worst_identity <= 1e-12 and elapsed < 1.0
    criterion(
        "A2 divergence oracle equivalence",
        ok,
        f"closed-form gap={worst:.2e}, exact-expectation gap={worst_identity:.2e}, {elapsed:.2f}s",
    )


def test_a3_divergence_concentration():
    start = time.perf_counter()
    inst = make_hard_instance(2, 0.5, 2, seed=7)
    cert = build_certificate(inst, np.zeros(2), tol=1e-9)
    x = inst.meta["directions"][0]
    out = verify_concentration(inst, cert, x, n=100, trials=10_000,
                               seed=MASTER_SEED, mode="bregman")
    oracle = float(stats.binom.cdf(25, 100, 0.5))
    gate = 3.0 * math.sqrt(oracle * (1 - oracle) / 10_000) + 1e-12
    elapsed = time.perf_counter() - start
    ok = (
        out["passed"]
        and out["analytic_bound"] == pytest.approx(math.exp(-0.625))
        and abs(out["empirical"] - oracle) <= gate
        and elapsed < 30.0
    )
    criterion(
        "A3 divergence concentration",
        ok,
        f"empirical={out['empirical']:.2e} vs bound={out['analytic_bound']:.3f} "
        f"(binomial oracle {oracle:.2e}), {elapsed:.1f}s",
    )


def test_a4_mean_subgradient_moment():
    start = time.perf_counter()
    inst = make_coin_instance(0.1)
    cert = build_certificate(inst, np.zeros(1), tol=1e-9)
    details = []
    ok = True
    for n in (25, 100, 400):
        out = verify_concentration(inst, cert, np.array([0.5]), n=n, trials=10_000,
                                   seed=MASTER_SEED + n, mode="gradient")
        close = abs(out["empirical"] - 1.0 / n) <= 4.0 * out["mc_stderr"]
        under = out["empirical"] <= 4.0 / n
        ok = ok and close and under and out["analytic_bound"] == pytest.approx(4.0 / n)
        details.append(f"n={n}: {out['empirical']:.5f}~1/{n}")
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30.0
    criterion("A4 mean-subgradient moment", ok, "; ".join(details) + f", {elapsed:.1f}s")


def test_a5_implication_at_formula_size(a5_sweeps):
    n0 = a5_sweeps["n0"]
    freqs = {
        name: a5_sweeps[name].cells[0].freq for name in ("coin", "quadratic")
    }
    elapsed = a5_sweeps["elapsed"]
    ok = n0 == 493 and all(f <= 0.25 for f in freqs.values()) and elapsed < 120.0
    criterion(
        "A5 implication at formula size",
        ok,
        f"n0={n0}, failure freq coin={freqs['coin']:.3f} quadratic={freqs['quadratic']:.3f}, "
        f"{elapsed:.1f}s",
    )


def test_a6_dimension_scaling_shape(a6_sweep):
    result = a6_sweep["result"]
    elapsed = a6_sweep["elapsed"]
    thresholds = {t.d: t for t in result.thresholds}
    uc = {t.d: t for t in result.uc_thresholds}
    resolved = all(t.resolved for t in result.thresholds) and all(
        t.resolved for t in result.uc_thresholds
    )
    ds = sorted(thresholds)
    n_stars = [thresholds[d].n_star for d in ds]
    exponent, _, residual = fit_scaling(ds, n_stars)
    ratios = [uc[d].n_star / thresholds[d].n_star for d in ds]
    ratios_increasing = all(a < b for a, b in zip(ratios, ratios[1:]))
    exponent_in_window = 0.6 <= exponent <= 1.4
    ok = resolved and exponent_in_window and ratios_increasing and elapsed < 600.0
    criterion(
        "A6 dimension scaling shape",
        ok,
        f"n*={dict(zip(ds, n_stars))}, exponent={exponent:.3f} (window [0.6,1.4]), "
        f"uc={ {d: uc[d].n_star for d in ds} }, ratios={[round(r, 2) for r in ratios]}, "
        f"residual={residual:.3f}, {elapsed:.1f}s"
        + (
            ""
            if exponent_in_window
            else " | NOTE: exact coverage thresholds make n*(d) affine with a"
            " positive intercept, which pins the 3-point log-log exponent at"
            " 0.50; see the decisions ledger"
        ),
    )


def test_a7_complexity_estimates():
    start = time.perf_counter()
    ball = NormBall("l2", 2)
    exact_pair = rad_exact(ball, np.array([[1.0, 0.0], [1.0, 0.0]]))
    mc_ok = True
    for case in range(50):
        rng = derived_rng(MASTER_SEED, 7, case)
        n = int(rng.integers(1, 11))
        raw = rng.normal(size=(n, 2))
        sample = raw / np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-9)
        sample *= rng.random((n, 1))
        exact = rad_exact(ball, sample).value
        mc = rad_mc(ball, sample, trials=1500, seed=case)
        mc_ok = mc_ok and abs(mc.value - exact) <= 4.0 * mc.stderr + 1e-12
    mono_ok = True
    for case in range(50):
        rng = derived_rng(MASTER_SEED, 8, case)
        k = int(rng.integers(2, 14))
        raw = rng.normal(size=(k, 2))
        sample = raw / np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-9)
        sample *= rng.random((k, 1))
        mono_ok = mono_ok and check_monotonicity(ball, sample)["ok"]
    inverse = rad_inverse(NormBall("l2", 1), 0.1)
    elapsed = time.perf_counter() - start
    ok = (
        exact_pair.value == 0.5
        and mc_ok
        and mono_ok
        and inverse == 101
        and elapsed < 60.0
    )
    criterion(
        "A7 complexity estimates",
        ok,
        f"exact pair={exact_pair.value}, mc within 4se on 50 cases={mc_ok}, "
        f"monotonicity 50 cases={mono_ok}, inverse(0.1)={inverse}, {elapsed:.1f}s",
    )


def test_a8_packing_nets():
    start = time.perf_counter()
    ok = True
    sizes = {}
    for d in (1, 2, 3):
        for eps in (0.5, 1.0):
            net = build_net(NormBall("l2", d), eps, seed=MASTER_SEED)
            bound = packing_bound(d, eps)
            radius = measure_cover_radius(net, 100_000, MASTER_SEED)
            sizes[(d, eps)] = len(net)
            ok = ok and len(net) <= bound and radius <= 2.0 * eps
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 60.0
    criterion("A8 packing nets", ok, f"sizes={sizes}, cover at 2eps on 1e5 probes, {elapsed:.1f}s")


def test_a9_representativeness_concentration():
    start = time.perf_counter()
    inst = make_coin_instance(0.1)
    cert = build_certificate(inst, np.zeros(1), tol=1e-9)
    net = build_net(inst.ball, 0.1, seed=MASTER_SEED)
    out = verify_concentration(inst, cert, np.zeros(1), n=400, trials=500,
                               seed=MASTER_SEED, mode="rep", net=net, delta=0.1)
    elapsed = time.perf_counter() - start
    ok = out["passed"] and elapsed < 60.0
    criterion(
        "A9 representativeness concentration",
        ok,
        f"violations={out['empirical']:.3f} <= delta={out['analytic_bound']} "
        f"+ 3se, {elapsed:.1f}s",
    )


def test_a10_conditional_claim_counters(a5_sweeps, a6_sweep):
    total = (
        a5_sweeps["coin"].claim_violations
        + a5_sweeps["quadratic"].claim_violations
        + a6_sweep["result"].claim_violations
    )
    criterion("A10 conditional claim counters", total == 0, f"violations={total}")
