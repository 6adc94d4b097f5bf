"""The `scolab verify` battery: compact end-to-end checks with fixed seeds.

Each check exercises one verified property at reduced trial counts so the
whole battery stays interactive; the pytest acceptance suite runs the same
properties at their full budgets.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .divergence import (
    bregman,
    build_certificate,
    check_conditional_claims,
    verify_concentration,
)
from .geometry import NormBall, build_net, measure_cover_radius, packing_bound
from .instances import (
    draw_sample,
    make_appendix_instance,
    make_coin_instance,
    make_hard_instance,
    make_quadratic_instance,
    run_invariant_battery,
)
from .rademacher import rad_exact, rad_inverse, rad_mc
from .seeding import derived_rng, derived_seed
from .solver import near_erm_candidates, minimize_empirical, population_minimizer
from .sweep import SweepConfig, sample_threshold
from .geometry import uniform_ball_sample


def run_verification(config: dict, quick: bool = False) -> dict:
    """Run every check; returns {"checks": [(name, ok)...], "concentration": [report...]}."""
    seed = int(config["seed"])
    probes = int(config["battery_probes"])
    conc_trials = int(config["concentration_trials"])
    rep_trials = int(config["rep_trials"])
    claims_trials = int(config["claims_trials"])
    if quick:
        probes = min(probes, 100)
        conc_trials = min(conc_trials, 500)
        rep_trials = min(rep_trials, 100)
        claims_trials = min(claims_trials, 50)

    checks: list[tuple[str, bool]] = []
    coin = make_coin_instance(0.1)
    ball1 = NormBall("l2", 1)
    quad = make_quadratic_instance([[-1.0], [1.0]], ball1)
    hard = make_hard_instance(2, 0.5, 2, seed=seed)
    appendix = make_appendix_instance()

    for inst in (coin, quad, hard, appendix):
        report = run_invariant_battery(inst, probes=probes, seed=seed)
        checks.append((f"invariant battery: {inst.label}", report["ok"]))

    # first-order decomposition at the two-piece fixture
    cert = build_certificate(appendix, np.array([-0.1]), tol=1e-9)
    g1, g2 = cert.subgradients[:, 0]
    checks.append(
        (
            "certificate decomposition",
            cert.violation <= 1e-9
            and abs(g1 + 0.4) <= 1e-9
            and abs(g2 - 0.4) <= 1e-6
            and -1.0 <= g2 <= 1.0,
        )
    )

    # quadratic divergence equals its closed form
    qcert = build_certificate(quad, np.zeros(1), tol=1e-9)
    rng = derived_rng(seed, 0xB0)
    xs = uniform_ball_sample(ball1, rng, 50)
    quad_ok = all(
        abs(bregman(qcert, quad, x) - float(x[0] ** 2) / 4.0) <= 1e-9 for x in xs
    )
    checks.append(("quadratic divergence closed form", quad_ok))

    # concentration verifiers
    hard_cert = build_certificate(hard, np.zeros(2), tol=1e-9)
    x_dir = hard.meta["directions"][0]
    rep_net = build_net(ball1, 0.05, seed=seed)
    modes = [
        ("bregman", hard, hard_cert, x_dir, 100, conc_trials, {}),
        ("gradient", coin, None, np.array([0.5]), 100, conc_trials, {}),
        ("variance", coin, None, np.array([0.5]), 50, max(100, conc_trials // 4), {}),
        ("rep", coin, None, np.array([0.5]), 400, rep_trials, {"net": rep_net, "delta": 0.1}),
    ]
    coin_cert = build_certificate(coin, np.zeros(1), tol=1e-9)
    concentration_reports = []
    for mode, inst, cert_m, x, n, trials, extra in modes:
        cert_m = cert_m or coin_cert
        out = verify_concentration(inst, cert_m, x, n, trials, seed, mode, **extra)
        concentration_reports.append(out)
        checks.append((f"concentration: {mode}", out["passed"]))

    # binomial-tail oracle cross-check for the bregman event
    out = verify_concentration(hard, hard_cert, x_dir, 100, conc_trials, seed, "bregman")
    oracle = float(stats.binom.cdf(25, 100, 0.5))
    gate = 3.0 * math.sqrt(max(oracle * (1 - oracle), 1e-12) / conc_trials) + 1e-9
    checks.append(("bregman event vs binomial oracle", abs(out["empirical"] - oracle) <= gate))

    # nets: packing bound and cover radius at desk scale
    net_ok = True
    for dim in (1, 2):
        for eps in (0.5, 1.0):
            net = build_net(NormBall("l2", dim), eps, seed=seed)
            net_ok &= len(net) <= packing_bound(dim, eps)
            net_ok &= measure_cover_radius(net, 20000, seed) <= 2.0 * eps
    checks.append(("net packing and cover", bool(net_ok)))

    # complexity: exact enumeration, MC agreement, inverse lookup
    e1 = np.array([[1.0, 0.0], [1.0, 0.0]])
    exact = rad_exact(NormBall("l2", 2), e1)
    mc = rad_mc(NormBall("l2", 2), e1, trials=max(1000, conc_trials), seed=seed)
    rad_ok = (
        abs(exact.value - 0.5) <= 1e-12
        and abs(mc.value - exact.value) <= 4.0 * mc.stderr + 1e-12
        and rad_inverse(NormBall("l2", 1), 0.1) == 101
    )
    checks.append(("complexity estimates", rad_ok))

    # conditional claims on live samples
    claims_net = build_net(ball1, 0.05, seed=seed)
    xstar = population_minimizer(coin, 0.01).point
    violations = 0
    for t in range(claims_trials):
        sample = draw_sample(coin, 100, derived_seed(seed, 0xC1A, t))
        xhat = minimize_empirical(coin, sample, 0.01).point
        points = near_erm_candidates(coin, sample, claims_net, xhat, xstar)
        violations += len(
            check_conditional_claims(coin_cert, coin, sample, points, 0.3, claims_net.radius)
        )
    checks.append(("conditional claims", violations == 0))

    # threshold search against the closed-form coverage oracle
    cfg = SweepConfig(
        family="hard",
        instance={"eps0": 0.5, "m": 2, "seed": seed},
        d_grid=[2],
        eps_grid=[0.002],
        trials=max(claims_trials * 10, 2000) if not quick else 500,
        multiplier=40.0,
        net_policy="none",
        master_seed=seed,
        record_trials=False,
    )
    threshold, _, _ = sample_threshold(cfg, 2, 0.002)
    checks.append(("coverage threshold oracle", threshold.resolved and threshold.n_star == 3))
    return {"checks": checks, "concentration": concentration_reports}
