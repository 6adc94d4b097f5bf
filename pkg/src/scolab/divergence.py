"""First-order certificates, divergences, and concentration verifiers.

A certificate fixes, once and for all, one subgradient per outcome at a
population minimizer so that their mean G points weakly outward on the whole
ball (<G, x - x*> >= 0 for all feasible x).  Every divergence defined here
(the Bregman form, its clipped variant, and the clipped-linear loss gap that
defines representativeness) is evaluated with those fixed subgradients,
never re-queried ones, so that empirical quantities are honest sample means
of the population ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CertificateError, InputError
from .geometry import Net, dual_norm_eval, linear_minimize, uniform_ball_sample
from .instances import (
    SCOInstance,
    Sample,
    draw_sample,
    empirical_loss_many,
    population_loss,
    population_loss_many,
)
from .rademacher import rad_upper_bound
from .seeding import derived_rng, derived_seed

MAX_TIE_SWEEPS = 200


@dataclass(frozen=True)
class OptimalityCertificate:
    """Fixed per-outcome subgradients at a population minimizer.

    subgradients is the full (num_outcomes, dim) table for explicit
    instances; implicit instances carry a constant gradient shared by every
    outcome (the only implicit case with an exact mean).  violation is the
    exact maximum of -<G, x - minimizer> over the ball.
    """

    minimizer: np.ndarray
    mean_subgradient: np.ndarray
    violation: float
    label: str
    subgradients: np.ndarray | None = None
    constant_gradient: np.ndarray | None = None

    @property
    def is_constant(self) -> bool:
        return self.constant_gradient is not None

    def gradients_for(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if self.subgradients is not None:
            return self.subgradients[indices]
        return np.tile(self.constant_gradient, (indices.shape[0], 1))

    @property
    def l2_cap(self) -> float:
        if self.subgradients is not None:
            return float(np.linalg.norm(self.subgradients, axis=1).max())
        return float(np.linalg.norm(self.constant_gradient))


@dataclass(frozen=True)
class DivergenceReport:
    population_divergence: float
    empirical_divergence: float
    truncated_population: float
    truncated_empirical: float
    representativeness: float
    certificate_label: str
    sample_seed: int
    point: tuple


def certificate_violation(inst: SCOInstance, xstar: np.ndarray, mean_g: np.ndarray) -> float:
    """max over the ball of -<G, x - x*>, exactly via linear minimization."""
    _, min_inner = linear_minimize(inst.ball, mean_g)
    return float(-(min_inner - mean_g @ xstar))


def _verify_minimizer(inst: SCOInstance, xstar: np.ndarray, tol: float, net: Net | None) -> None:
    if net is not None and len(net) > 0:
        probes = net.points
    else:
        probes = np.vstack(
            [np.zeros((1, inst.ball.dim)), uniform_ball_sample(inst.ball, derived_rng(0xCE7), 256)]
        )
    best = float(population_loss_many(inst, probes).min())
    here = population_loss(inst, xstar)
    if here > best + tol:
        raise InputError(
            f"point is not a population minimizer: loss {here:.6g} vs probe best {best:.6g}"
        )


def _tie_weight_search(
    inst: SCOInstance, xstar: np.ndarray, tol: float
) -> tuple[np.ndarray, float]:
    # Frank-Wolfe over the product of per-outcome subdifferential simplices.
    # The objective ||G||_* + <G, x*> is convex in G and affine in each
    # outcome's convex weights, so moving one outcome's subgradient toward
    # its best extreme point with an exact line search never increases it.
    weights = inst.weights
    extremes = [
        [np.asarray(e, dtype=float) for e in inst.subdifferential_extremes(z, xstar)]
        for z in inst.outcomes
    ]
    chosen = np.array([inst.subgrad(z, xstar) for z in inst.outcomes], dtype=float)
    mean_g = weights @ chosen

    def objective(g_vec: np.ndarray) -> float:
        return dual_norm_eval(inst.ball, g_vec) + float(g_vec @ xstar)

    for _ in range(MAX_TIE_SWEEPS):
        if certificate_violation(inst, xstar, mean_g) <= tol:
            break
        moved = False
        for zi, exts in enumerate(extremes):
            if len(exts) < 2:
                continue
            support, _ = linear_minimize(inst.ball, mean_g)
            steepness = [weights[zi] * float(e @ (-support + xstar)) for e in exts]
            target = exts[int(np.argmin(steepness))]
            base = mean_g - weights[zi] * chosen[zi]

            def along(t: float) -> float:
                return objective(base + weights[zi] * ((1 - t) * chosen[zi] + t * target))

            lo, hi = 0.0, 1.0
            while hi - lo > 1e-14:
                third = (hi - lo) / 3.0
                if along(lo + third) <= along(hi - third):
                    hi -= third
                else:
                    lo += third
            t = 0.5 * (lo + hi)
            if t > 0:
                candidate = (1 - t) * chosen[zi] + t * target
                new_mean = base + weights[zi] * candidate
                if objective(new_mean) < objective(mean_g) - 1e-16:
                    chosen[zi] = candidate
                    mean_g = new_mean
                    moved = True
        if not moved:
            break
    return chosen, weights @ chosen


def build_certificate(
    inst: SCOInstance, xstar: np.ndarray, tol: float, net: Net | None = None
) -> OptimalityCertificate:
    """Select per-outcome subgradients at a verified population minimizer.

    Smooth instances take gradients; instances exposing subdifferential
    extreme points get a tie-weight search that drives the first-order
    violation to zero; otherwise the oracle subgradient is accepted and its
    violation reported.  Raises CertificateError when the final violation
    exceeds tol.
    """
    if tol <= 0:
        raise InputError(f"tol must be positive, got {tol}")
    xstar = np.asarray(xstar, dtype=float)
    _verify_minimizer(inst, xstar, max(tol, 1e-6), net)

    if not inst.is_explicit:
        # Only a constant-gradient rule yields an exact mean over an implicit
        # outcome space.  For the max-of-activations family every outcome's
        # subgradient at the flat minimizer vanishes iff the all-active
        # outcome's does, so that single probe certifies constancy.
        probe_idx = [0]
        if "num_masks" in inst.meta:
            probe_idx.append(inst.meta["num_masks"] - 1)
        probes = inst.subgradients(np.asarray(probe_idx), xstar)
        if np.any(np.abs(probes) > 1e-12):
            raise InputError(
                "implicit instances need a constant subgradient rule at the minimizer"
            )
        zero = np.zeros(inst.ball.dim)
        return OptimalityCertificate(
            minimizer=xstar,
            mean_subgradient=zero,
            violation=0.0,
            label=f"cert[{inst.label}]",
            constant_gradient=zero,
        )

    if inst.smooth or inst.subdifferential_extremes is None:
        chosen = np.array([inst.subgrad(z, xstar) for z in inst.outcomes], dtype=float)
        mean_g = inst.weights @ chosen
    else:
        chosen, mean_g = _tie_weight_search(inst, xstar, tol)

    violation = certificate_violation(inst, xstar, mean_g)
    if violation > tol:
        direction, _ = linear_minimize(inst.ball, mean_g)
        raise CertificateError(
            f"first-order violation {violation:.3g} exceeds tol {tol:.3g}",
            mean_subgradient=mean_g,
            direction=direction,
        )
    return OptimalityCertificate(
        minimizer=xstar,
        mean_subgradient=mean_g,
        violation=violation,
        label=f"cert[{inst.label}]",
        subgradients=chosen,
    )


# ---------------------------------------------------------------------------
# divergences


def bregman(cert: OptimalityCertificate, inst: SCOInstance, x: np.ndarray) -> float:
    """F(x) - F(x*) - <G, x - x*>; non-negative for a valid certificate."""
    x = np.asarray(x, dtype=float)
    gap = population_loss(inst, x) - population_loss(inst, cert.minimizer)
    return float(gap - cert.mean_subgradient @ (x - cert.minimizer))


def empirical_bregman(
    cert: OptimalityCertificate, inst: SCOInstance, sample: Sample, x: np.ndarray
) -> float:
    """Sample-mean counterpart using the certificate's fixed subgradients."""
    x = np.asarray(x, dtype=float)
    emp = empirical_loss_many(inst, sample, np.vstack([x, cert.minimizer]))
    ghat = cert.gradients_for(sample.indices).mean(axis=0)
    return float(emp[0] - emp[1] - ghat @ (x - cert.minimizer))


def _clipped_linear(
    cert: OptimalityCertificate, inst: SCOInstance, indices: np.ndarray, points: np.ndarray, c: float
) -> np.ndarray:
    """max(-2c, <g_z, x - x*>) for each (outcome index, point); shape (n, k)."""
    deltas = np.atleast_2d(points) - cert.minimizer
    vals = cert.gradients_for(indices) @ deltas.T
    return np.maximum(vals, -2.0 * c)


def _population_clipped_linear(
    cert: OptimalityCertificate, inst: SCOInstance, points: np.ndarray, c: float
) -> np.ndarray:
    points = np.atleast_2d(points)
    if cert.is_constant:
        deltas = points - cert.minimizer
        return np.maximum(deltas @ cert.constant_gradient, -2.0 * c)
    table = _clipped_linear(cert, inst, np.arange(inst.num_outcomes), points, c)
    return inst.weights @ table


def divergence_values(
    cert: OptimalityCertificate, inst: SCOInstance, indices: np.ndarray, x: np.ndarray
) -> np.ndarray:
    """Per-outcome divergence f_z(x) - f_z(x*) - <g_z, x - x*> over indices."""
    x = np.asarray(x, dtype=float)
    losses = inst.losses(indices, np.vstack([x, cert.minimizer]))
    lin = cert.gradients_for(indices) @ (x - cert.minimizer)
    return losses[:, 0] - losses[:, 1] - lin


def truncated_divergence(
    cert: OptimalityCertificate,
    inst: SCOInstance,
    sample: Sample,
    x: np.ndarray,
    c: float | None = None,
) -> tuple[float, float]:
    """(population, empirical) divergence with the linear term clipped at -2c.

    Clipping keeps every per-outcome value inside [0, 4c] while leaving the
    divergence untouched whenever no outcome's linear term falls below -2c.
    """
    if c is None:
        c = inst.bound
    x = np.asarray(x, dtype=float)
    pop_gap = population_loss(inst, x) - population_loss(inst, cert.minimizer)
    pop_clip = float(_population_clipped_linear(cert, inst, x[None, :], c)[0])
    trunc_pop = pop_gap - pop_clip
    emp = empirical_loss_many(inst, sample, np.vstack([x, cert.minimizer]))
    emp_clip = float(_clipped_linear(cert, inst, sample.indices, x[None, :], c)[:, 0].mean())
    trunc_emp = float(emp[0] - emp[1] - emp_clip)
    return float(trunc_pop), trunc_emp


def representativeness(
    cert: OptimalityCertificate,
    inst: SCOInstance,
    sample: Sample,
    net: Net | None,
    c: float | None = None,
) -> float:
    """Net-restricted sup of the clipped-linear population/empirical gap.

    This is a lower bound on the true sup over the ball, accurate to
    2 * lipschitz * net.radius because the clipped-linear losses are
    1-Lipschitz.  A constant-gradient certificate makes the gap identically
    zero, in which case the value is exact and no net is needed.
    """
    if c is None:
        c = inst.bound
    if cert.is_constant:
        return 0.0
    if net is None or len(net) == 0:
        raise InputError("representativeness needs a net (or a constant-gradient certificate)")
    pop = _population_clipped_linear(cert, inst, net.points, c)
    emp = _clipped_linear(cert, inst, sample.indices, net.points, c).mean(axis=0)
    return float((pop - emp).max())


def divergence_report(
    cert: OptimalityCertificate,
    inst: SCOInstance,
    sample: Sample,
    x: np.ndarray,
    net: Net | None = None,
) -> DivergenceReport:
    x = np.asarray(x, dtype=float)
    trunc_pop, trunc_emp = truncated_divergence(cert, inst, sample, x)
    if cert.is_constant or net is not None:
        rep = representativeness(cert, inst, sample, net)
    else:
        rep = float("nan")
    return DivergenceReport(
        population_divergence=bregman(cert, inst, x),
        empirical_divergence=empirical_bregman(cert, inst, sample, x),
        truncated_population=trunc_pop,
        truncated_empirical=trunc_emp,
        representativeness=rep,
        certificate_label=cert.label,
        sample_seed=sample.seed,
        point=tuple(float(v) for v in x),
    )


# ---------------------------------------------------------------------------
# conditional claims


def check_conditional_claims(
    cert: OptimalityCertificate,
    inst: SCOInstance,
    sample: Sample,
    points: np.ndarray,
    eps: float,
    net_radius: float | None,
    tol: float = 1e-9,
) -> list[dict]:
    """Check the four conditional implications at each point; return violations.

    The two Euclidean-route claims require a small empirical/population
    subgradient gap; the two clipped-route claims require small
    representativeness.  The net-restricted representativeness underestimates
    the true sup by at most 2 * L * net_radius, so that slack is added to the
    clipped-route conclusions (zero for constant-gradient certificates,
    where the value is exact).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    c = inst.bound
    lip = inst.lipschitz
    xstar = cert.minimizer
    deltas = points - xstar

    pop = population_loss_many(inst, np.vstack([points, xstar[None, :]]))
    pop_gap = pop[:-1] - pop[-1]
    emp = empirical_loss_many(inst, sample, np.vstack([points, xstar[None, :]]))
    emp_gap = emp[:-1] - emp[-1]

    g_sel = cert.gradients_for(sample.indices)
    ghat = g_sel.mean(axis=0)
    grad_gap = float(np.linalg.norm(ghat - cert.mean_subgradient))

    div_pop = pop_gap - deltas @ cert.mean_subgradient
    div_emp = emp_gap - deltas @ ghat

    pop_clip = _population_clipped_linear(cert, inst, points, c)
    emp_clip = _clipped_linear(cert, inst, sample.indices, points, c).mean(axis=0)
    trunc_pop = pop_gap - pop_clip
    trunc_emp = emp_gap - emp_clip

    if cert.is_constant:
        rep, slack = 0.0, 0.0
    else:
        rep = float((pop_clip - emp_clip).max())
        if net_radius is None:
            raise InputError("net_radius is required for non-constant certificates")
        slack = 2.0 * lip * net_radius

    violations: list[dict] = []

    def record(claim: str, idx: int, lhs: float, rhs: float) -> None:
        violations.append(
            {"claim": claim, "point_index": int(idx), "lhs": float(lhs), "rhs": float(rhs)}
        )

    euclid_hyp = grad_gap <= eps
    for i in range(points.shape[0]):
        if euclid_hyp and emp_gap[i] <= 5.0 * eps:
            if div_pop[i] < pop_gap[i] - 7.0 * eps - tol:
                record("pop_divergence_lower", i, div_pop[i], pop_gap[i] - 7.0 * eps)
            if div_emp[i] > 7.0 * eps + tol:
                record("emp_divergence_upper", i, div_emp[i], 7.0 * eps)
        if rep <= 2.0 * eps:
            if emp_gap[i] <= 6.0 * eps and trunc_emp[i] > 8.0 * eps + slack + tol:
                record("trunc_emp_upper", i, trunc_emp[i], 8.0 * eps + slack)
            if emp_gap[i] <= 5.0 * eps and trunc_pop[i] < pop_gap[i] - 7.0 * eps - slack - tol:
                record("trunc_pop_lower", i, trunc_pop[i], pop_gap[i] - 7.0 * eps - slack)
    return violations


# ---------------------------------------------------------------------------
# concentration verifiers

MODES = ("bregman", "gradient", "variance", "rep")


def verify_concentration(
    inst: SCOInstance,
    cert: OptimalityCertificate,
    x: np.ndarray,
    n: int,
    trials: int,
    seed: int,
    mode: str,
    net: Net | None = None,
    delta: float = 0.1,
) -> dict:
    """Monte Carlo check of one concentration statement against its bound.

    Runs `trials` fresh samples of size n and reports the empirical event
    frequency or moment next to the analytic bound; passed means
    empirical <= bound + 3 * mc_stderr.

    bregman:  Pr[D_hat <= D/2] vs exp(-D n / (40 c)).
    gradient: E ||Ghat - G||_2^2 vs 4 gmax^2 / n.
    variance: per-outcome divergence variance vs the range bound (4c-D) D.
    rep:      Pr[Rep exceeds the complexity-plus-deviation threshold] vs delta.
    """
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}; expected one of {MODES}")
    if trials < 100:
        raise InputError(f"need at least 100 trials, got {trials}")
    x = np.asarray(x, dtype=float)
    c = inst.bound

    def trial_sample(t: int) -> Sample:
        return draw_sample(inst, n, derived_seed(seed, 0x7EA1, t))

    if mode == "bregman":
        div_pop = bregman(cert, inst, x)
        if div_pop <= 0:
            raise InputError("the bregman mode needs a point with positive divergence")
        hits = 0
        for t in range(trials):
            s = trial_sample(t)
            if empirical_bregman(cert, inst, s, x) <= div_pop / 2.0:
                hits += 1
        freq = hits / trials
        stderr = math.sqrt(freq * (1.0 - freq) / trials)
        bound = math.exp(-div_pop * n / (40.0 * c))
        empirical = freq
    elif mode == "gradient":
        mean_g = cert.mean_subgradient
        vals = np.empty(trials)
        for t in range(trials):
            s = trial_sample(t)
            ghat = cert.gradients_for(s.indices).mean(axis=0)
            vals[t] = float(((ghat - mean_g) ** 2).sum())
        empirical = float(vals.mean())
        stderr = float(vals.std(ddof=1) / math.sqrt(trials))
        bound = 4.0 * cert.l2_cap**2 / n
    elif mode == "variance":
        div_pop = bregman(cert, inst, x)
        pools = [divergence_values(cert, inst, trial_sample(t).indices, x) for t in range(trials)]
        values = np.concatenate(pools)
        empirical = float(values.var(ddof=1))
        centered = values - values.mean()
        fourth = float((centered**4).mean())
        spread = max(fourth - empirical**2, 0.0)
        stderr = math.sqrt(spread / values.size)
        bound = (4.0 * c - div_pop) * div_pop
    else:  # rep
        threshold = 2.0 * inst.lipschitz * rad_upper_bound(inst.ball, n) + c * math.sqrt(
            2.0 * math.log(2.0 / delta) / n
        )
        hits = 0
        for t in range(trials):
            s = trial_sample(t)
            if representativeness(cert, inst, s, net) > threshold:
                hits += 1
        freq = hits / trials
        stderr = math.sqrt(freq * (1.0 - freq) / trials)
        bound = delta
        empirical = freq
    return {
        "mode": mode,
        "n": n,
        "trials": trials,
        "empirical": float(empirical),
        "analytic_bound": float(bound),
        "mc_stderr": float(stderr),
        "passed": bool(empirical <= bound + 3.0 * stderr),
    }


CONCENTRATION_CSV_HEADER = [
    "mode", "n", "trials", "empirical", "analytic_bound", "mc_stderr", "passed"
]


def concentration_reports_to_csv(reports: list[dict]) -> str:
    """One CSV row per verification report, in the order given."""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CONCENTRATION_CSV_HEADER)
    for r in reports:
        writer.writerow(
            [r["mode"], r["n"], r["trials"], repr(r["empirical"]),
             repr(r["analytic_bound"]), repr(r["mc_stderr"]), int(r["passed"])]
        )
    return buf.getvalue()
