"""Minimization of empirical and population losses, and worst near-ERM search.

The workhorse is averaged projected subgradient descent with the fixed
schedule step_t = 1/(L sqrt(t)) from the center of the ball, which is
guaranteed for convex Lipschitz objectives.  Families that expose an exact
closed-form minimizer short-circuit the iteration; the closed form is still
verified against a probe set before being trusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, IntegrityError
from .geometry import Net, norm_eval, project, uniform_ball_sample
from .instances import (
    SCOInstance,
    Sample,
    empirical_loss,
    empirical_loss_many,
    population_loss,
    population_loss_many,
)
from .seeding import derived_rng


@dataclass(frozen=True)
class SolveReport:
    point: np.ndarray
    value: float
    tol: float
    iterations: int


def _probe_points(inst: SCOInstance) -> np.ndarray:
    # Origin plus signed basis vectors: cheap sanity candidates that lie in
    # every l_p ball and catch grossly wrong closed forms.
    d = inst.ball.dim
    probes = [np.zeros(d)]
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        probes.extend([e, -e])
    return np.asarray(probes)


def _projected_subgradient(
    inst: SCOInstance,
    subgrad_fn,
    tol: float,
) -> tuple[np.ndarray, int]:
    lip = inst.lipschitz
    steps = int(math.ceil((2.0 * lip / tol) ** 2))
    x = np.zeros(inst.ball.dim)
    running = np.zeros(inst.ball.dim)
    for t in range(1, steps + 1):
        g = subgrad_fn(x)
        x = project(inst.ball, x - g / (lip * math.sqrt(t)))
        running += x
    return running / steps, steps


def minimize_empirical(
    inst: SCOInstance, sample: Sample, tol: float, use_closed_form: bool = True
) -> SolveReport:
    """Approximate empirical minimizer: x with F_hat(x) <= min F_hat + tol."""
    if tol <= 0:
        raise InputError(f"tol must be positive, got {tol}")
    if use_closed_form and inst.empirical_minimizer is not None:
        point = np.asarray(inst.empirical_minimizer(sample), dtype=float)
        if norm_eval(inst.ball, point) > 1.0 + 1e-9:
            raise IntegrityError("closed-form empirical minimizer left the ball")
        value = empirical_loss(inst, sample, point)
        probe_best = float(empirical_loss_many(inst, sample, _probe_points(inst)).min())
        if value > probe_best + tol:
            raise IntegrityError(
                f"closed-form empirical minimizer value {value:.6g} beaten by a "
                f"probe point at {probe_best:.6g}"
            )
        return SolveReport(point=point, value=value, tol=tol, iterations=0)

    def subgrad_fn(x):
        return inst.subgradients(sample.indices, x).mean(axis=0)

    point, steps = _projected_subgradient(inst, subgrad_fn, tol)
    return SolveReport(
        point=point, value=empirical_loss(inst, sample, point), tol=tol, iterations=steps
    )


def population_minimizer(inst: SCOInstance, tol: float) -> SolveReport:
    """Population minimizer, cross-checked when a known one is declared.

    Explicit-weight instances run the subgradient solver on the population
    objective and verify the declared minimizer against it; implicit
    instances (closed-form population loss, no population subgradient
    oracle) verify against fixed probe points and seeded ball samples.
    """
    if tol <= 0:
        raise InputError(f"tol must be positive, got {tol}")
    known = inst.known_minimizer
    if inst.is_explicit:
        all_idx = np.arange(inst.num_outcomes)

        def subgrad_fn(x):
            return inst.weights @ inst.subgradients(all_idx, x)

        solved, steps = _projected_subgradient(inst, subgrad_fn, tol)
        solved_value = population_loss(inst, solved)
        if known is None:
            return SolveReport(point=solved, value=solved_value, tol=tol, iterations=steps)
        known_value = population_loss(inst, known)
        if known_value > solved_value + tol:
            raise IntegrityError(
                f"declared minimizer at {known_value:.6g} is worse than the "
                f"solver's point at {solved_value:.6g} by more than tol={tol}"
            )
        return SolveReport(point=np.asarray(known, float), value=known_value, tol=tol, iterations=steps)
    if known is None:
        raise InputError("implicit instances must declare a known minimizer")
    probes = np.vstack(
        [_probe_points(inst), uniform_ball_sample(inst.ball, derived_rng(0x505), 256)]
    )
    probe_best = float(population_loss_many(inst, probes).min())
    known_value = population_loss(inst, known)
    if known_value > probe_best + tol:
        raise IntegrityError(
            f"declared minimizer at {known_value:.6g} beaten by a probe at {probe_best:.6g}"
        )
    return SolveReport(point=np.asarray(known, float), value=known_value, tol=tol, iterations=0)


def near_erm_candidates(
    inst: SCOInstance,
    sample: Sample,
    net: Net | None,
    xhat: np.ndarray,
    xstar: np.ndarray,
) -> np.ndarray:
    """Candidate set for the worst near-ERM search, in tie-break order:
    net points, then structured spurious candidates, then the empirical
    minimizer, then the population minimizer."""
    rows = []
    if net is not None and len(net) > 0:
        rows.append(net.points)
    if inst.spurious_candidates is not None:
        spurious = inst.spurious_candidates(sample)
        if spurious:
            rows.append(np.asarray(spurious, dtype=float))
    rows.append(np.asarray([xhat], dtype=float))
    rows.append(np.asarray([xstar], dtype=float))
    return np.vstack(rows)


def worst_near_erm(
    inst: SCOInstance,
    sample: Sample,
    eps: float,
    net: Net | None,
    tol: float,
    premise: str = "statement",
) -> tuple[np.ndarray, float]:
    """Worst population point among eps-approximate empirical minimizers.

    Maximizes F over the candidate set subject to the near-ERM premise.
    premise="statement" admits x with F_hat(x) <= F_hat(x_star) + eps (the
    reference point is the true population minimizer); premise="min"
    compares against the candidate-set minimum of F_hat instead.  The
    population minimizer itself always qualifies, so the feasible set is
    never empty.  Ties break toward the lowest candidate index.
    """
    if eps <= 0:
        raise InputError(f"eps must be positive, got {eps}")
    if premise not in ("statement", "min"):
        raise InputError(f"unknown premise mode {premise!r}")
    xstar = population_minimizer(inst, tol).point
    xhat = minimize_empirical(inst, sample, tol).point
    candidates = near_erm_candidates(inst, sample, net, xhat, xstar)
    emp = empirical_loss_many(inst, sample, candidates)
    if premise == "statement":
        threshold = empirical_loss(inst, sample, xstar) + eps
    else:
        threshold = float(emp.min()) + eps
    eligible = np.nonzero(emp <= threshold)[0]
    pop = population_loss_many(inst, candidates[eligible])
    best = eligible[int(np.argmax(pop))]
    excess = float(pop.max() - population_loss(inst, xstar))
    return candidates[best].copy(), excess
