"""Finite-support stochastic convex optimization problem instances.

An instance bundles a domain ball, an outcome space with weights, per-outcome
convex Lipschitz losses with subgradient oracles, and the analytic constants
(Lipschitz L, range bound c) the sample-size formulas consume.  Outcome
spaces are either explicit (a list plus a weight vector) or implicit (an
index sampler plus a closed-form population loss); the hard family below is
implicit because its outcome space is a power set.

All constructed instances are immutable and their oracles are pure, so they
are safe to share across parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import InputError, IntegrityError
from .geometry import (
    NormBall,
    dual_norm_eval,
    norm_eval,
    project,
    uniform_ball_sample,
)
from .seeding import derived_rng

HARD_M_CAP = 32


@dataclass(frozen=True)
class Sample:
    """A drawn multiset of outcome indices, reproducible from its seed."""

    indices: np.ndarray
    n: int
    seed: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.shape[0] != self.n:
            raise InputError(f"expected {self.n} indices, got shape {idx.shape}")
        object.__setattr__(self, "indices", idx)


@dataclass(frozen=True)
class SCOInstance:
    """One stochastic convex optimization problem over a norm ball.

    loss/subgrad take an outcome descriptor and a point; losses_at and
    subgrads_at are vectorized equivalents over index arrays used by the
    solver and the sweep harness.  Explicit instances carry outcomes plus
    weights; implicit ones carry draw_indices, outcome_of and a closed-form
    population_loss_fn instead.
    """

    ball: NormBall
    label: str
    family: str
    params: dict
    lipschitz: float
    bound: float
    loss: Callable[[Any, np.ndarray], float]
    subgrad: Callable[[Any, np.ndarray], np.ndarray]
    outcomes: tuple | None = None
    weights: np.ndarray | None = None
    outcome_of: Callable[[int], Any] | None = None
    draw_indices: Callable[[np.random.Generator, int], np.ndarray] | None = None
    population_loss_fn: Callable[[np.ndarray], float] | None = None
    subdifferential_extremes: Callable[[Any, np.ndarray], list] | None = None
    known_minimizer: np.ndarray | None = None
    spurious_candidates: Callable[[Sample], list] | None = None
    empirical_minimizer: Callable[[Sample], np.ndarray] | None = None
    smooth: bool = False
    losses_at: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    subgrads_at: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise InputError("weights must be non-negative and sum to 1")
            object.__setattr__(self, "weights", w)
        if self.weights is None and self.population_loss_fn is None:
            raise InputError("implicit instances must supply a closed-form population loss")

    @property
    def is_explicit(self) -> bool:
        return self.weights is not None

    @property
    def num_outcomes(self) -> int | None:
        return len(self.outcomes) if self.outcomes is not None else None

    def outcome(self, index: int) -> Any:
        if self.outcomes is not None:
            return self.outcomes[int(index)]
        return self.outcome_of(int(index))

    def losses(self, indices: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Per-outcome losses, shape (len(indices), len(points))."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        indices = np.asarray(indices, dtype=np.int64)
        if self.losses_at is not None:
            return self.losses_at(indices, points)
        out = np.empty((indices.shape[0], points.shape[0]))
        for i, idx in enumerate(indices):
            z = self.outcome(idx)
            for k, x in enumerate(points):
                out[i, k] = self.loss(z, x)
        return out

    def subgradients(self, indices: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Per-outcome subgradients at x, shape (len(indices), dim)."""
        indices = np.asarray(indices, dtype=np.int64)
        if self.subgrads_at is not None:
            return self.subgrads_at(indices, np.asarray(x, dtype=float))
        return np.array([self.subgrad(self.outcome(i), x) for i in indices])

    def descriptor(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}


def _check_domain_point(inst: SCOInstance, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    nrm = norm_eval(inst.ball, x)
    if nrm > 1.0 + tol:
        raise InputError(f"point lies outside the domain ball (norm {nrm:.6g})")
    return x


def population_loss(inst: SCOInstance, x: np.ndarray) -> float:
    """Exact expected loss at x: weighted sum or the family's closed form."""
    x = _check_domain_point(inst, x)
    if inst.is_explicit:
        vals = inst.losses(np.arange(inst.num_outcomes), x[None, :])[:, 0]
        return float(inst.weights @ vals)
    return float(inst.population_loss_fn(x))


def population_loss_many(inst: SCOInstance, points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if inst.is_explicit:
        vals = inst.losses(np.arange(inst.num_outcomes), points)
        return inst.weights @ vals
    return np.array([inst.population_loss_fn(x) for x in points])


def empirical_loss(inst: SCOInstance, sample: Sample, x: np.ndarray) -> float:
    """Mean loss over the sample's outcomes (multiset semantics)."""
    x = _check_domain_point(inst, x)
    return float(inst.losses(sample.indices, x[None, :])[:, 0].mean())


def empirical_loss_many(inst: SCOInstance, sample: Sample, points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return inst.losses(sample.indices, points).mean(axis=0)


def draw_sample(inst: SCOInstance, n: int, seed: int) -> Sample:
    """n i.i.d. outcome indices under the instance's distribution."""
    if n < 1:
        raise InputError(f"sample size must be at least 1, got {n}")
    rng = derived_rng(seed)
    if inst.is_explicit:
        indices = rng.choice(inst.num_outcomes, size=n, p=inst.weights)
    else:
        indices = inst.draw_indices(rng, n)
    return Sample(indices=np.asarray(indices, dtype=np.int64), n=n, seed=seed)


# ---------------------------------------------------------------------------
# coin family: one-dimensional sign-of-drift problem


def make_coin_instance(eps0: float) -> SCOInstance:
    """d=1 instance on [-1,1]: f_z(x) = 2*eps0*|x| + z*x, z uniform in {+1,-1}.

    The population loss is 2*eps0*|x| with minimizer 0; once the sample mean
    of z exceeds 2*eps0 in magnitude, the opposite endpoint becomes the exact
    empirical minimizer with population excess 2*eps0.
    """
    if not (0.0 < eps0 < 1.0):
        raise InputError(f"eps0 must lie in (0,1), got {eps0}")
    ball = NormBall("l2", 1)
    e2 = 2.0 * eps0
    signs = np.array([1.0, -1.0])

    def loss(z, x):
        return e2 * abs(x[0]) + z * x[0]

    def subgrad(z, x):
        return np.array([e2 * np.sign(x[0]) + z])

    def extremes(z, x):
        if x[0] == 0.0:
            return [np.array([z - e2]), np.array([z + e2])]
        return [subgrad(z, x)]

    def losses_at(indices, points):
        zs = signs[indices]
        xs = points[:, 0]
        return e2 * np.abs(xs)[None, :] + zs[:, None] * xs[None, :]

    def subgrads_at(indices, x):
        return (e2 * np.sign(x[0]) + signs[indices])[:, None]

    def spurious(sample):
        mean = float(signs[sample.indices].mean())
        if abs(mean) > e2:
            return [np.array([-np.sign(mean)])]
        return []

    def empirical_min(sample):
        mean = float(signs[sample.indices].mean())
        cands = np.array([-1.0, 0.0, 1.0])
        vals = e2 * np.abs(cands) + mean * cands
        return np.array([cands[int(np.argmin(vals))]])

    return SCOInstance(
        ball=ball,
        label=f"coin(eps0={eps0})",
        family="coin",
        params={"eps0": eps0},
        lipschitz=1.0 + e2,
        bound=1.0 + e2,
        loss=loss,
        subgrad=subgrad,
        outcomes=(1.0, -1.0),
        weights=np.array([0.5, 0.5]),
        subdifferential_extremes=extremes,
        known_minimizer=np.zeros(1),
        spurious_candidates=spurious,
        empirical_minimizer=empirical_min,
        losses_at=losses_at,
        subgrads_at=subgrads_at,
    )


# ---------------------------------------------------------------------------
# hard family: sparse activations over near-orthogonal directions


def _sample_directions(d: int, m: int, seed: int, max_tries: int) -> np.ndarray:
    rng = derived_rng(seed, 0xD17)
    accepted: list[np.ndarray] = []
    tries = 0
    scale = 1.0 / math.sqrt(d)
    while len(accepted) < m:
        if tries >= max_tries:
            raise InputError(
                f"could not find {m} sign directions with pairwise inner "
                f"product <= 1/2 in {max_tries} tries (d={d})"
            )
        tries += 1
        v = rng.choice([-1.0, 1.0], size=d) * scale
        if all(float(v @ u) <= 0.5 + 1e-12 for u in accepted):
            accepted.append(v)
    return np.asarray(accepted)


def make_hard_instance(
    d: int, eps0: float, m: int, seed: int, max_tries: int = 200_000
) -> SCOInstance:
    """Implicit instance whose outcomes are random subsets of m directions.

    f_z(x) = max({1/2} U {<v,x> : v in z}) where each direction enters z
    independently with probability eps0.  The flat base level makes every
    never-activated direction an exact empirical minimizer with population
    excess eps0/2, so spurious near-ERMs are a pure coverage event.
    Outcome indices are m-bit activation masks.
    """
    if d < 2:
        raise InputError(f"hard family needs d >= 2, got {d}")
    if not (1 <= m <= HARD_M_CAP):
        raise InputError(f"m must lie in [1, {HARD_M_CAP}], got {m}")
    if not (0.0 < eps0 <= 0.5):
        raise InputError(f"eps0 must lie in (0, 1/2], got {eps0}")
    ball = NormBall("l2", d)
    directions = _sample_directions(d, m, seed, max_tries)
    bit_values = 1 << np.arange(m, dtype=np.int64)

    def mask_bits(indices: np.ndarray) -> np.ndarray:
        return (np.asarray(indices, dtype=np.int64)[:, None] & bit_values[None, :]) != 0

    def loss(z, x):
        active = mask_bits(np.array([z]))[0]
        best = 0.5
        if active.any():
            best = max(best, float((directions[active] @ x).max()))
        return best

    def losses_at(indices, points):
        scores = directions @ points.T  # (m, k)
        bits = mask_bits(indices)  # (n, m)
        masked = np.where(bits[:, :, None], scores[None, :, :], -np.inf)
        return np.maximum(masked.max(axis=1), 0.5)

    def subgrad(z, x):
        active = mask_bits(np.array([z]))[0]
        if not active.any():
            return np.zeros(d)
        vals = directions[active] @ x
        if vals.max() <= 0.5:
            return np.zeros(d)
        return directions[np.nonzero(active)[0][int(np.argmax(vals))]].copy()

    def subgrads_at(indices, x):
        scores = directions @ x  # (m,)
        bits = mask_bits(indices)
        masked = np.where(bits, scores[None, :], -np.inf)
        best = masked.max(axis=1)
        arg = masked.argmax(axis=1)
        out = np.where(best[:, None] > 0.5, directions[arg], 0.0)
        return out

    def extremes(z, x):
        active = mask_bits(np.array([z]))[0]
        best = 0.5
        grads = [np.zeros(d)]
        if active.any():
            vals = directions[active] @ x
            top = float(vals.max())
            if top > best + 1e-12:
                best = top
                grads = []
            if top >= best - 1e-12:
                rows = np.nonzero(active)[0][np.abs(vals - top) <= 1e-12]
                grads.extend(directions[r].copy() for r in rows)
        return grads

    def draw_indices(rng, n):
        bits = rng.random((n, m)) < eps0
        return bits.astype(np.int64) @ bit_values

    def pop_loss(x):
        vals = np.sort(directions @ x)[::-1]
        total = 0.5
        stay = 1.0
        for k, v in enumerate(vals):
            if v <= 0.5:
                break
            lower = max(float(vals[k + 1]) if k + 1 < m else -math.inf, 0.5)
            stay *= 1.0 - eps0
            total += (v - lower) * (1.0 - stay)
        return total

    def spurious(sample):
        bits = mask_bits(sample.indices)
        uncovered = ~bits.any(axis=0)
        return [directions[i].copy() for i in np.nonzero(uncovered)[0]]

    return SCOInstance(
        ball=ball,
        label=f"hard(d={d},m={m},eps0={eps0})",
        family="hard",
        params={"d": d, "eps0": eps0, "m": m, "seed": seed},
        lipschitz=1.0,
        bound=1.0,
        loss=loss,
        subgrad=subgrad,
        outcome_of=lambda i: int(i),
        draw_indices=draw_indices,
        population_loss_fn=pop_loss,
        subdifferential_extremes=extremes,
        known_minimizer=np.zeros(d),
        spurious_candidates=spurious,
        empirical_minimizer=lambda sample: np.zeros(d),
        losses_at=losses_at,
        subgrads_at=subgrads_at,
        meta={"directions": directions, "num_masks": int(1 << m)},
    )


# ---------------------------------------------------------------------------
# quadratic family: smooth losses around outcome centers


def _quadratic_constants(ball: NormBall, centers: np.ndarray) -> tuple[float, float]:
    # L = sup over x in K, z of the dual norm of the gradient (x-z)/2;
    # c = sup of the loss itself.  Both suprema are over extreme points of K,
    # computable in closed form for the three exact families.
    if ball.family == "l2":
        reach = np.linalg.norm(centers, axis=1) + 1.0
        return float(reach.max() / 2.0), float((reach**2).max() / 4.0)
    if ball.family == "linf":
        l1_reach = (1.0 + np.abs(centers)).sum(axis=1)
        sq_reach = ((1.0 + np.abs(centers)) ** 2).sum(axis=1)
        return float(l1_reach.max() / 2.0), float(sq_reach.max() / 4.0)
    if ball.family == "l1":
        linf_reach = np.abs(centers).max(axis=1) + 1.0
        sq = (centers**2).sum(axis=1) + 1.0 + 2.0 * np.abs(centers).max(axis=1)
        return float(linf_reach.max() / 2.0), float(sq.max() / 4.0)
    raise InputError("quadratic instances support l1, l2 and linf balls only")


def make_quadratic_instance(centers, ball: NormBall) -> SCOInstance:
    """Uniform mixture of smooth bowls f_z(x) = ||x - z||_2^2 / 4.

    The population loss is ||x - mean(centers)||^2/4 plus a constant, so the
    exact minimizer is the Euclidean projection of the centroid.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[0] == 0:
        raise InputError("centers must be nonempty")
    if centers.shape[1] != ball.dim:
        raise InputError(f"centers have dim {centers.shape[1]}, ball has {ball.dim}")
    for z in centers:
        gap = float(np.linalg.norm(z - project(ball, z)))
        if gap > 2.0 + 1e-9:
            raise InputError(f"center {z} lies {gap:.3g} > 2 away from the ball")
    lipschitz, bound = _quadratic_constants(ball, centers)
    k = centers.shape[0]

    def loss(z, x):
        diff = x - z
        return float(diff @ diff) / 4.0

    def subgrad(z, x):
        return (x - z) / 2.0

    def losses_at(indices, points):
        diffs = points[None, :, :] - centers[indices][:, None, :]
        return (diffs**2).sum(axis=2) / 4.0

    def subgrads_at(indices, x):
        return (x[None, :] - centers[indices]) / 2.0

    def empirical_min(sample):
        return project(ball, centers[sample.indices].mean(axis=0))

    return SCOInstance(
        ball=ball,
        label=f"quadratic(k={k},d={ball.dim})",
        family="quadratic",
        params={
            "centers": centers.tolist(),
            "ball": {"family": ball.family, "dim": ball.dim},
        },
        lipschitz=lipschitz,
        bound=bound,
        loss=loss,
        subgrad=subgrad,
        outcomes=tuple(map(tuple, centers)),
        weights=np.full(k, 1.0 / k),
        known_minimizer=project(ball, centers.mean(axis=0)),
        empirical_minimizer=empirical_min,
        smooth=True,
        losses_at=losses_at,
        subgrads_at=subgrads_at,
        meta={"centers": centers},
    )


# ---------------------------------------------------------------------------
# the two-piece decomposition fixture


@dataclass(frozen=True)
class ScalarConvexPiece:
    """A one-dimensional convex function with exact subdifferential data."""

    label: str
    value: Callable[[float], float]
    derivative: Callable[[float], float]
    extreme_slopes: Callable[[float], tuple[float, ...]]


def make_appendix_pair() -> tuple[ScalarConvexPiece, ScalarConvexPiece, tuple[float, float]]:
    """The smooth-plus-kink pair used to exercise subgradient decomposition.

    f1(x) = (x - 0.1)^2 - 1/25 is smooth; f2(x) = |x + 0.1| has extreme
    subgradients {-1, +1} at its kink.  Their mean is minimized at x = -0.1,
    where a zero mean-subgradient splits as (-0.4) + (+0.4).
    """
    f1 = ScalarConvexPiece(
        label="shifted-parabola",
        value=lambda x: (x - 0.1) ** 2 - 0.04,
        derivative=lambda x: 2.0 * (x - 0.1),
        extreme_slopes=lambda x: (2.0 * (x - 0.1),),
    )

    def f2_extremes(x: float) -> tuple[float, ...]:
        if x == -0.1:
            return (-1.0, 1.0)
        return (math.copysign(1.0, x + 0.1),)

    f2 = ScalarConvexPiece(
        label="shifted-vee",
        value=lambda x: abs(x + 0.1),
        derivative=lambda x: math.copysign(1.0, x + 0.1) if x != -0.1 else 0.0,
        extreme_slopes=f2_extremes,
    )
    return f1, f2, (-1.0, 1.0)


def make_appendix_instance() -> SCOInstance:
    """Uniform two-outcome instance over the decomposition pair on [-1, 1]."""
    f1, f2, _ = make_appendix_pair()
    ball = NormBall("l2", 1)

    def loss(z, x):
        return z.value(float(x[0]))

    def subgrad(z, x):
        return np.array([z.derivative(float(x[0]))])

    def extremes(z, x):
        return [np.array([s]) for s in z.extreme_slopes(float(x[0]))]

    return SCOInstance(
        ball=ball,
        label="appendix-pair",
        family="appendix",
        params={},
        lipschitz=2.2,
        bound=1.17,
        loss=loss,
        subgrad=subgrad,
        outcomes=(f1, f2),
        weights=np.array([0.5, 0.5]),
        subdifferential_extremes=extremes,
        known_minimizer=np.array([-0.1]),
    )


def instance_from_descriptor(descriptor: dict) -> SCOInstance:
    """Rebuild an instance from its JSON descriptor (losses are reconstructed)."""
    family = descriptor["family"]
    params = descriptor.get("params", {})
    if family == "coin":
        return make_coin_instance(params["eps0"])
    if family == "hard":
        return make_hard_instance(params["d"], params["eps0"], params["m"], params["seed"])
    if family == "quadratic":
        ball_spec = params["ball"]
        ball = NormBall(ball_spec["family"], ball_spec["dim"], ball_spec.get("p"))
        return make_quadratic_instance(params["centers"], ball)
    if family == "appendix":
        return make_appendix_instance()
    raise InputError(f"unknown instance family {family!r}")


# ---------------------------------------------------------------------------
# the invariant battery


def _battery_indices(inst: SCOInstance, rng: np.random.Generator, count: int) -> np.ndarray:
    if inst.is_explicit:
        return np.arange(inst.num_outcomes)
    return inst.draw_indices(rng, count)


def run_invariant_battery(
    inst: SCOInstance, probes: int = 1000, seed: int = 0, tol: float = 1e-9
) -> dict:
    """Probe Lipschitzness, boundedness, subgradient validity and dual caps.

    Returns a report dict with the worst observed violation of each
    invariant; `ok` is True when every violation stays within tol.
    """
    rng = derived_rng(seed, 0xBA77E)
    xs = uniform_ball_sample(inst.ball, rng, probes)
    ys = uniform_ball_sample(inst.ball, rng, probes)
    indices = _battery_indices(inst, rng, min(probes, 64))
    lip_viol = bound_viol = sub_viol = dual_viol = 0.0
    fx = inst.losses(indices, xs)
    fy = inst.losses(indices, ys)
    diff_norms = np.array([norm_eval(inst.ball, x - y) for x, y in zip(xs, ys)])
    lip_viol = float((np.abs(fx - fy) - inst.lipschitz * diff_norms[None, :]).max())
    bound_viol = float(max(np.abs(fx).max(), np.abs(fy).max()) - inst.bound)
    for k in range(probes):
        g = inst.subgradients(indices, xs[k])
        lin = g @ (ys[k] - xs[k])
        sub_viol = max(sub_viol, float((fx[:, k] + lin - fy[:, k]).max()))
        dual_viol = max(
            dual_viol,
            float(max(dual_norm_eval(inst.ball, gi) for gi in g) - inst.lipschitz),
        )
    checks = {
        "lipschitz": lip_viol,
        "bounded": bound_viol,
        "subgradient_inequality": sub_viol,
        "dual_norm_cap": dual_viol,
    }
    if inst.is_explicit:
        checks["weights_sum"] = abs(float(inst.weights.sum()) - 1.0)
    return {
        "label": inst.label,
        "probes": probes,
        "violations": checks,
        "ok": all(v <= tol for v in checks.values()),
    }
