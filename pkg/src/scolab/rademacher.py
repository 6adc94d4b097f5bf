"""Rademacher complexity of norm balls viewed as linear function classes.

For a sample of dual-feasible vectors S = (g_1..g_n), the complexity is the
expected dual norm of a random-sign average, E_sigma ||(1/n) sum sigma_j g_j||_*.
Small n admits exact enumeration over all 2^n sign vectors; beyond that a
seeded Monte Carlo estimate with a standard error is returned.  Worst-case
values over all feasible S are represented by closed-form upper bounds per
family, with an inverse lookup used by the general sample-size formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, UnsupportedOperationError
from .geometry import NormBall, dual_norm_eval_many
from .seeding import derived_rng

EXACT_LIMIT = 20


@dataclass(frozen=True)
class RadEstimate:
    value: float
    stderr: float
    n: int
    method: str  # "exact" | "monte-carlo" | "closed-form"

    def __post_init__(self):
        if self.value < 0 or self.stderr < 0:
            raise InputError("complexity estimates are non-negative")


def _check_sample(ball: NormBall, vectors) -> np.ndarray:
    vs = np.atleast_2d(np.asarray(vectors, dtype=float))
    if vs.shape[1] != ball.dim:
        raise InputError(f"vectors have dim {vs.shape[1]}, ball has {ball.dim}")
    feas = dual_norm_eval_many(ball, vs)
    if np.any(feas > 1.0 + 1e-9):
        raise InputError(f"dual-infeasible vector with norm {feas.max():.6g} > 1")
    return vs


def _sign_block(start: int, count: int, n: int) -> np.ndarray:
    codes = np.arange(start, start + count, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1) * 2.0 - 1.0


def rad_exact(ball: NormBall, vectors) -> RadEstimate:
    """Exact complexity by enumerating all 2^n sign vectors (n <= 20)."""
    vs = _check_sample(ball, vectors)
    n = vs.shape[0]
    if n > EXACT_LIMIT:
        raise InputError(f"exact enumeration is capped at n={EXACT_LIMIT}; use rad_mc")
    total = 0.0
    count = 1 << n
    for start in range(0, count, 16384):
        block = _sign_block(start, min(16384, count - start), n)
        total += dual_norm_eval_many(ball, (block @ vs) / n).sum()
    return RadEstimate(value=total / count, stderr=0.0, n=n, method="exact")


def rad_mc(ball: NormBall, vectors, trials: int, seed: int) -> RadEstimate:
    """Monte Carlo estimate over seeded sign draws (trials >= 1000)."""
    vs = _check_sample(ball, vectors)
    if trials < 1000:
        raise InputError(f"need at least 1000 trials, got {trials}")
    n = vs.shape[0]
    rng = derived_rng(seed, 0x5169)
    values = np.empty(trials)
    done = 0
    while done < trials:
        take = min(trials - done, 16384)
        signs = rng.choice([-1.0, 1.0], size=(take, n))
        values[done : done + take] = dual_norm_eval_many(ball, (signs @ vs) / n)
        done += take
    return RadEstimate(
        value=float(values.mean()),
        stderr=float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
        n=n,
        method="monte-carlo",
    )


def rad_upper_bound(ball: NormBall, n: int) -> float:
    """Closed-form bound on the worst-case complexity at sample size n.

    l2 ball: n^(-1/2).  l1 ball (dual-linf data): sqrt(2 ln(2d) / n), the
    finite-class bound over signed coordinates.  linf ball (dual-l1 data):
    sqrt(d/n), from splitting the mass evenly across coordinates.
    """
    if n < 1:
        raise InputError(f"n must be positive, got {n}")
    if ball.family == "l2":
        return n ** (-0.5)
    if ball.family == "l1":
        return math.sqrt(2.0 * math.log(2 * ball.dim) / n)
    if ball.family == "linf":
        return math.sqrt(ball.dim / n)
    raise UnsupportedOperationError(
        f"no closed-form complexity bound for family {ball.family!r}"
    )


def rad_inverse(ball: NormBall, eps: float) -> int:
    """Smallest n whose closed-form bound drops strictly below eps.

    Valid because each implemented bound is decreasing in n, matching the
    leave-one-out monotonicity of the exact complexity.
    """
    if not (0.0 < eps <= 1.0):
        raise InputError(f"eps must lie in (0, 1], got {eps}")
    rad_upper_bound(ball, 1)  # surface unsupported-family errors early
    hi = 1
    while rad_upper_bound(ball, hi) >= eps:
        hi *= 2
        if hi > 1 << 62:
            raise InputError("inverse complexity overflow")
    lo = hi // 2  # bound(lo) >= eps when lo >= 1
    if hi == 1:
        return 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rad_upper_bound(ball, mid) < eps:
            hi = mid
        else:
            lo = mid
    return hi


def check_monotonicity(ball: NormBall, vectors) -> dict:
    """Leave-one-out averaging check on an exact-enumeration sample.

    Verifies that the complexity of S is at most the mean over j of the
    complexity of S with element j removed, the inequality behind
    monotonicity in n.
    """
    vs = _check_sample(ball, vectors)
    n_plus_one = vs.shape[0]
    if n_plus_one < 2:
        raise InputError("need at least two vectors")
    if n_plus_one > 13:
        raise InputError("exact monotonicity check is capped at 13 vectors")
    full = rad_exact(ball, vs).value
    leave_one_out = [
        rad_exact(ball, np.delete(vs, j, axis=0)).value for j in range(n_plus_one)
    ]
    rhs = float(np.mean(leave_one_out))
    return {
        "full": full,
        "leave_one_out_mean": rhs,
        "ok": full <= rhs + 1e-12,
    }


def adversarial_sample(ball: NormBall, n: int, seed: int) -> np.ndarray:
    """Repeated extreme points of the dual ball; a worst-case heuristic for tests."""
    rng = derived_rng(seed, 0xADE5)
    d = ball.dim
    if ball.family == "l2":
        v = np.zeros(d)
        v[0] = 1.0
        return np.tile(v, (n, 1))
    if ball.family == "l1":
        # dual ball is linf: corners are sign patterns
        return rng.choice([-1.0, 1.0], size=(n, d))
    if ball.family == "linf":
        # dual ball is l1: extreme points are signed basis vectors, spread evenly
        out = np.zeros((n, d))
        cols = np.arange(n) % d
        out[np.arange(n), cols] = 1.0
        return out
    raise UnsupportedOperationError(f"no adversarial heuristic for {ball.family!r}")
