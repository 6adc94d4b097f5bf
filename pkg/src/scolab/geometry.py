"""Norm balls: norms, dual norms, projections, linear minimization, nets.

The domain of every problem in this library is the unit ball K of an l_p
norm.  All operations here are pure functions of their inputs; a Net is
immutable once built.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import InputError, SizingError, UnsupportedOperationError
from .seeding import derived_rng

_FAMILIES = ("l1", "l2", "linf", "lp")

FEASIBILITY_TOL = 1e-12


@dataclass(frozen=True)
class NormBall:
    """Unit ball of an l_p norm on R^dim.

    family is one of "l1", "l2", "linf", or "lp" (the latter with an explicit
    exponent p >= 1).  The dual exponent q satisfies 1/p + 1/q = 1 with the
    1/inf = 0 convention.
    """

    family: str
    dim: int
    p: float | None = None

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in _FAMILIES:
            raise InputError(f"unknown norm family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if self.dim < 1:
            raise InputError(f"dim must be positive, got {self.dim}")
        if fam == "lp":
            if self.p is None or not (self.p >= 1):
                raise InputError("lp family requires an exponent p >= 1")
        elif self.p is not None:
            raise InputError("exponent p is only meaningful for the lp family")

    @property
    def exponent(self) -> float:
        return {"l1": 1.0, "l2": 2.0, "linf": math.inf}.get(self.family, self.p)

    @property
    def dual_exponent(self) -> float:
        p = self.exponent
        if p == 1:
            return math.inf
        if math.isinf(p):
            return 1.0
        return p / (p - 1)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return norm_eval(self, x) <= 1.0 + tol


def _check_vector(ball: NormBall, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != ball.dim:
        raise InputError(f"expected a vector of length {ball.dim}, got shape {x.shape}")
    return x


def _lp_norm(x: np.ndarray, p: float) -> np.ndarray:
    if p == 1:
        return np.abs(x).sum(axis=-1)
    if p == 2:
        return np.sqrt((x * x).sum(axis=-1))
    if math.isinf(p):
        return np.abs(x).max(axis=-1)
    return (np.abs(x) ** p).sum(axis=-1) ** (1.0 / p)


def norm_eval(ball: NormBall, x: np.ndarray) -> float:
    """The ball's norm of x; exact for p in {1, 2, inf}."""
    return float(_lp_norm(_check_vector(ball, x), ball.exponent))


def norm_eval_many(ball: NormBall, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != ball.dim:
        raise InputError(f"expected rows of length {ball.dim}, got shape {xs.shape}")
    return _lp_norm(xs, ball.exponent)


def dual_norm_eval(ball: NormBall, g: np.ndarray) -> float:
    """sup_{x in K} <g, x>, i.e. the l_q norm of g for the dual exponent q."""
    return float(_lp_norm(_check_vector(ball, g), ball.dual_exponent))


def dual_norm_eval_many(ball: NormBall, gs: np.ndarray) -> np.ndarray:
    gs = np.asarray(gs, dtype=float)
    if gs.ndim != 2 or gs.shape[1] != ball.dim:
        raise InputError(f"expected rows of length {ball.dim}, got shape {gs.shape}")
    return _lp_norm(gs, ball.dual_exponent)


def _project_l1(x: np.ndarray) -> np.ndarray:
    # Euclidean projection onto the l1 ball via the sort-and-threshold
    # simplex routine (Duchi et al. style).
    if np.abs(x).sum() <= 1.0:
        return x.copy()
    mags = np.sort(np.abs(x))[::-1]
    css = np.cumsum(mags) - 1.0
    idx = np.arange(1, x.size + 1)
    rho = int(np.nonzero(mags - css / idx > 0)[0][-1]) + 1
    theta = css[rho - 1] / rho
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def project(ball: NormBall, x: np.ndarray) -> np.ndarray:
    """Euclidean (l2-metric) projection of x onto the ball.

    Exact for the l1, l2, and linf families; other exponents raise
    UnsupportedOperationError rather than silently approximating.
    """
    x = _check_vector(ball, x)
    if ball.family == "l2":
        nrm = float(np.linalg.norm(x))
        return x.copy() if nrm <= 1.0 else x / nrm
    if ball.family == "linf":
        return np.clip(x, -1.0, 1.0)
    if ball.family == "l1":
        return _project_l1(x)
    raise UnsupportedOperationError(
        f"exact projection is not available for p={ball.p}; "
        "supported families are l1, l2, linf"
    )


def linear_minimize(ball: NormBall, g: np.ndarray) -> tuple[np.ndarray, float]:
    """(point, value) minimizing <g, x> over the ball.

    value equals -dual_norm_eval(ball, g) and point attains it.  Ties (l1
    family) break toward the lowest coordinate index.
    """
    g = _check_vector(ball, g)
    if not np.any(g):
        return np.zeros(ball.dim), 0.0
    p = ball.exponent
    if p == 1:
        i = int(np.argmax(np.abs(g)))
        point = np.zeros(ball.dim)
        point[i] = -np.sign(g[i])
    elif p == 2:
        point = -g / np.linalg.norm(g)
    elif math.isinf(p):
        point = -np.sign(g)
    else:
        q = ball.dual_exponent
        mags = np.abs(g) ** (q - 1.0)
        point = -np.sign(g) * mags / _lp_norm(mags, p)
    return point, float(point @ g)


def uniform_ball_sample(ball: NormBall, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """size points drawn uniformly from the ball, rows of shape (size, dim)."""
    d, p = ball.dim, ball.exponent
    if math.isinf(p):
        pts = rng.uniform(-1.0, 1.0, size=(size, d))
    else:
        # Barthe-Guedon-Mendelson-Naor: coordinates with density ~ exp(-|t|^p),
        # normalized, then pushed inward by a U^(1/d) radius factor.
        raw = rng.gamma(1.0 / p, 1.0, size=(size, d)) ** (1.0 / p)
        raw *= rng.choice([-1.0, 1.0], size=(size, d))
        norms = _lp_norm(raw, p)
        norms[norms == 0.0] = 1.0
        radii = rng.random(size) ** (1.0 / d)
        pts = raw * (radii / norms)[:, None]
    return pts


@dataclass(frozen=True)
class Net:
    """A maximal eps-separated packing of the ball, hence a 2*eps cover.

    separation is the guaranteed pairwise lower bound (the build eps);
    radius is the declared cover radius 2*eps; measured_radius is an
    empirical probe of the actual cover radius (a lower bound on the truth,
    typically much smaller than the declared one).
    """

    ball: NormBall
    points: np.ndarray
    separation: float
    radius: float
    seed: int
    measured_radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))

    def __len__(self) -> int:
        return self.points.shape[0]


def packing_bound(dim: int, eps: float) -> float:
    """Volumetric cap on the size of an eps-separated packing of a unit ball."""
    return (2.0 * (1.0 + eps) / eps) ** dim


def _grid_candidates(ball: NormBall, eps: float, budget: int) -> Iterator[np.ndarray]:
    # Axis grid with step eps/(2 sqrt(d)) intersected with K, streamed in
    # blocks so high-d grids never materialize at once.  The stream stops at
    # `budget` points: the prefix stays deterministic and the random tail
    # restores approximate maximality when the grid is truncated.
    d = ball.dim
    step = eps / (2.0 * math.sqrt(d))
    kmax = int(math.floor(1.0 / step))
    axis = np.arange(-kmax, kmax + 1) * step
    emitted = 0
    block = []
    for idx in np.ndindex(*([axis.size] * d)):
        pt = axis[list(idx)]
        block.append(pt)
        emitted += 1
        if len(block) == 4096:
            yield np.array(block)
            block = []
        if emitted >= budget:
            break
    if block:
        yield np.array(block)


def _min_dists(ball: NormBall, accepted: list[np.ndarray], pts: np.ndarray) -> np.ndarray:
    if not accepted:
        return np.full(pts.shape[0], np.inf)
    acc = np.asarray(accepted)
    diffs = pts[:, None, :] - acc[None, :, :]
    return _lp_norm(diffs, ball.exponent).min(axis=1)


def build_net(
    ball: NormBall,
    eps: float,
    candidate_budget: int = 20000,
    seed: int = 0,
    size_cap: int = 100_000,
    probe_count: int = 2048,
) -> Net:
    """Greedy maximal eps-separated packing of the ball.

    The candidate stream is a deterministic axis grid (reproducible prefix)
    followed by seeded uniform ball samples up to candidate_budget (restores
    maximality away from the grid).  Refuses up front when the volumetric
    size bound exceeds size_cap.
    """
    if eps <= 0:
        raise InputError(f"eps must be positive, got {eps}")
    bound = packing_bound(ball.dim, eps)
    if bound > size_cap:
        raise SizingError(
            f"predicted packing size {bound:.3g} exceeds cap {size_cap} "
            f"(dim={ball.dim}, eps={eps}); refuse rather than truncate"
        )
    accepted: list[np.ndarray] = []

    def absorb(block: np.ndarray) -> None:
        keep = norm_eval_many(ball, block) <= 1.0 + FEASIBILITY_TOL
        for pt in block[keep]:
            if _min_dists(ball, accepted, pt[None, :])[0] > eps:
                accepted.append(pt)

    for block in _grid_candidates(ball, eps, candidate_budget):
        absorb(block)
    rng = derived_rng(seed)
    remaining = candidate_budget
    while remaining > 0:
        take = min(remaining, 4096)
        absorb(uniform_ball_sample(ball, rng, take))
        remaining -= take

    points = np.asarray(accepted)
    net = Net(ball=ball, points=points, separation=eps, radius=2.0 * eps, seed=seed)
    measured = measure_cover_radius(net, probe_count, seed)
    return Net(
        ball=ball, points=points, separation=eps, radius=2.0 * eps, seed=seed,
        measured_radius=measured,
    )


def measure_cover_radius(net: Net, num_probes: int, seed: int) -> float:
    """Empirical cover radius: max over seeded probes of the nearest-point gap."""
    rng = derived_rng(seed, 0xC0FE)
    worst = 0.0
    remaining = num_probes
    while remaining > 0:
        take = min(remaining, 8192)
        probes = uniform_ball_sample(net.ball, rng, take)
        diffs = probes[:, None, :] - net.points[None, :, :]
        nearest = _lp_norm(diffs, net.ball.exponent).min(axis=1)
        worst = max(worst, float(nearest.max()))
        remaining -= take
    return worst


def net_to_json(net: Net, path: str | Path | None = None) -> str:
    """Serialize per the wire schema {family, dim, eps, seed, points}."""
    payload = {
        "family": net.ball.family,
        "dim": net.ball.dim,
        "eps": net.separation,
        "seed": net.seed,
        "points": net.points.tolist(),
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    if path is not None:
        Path(path).write_text(text)
    return text


def net_from_json(source: str | Path) -> Net:
    text = Path(source).read_text() if isinstance(source, Path) else source
    data = json.loads(text)
    ball = NormBall(family=data["family"], dim=int(data["dim"]))
    return Net(
        ball=ball,
        points=np.asarray(data["points"], dtype=float),
        separation=float(data["eps"]),
        radius=2.0 * float(data["eps"]),
        seed=int(data["seed"]),
    )
