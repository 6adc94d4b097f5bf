"""Trial orchestration: failure probabilities, thresholds, scaling fits, reports.

A sweep is a pure function of its configuration, including the master seed:
every trial's seed is derived from (master_seed, d, eps index, n, trial), so
cells are independently reproducible and results.json is byte-identical
across reruns regardless of execution order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .divergence import build_certificate, check_conditional_claims
from .errors import InputError, SizingError
from .geometry import Net, NormBall, build_net
from .instances import (
    SCOInstance,
    draw_sample,
    empirical_loss_many,
    instance_from_descriptor,
    make_coin_instance,
    make_hard_instance,
    make_quadratic_instance,
    population_loss_many,
)
from .rademacher import rad_inverse
from .solver import minimize_empirical, near_erm_candidates, population_minimizer
from .seeding import derived_seed

_Z95 = 1.959963984540054
SCHEMA_VERSION = 1


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def sample_size_bound(d: int, eps: float) -> int:
    """Sample size sufficient for the Euclidean guarantee at accuracy eps.

    Evaluates 3 d ln(40/eps)/eps + 40/eps^2, rounded to the nearest integer.
    """
    if not (0.0 < eps < 1.0):
        raise InputError(f"eps must lie in (0,1), got {eps}")
    if d < 1:
        raise InputError(f"d must be positive, got {d}")
    return _round_half_up(3.0 * d * math.log(40.0 / eps) / eps + 40.0 / eps**2)


def sample_size_bound_general(
    d: int, eps: float, delta: float, lipschitz: float, bound: float, ball: NormBall
) -> int:
    """General-norm sample size: cover term + inverse complexity + deviation term."""
    if not (0.0 < eps < 1.0) or not (0.0 < delta < 1.0):
        raise InputError("eps and delta must lie in (0,1)")
    cover = 12.0 * bound * d / eps * math.log(3.0 * lipschitz / eps)
    linear = rad_inverse(ball, eps / (2.0 * lipschitz))
    deviation = 8.0 * bound**2 / eps**2 * math.log(4.0 / delta)
    return _round_half_up(cover + linear + deviation)


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    if trials <= 0:
        raise InputError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z**2 / trials
    center = (phat + z**2 / (2.0 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z**2 / (4.0 * trials**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def isotonic_nonincreasing(values: list[float]) -> list[float]:
    """Pool-adjacent-violators fit enforcing a nonincreasing sequence."""
    blocks: list[list[float]] = []  # [sum, count]
    for v in values:
        blocks.append([v, 1.0])
        while len(blocks) > 1 and blocks[-2][0] / blocks[-2][1] < blocks[-1][0] / blocks[-1][1]:
            s, c = blocks.pop()
            blocks[-1][0] += s
            blocks[-1][1] += c
    out: list[float] = []
    for s, c in blocks:
        out.extend([s / c] * int(c))
    return out


# ---------------------------------------------------------------------------
# configuration


_CONFIG_FIELDS = {
    "family": str,
    "instance": dict,
    "d_grid": list,
    "eps_grid": list,
    "n_grid": (list, type(None)),
    "trials": int,
    "multiplier": (int, float),
    "target": (int, float),
    "master_seed": int,
    "net_policy": str,
    "net_eps": (int, float, type(None)),
    "net_cap": int,
    "net_budget": int,
    "check_claims": bool,
    "solver_tol": (int, float),
    "n_min": int,
    "n_max": int,
    "uc_enabled": bool,
    "uc_eps": (int, float, type(None)),
    "uc_trials": (int, type(None)),
    "record_trials": bool,
    "schema_version": int,
}


@dataclass(frozen=True)
class SweepConfig:
    """Full description of a sweep; the audit unit for reproducibility."""

    family: str
    instance: dict
    d_grid: tuple
    eps_grid: tuple
    n_grid: tuple | None = None
    trials: int = 200
    multiplier: float = 40.0
    target: float = 0.25
    master_seed: int = 0
    net_policy: str = "third"  # "third" | "fixed" | "none"
    net_eps: float | None = None
    net_cap: int = 100_000
    net_budget: int = 20_000
    check_claims: bool = False
    solver_tol: float = 0.01
    n_min: int = 1
    n_max: int = 4096
    uc_enabled: bool = False
    uc_eps: float | None = None
    uc_trials: int | None = None
    record_trials: bool = True
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "d_grid", tuple(int(d) for d in self.d_grid))
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        if self.n_grid is not None:
            object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if not self.d_grid or not self.eps_grid:
            raise InputError("d_grid and eps_grid must be nonempty")
        if self.trials < 50:
            raise InputError(f"trials must be at least 50, got {self.trials}")
        if self.multiplier <= 1.0:
            raise InputError(f"multiplier must exceed 1, got {self.multiplier}")
        if not (0.0 < self.target < 1.0):
            raise InputError(f"target must lie in (0,1), got {self.target}")
        if self.net_policy not in ("third", "fixed", "none"):
            raise InputError(f"unknown net policy {self.net_policy!r}")
        if self.net_policy == "fixed" and self.net_eps is None:
            raise InputError("net policy 'fixed' requires net_eps")
        if any(not (0.0 < e < 1.0) for e in self.eps_grid):
            raise InputError("eps grid entries must lie in (0,1)")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        unknown = set(data) - set(_CONFIG_FIELDS)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        for key, value in data.items():
            if not isinstance(value, _CONFIG_FIELDS[key]):
                raise InputError(f"config key {key!r} has wrong type {type(value).__name__}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["d_grid"] = list(self.d_grid)
        out["eps_grid"] = list(self.eps_grid)
        out["n_grid"] = list(self.n_grid) if self.n_grid is not None else None
        return out


def instance_for(cfg: SweepConfig, d: int) -> SCOInstance:
    spec = dict(cfg.instance)
    if cfg.family == "coin":
        if d != 1:
            raise InputError("the coin family is one-dimensional")
        return make_coin_instance(spec["eps0"])
    if cfg.family == "hard":
        if "m_by_d" in spec:
            m = int(spec["m_by_d"][str(d)])
        else:
            m = int(spec["m"])
        seed = spec.get("seed", derived_seed(cfg.master_seed, 0x1257, d))
        return make_hard_instance(d, spec["eps0"], m, seed)
    if cfg.family == "quadratic":
        ball_spec = spec.get("ball", {"family": "l2", "dim": d})
        ball = NormBall(ball_spec["family"], ball_spec["dim"], ball_spec.get("p"))
        if ball.dim != d:
            raise InputError(f"quadratic ball dim {ball.dim} does not match grid d={d}")
        return make_quadratic_instance(spec["centers"], ball)
    return instance_from_descriptor({"family": cfg.family, "params": spec})


def _cell_net(cfg: SweepConfig, ball: NormBall, eps: float) -> Net | None:
    if cfg.net_policy == "none":
        return None
    separation = (eps / 6.0) if cfg.net_policy == "third" else float(cfg.net_eps)
    return build_net(
        ball,
        separation,
        candidate_budget=cfg.net_budget,
        seed=derived_seed(cfg.master_seed, 0x4E7),
        size_cap=cfg.net_cap,
    )


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class TrialRecord:
    d: int
    eps: float
    n: int
    trial: int
    seed: int
    pop_excess: float
    failure: bool
    wall_time: float = 0.0  # in-memory only; excluded from serialized reports


@dataclass(frozen=True)
class CellResult:
    d: int
    eps: float
    n: int
    trials: int
    failures: int
    freq: float | None
    ci_lo: float | None
    ci_hi: float | None
    n0_theorem: int
    net_radius: float | None = None
    claim_violations: int = 0
    skipped: bool = False
    skip_reason: str = ""


@dataclass(frozen=True)
class ThresholdResult:
    d: int
    eps: float
    target: float
    n_star: int | None
    resolved: bool
    lo: int
    hi: int | None
    probed: tuple  # ((n, freq, smoothed_freq), ...)


@dataclass
class SweepResult:
    config: dict
    cells: list = field(default_factory=list)
    trial_records: list = field(default_factory=list)
    thresholds: list = field(default_factory=list)
    uc_thresholds: list = field(default_factory=list)
    scaling_fits: list = field(default_factory=list)
    claim_violations: int = 0
    schema_version: int = SCHEMA_VERSION


class _CellRunner:
    """Evaluates one (d, eps) column of a sweep with shared per-d state."""

    def __init__(self, cfg: SweepConfig, d: int, eps: float, eps_idx: int):
        self.cfg = cfg
        self.d = d
        self.eps = eps
        self.eps_idx = eps_idx
        self.inst = instance_for(cfg, d)
        self.xstar = population_minimizer(self.inst, cfg.solver_tol).point
        self.net = None
        self.net_error = None
        try:
            self.net = _cell_net(cfg, self.inst.ball, eps)
        except SizingError as exc:
            self.net_error = str(exc)
        self.cert = None
        if cfg.check_claims:
            self.cert = build_certificate(self.inst, self.xstar, tol=1e-8, net=self.net)
        self.threshold_excess = cfg.multiplier * eps
        self.pop_star = float(population_loss_many(self.inst, self.xstar[None, :])[0])

    def n0(self, n_fallback: int = 0) -> int:
        try:
            return sample_size_bound(self.d, self.eps)
        except InputError:
            return n_fallback

    def run_cell(self, n: int) -> tuple[CellResult, list[TrialRecord]]:
        cfg = self.cfg
        if self.net_error is not None and cfg.net_policy != "none":
            cell = CellResult(
                d=self.d, eps=self.eps, n=n, trials=0, failures=0,
                freq=None, ci_lo=None, ci_hi=None,
                n0_theorem=self.n0(), skipped=True, skip_reason=self.net_error,
            )
            return cell, []
        failures = 0
        violations = 0
        records: list[TrialRecord] = []
        for t in range(cfg.trials):
            started = time.perf_counter()
            seed = derived_seed(cfg.master_seed, self.d, self.eps_idx, n, t)
            sample = draw_sample(self.inst, n, seed)
            xhat = minimize_empirical(self.inst, sample, cfg.solver_tol).point
            candidates = near_erm_candidates(self.inst, sample, self.net, xhat, self.xstar)
            emp = empirical_loss_many(self.inst, sample, candidates)
            threshold = emp[-1] + self.eps  # last candidate is xstar
            eligible = np.nonzero(emp <= threshold)[0]
            pop = population_loss_many(self.inst, candidates[eligible])
            excess = float(pop.max() - self.pop_star)
            failed = excess > self.threshold_excess
            failures += int(failed)
            if self.cert is not None:
                net_radius = self.net.radius if self.net is not None else None
                violations += len(
                    check_conditional_claims(
                        self.cert, self.inst, sample, candidates, self.eps, net_radius
                    )
                )
            records.append(
                TrialRecord(
                    d=self.d, eps=self.eps, n=n, trial=t, seed=seed,
                    pop_excess=excess, failure=bool(failed),
                    wall_time=time.perf_counter() - started,
                )
            )
        freq = failures / cfg.trials
        ci_lo, ci_hi = wilson_interval(failures, cfg.trials)
        cell = CellResult(
            d=self.d, eps=self.eps, n=n, trials=cfg.trials, failures=failures,
            freq=freq, ci_lo=ci_lo, ci_hi=ci_hi, n0_theorem=self.n0(),
            net_radius=self.net.radius if self.net is not None else None,
            claim_violations=violations,
        )
        return cell, records


def failure_probability(
    cfg: SweepConfig, d: int, eps: float, n: int, eps_idx: int = 0
) -> CellResult:
    """Failure frequency of the worst-near-ERM event at one grid cell.

    A trial fails when the worst near-ERM's population excess exceeds
    multiplier * eps.  Frequencies come with a 95% Wilson interval; cells
    whose net cannot be built under the size cap are returned skipped with
    the sizing message.
    """
    runner = _CellRunner(cfg, d, eps, eps_idx)
    cell, _ = runner.run_cell(n)
    return cell


def _threshold_search(
    probe, target: float, n_min: int, n_max: int
) -> tuple[int | None, bool, int, int | None, list]:
    """Doubling then bisection on a noisy nonincreasing frequency curve.

    probe(n) returns a failure frequency; measured values are smoothed
    isotonically (nonincreasing in n) before every decision, and the final
    answer is the smallest probed n whose smoothed frequency meets target.
    """
    measured: dict[int, float] = {}

    def freq(n: int) -> None:
        if n not in measured:
            measured[n] = probe(n)

    def smoothed() -> dict[int, float]:
        ns = sorted(measured)
        fit = isotonic_nonincreasing([measured[n] for n in ns])
        return dict(zip(ns, fit))

    n = n_min
    freq(n)
    while smoothed()[n] > target:
        if n >= n_max:
            ns = sorted(measured)
            fit = smoothed()
            probed = [(k, measured[k], fit[k]) for k in ns]
            return None, False, n, None, probed
        n = min(2 * n, n_max)
        freq(n)
    passing = [k for k, v in smoothed().items() if v <= target]
    hi = min(passing)
    lo = max([k for k in measured if k < hi], default=n_min - 1)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        freq(mid)
        if smoothed()[mid] <= target:
            hi = mid
        else:
            lo = mid
    fit = smoothed()
    ns = sorted(measured)
    probed = [(k, measured[k], fit[k]) for k in ns]
    winners = [k for k in ns if fit[k] <= target]
    n_star = min(winners)
    return n_star, True, lo, hi, probed


def sample_threshold(
    cfg: SweepConfig, d: int, eps: float, eps_idx: int = 0, target: float | None = None
) -> tuple[ThresholdResult, list[CellResult], list[TrialRecord]]:
    """Smallest probed n whose (smoothed) failure frequency meets the target."""
    if target is None:
        target = cfg.target
    runner = _CellRunner(cfg, d, eps, eps_idx)
    cells: list[CellResult] = []
    all_records: list[TrialRecord] = []

    def probe(n: int) -> float:
        cell, records = runner.run_cell(n)
        if cell.skipped:
            raise SizingError(cell.skip_reason)
        cells.append(cell)
        all_records.extend(records)
        return cell.freq

    n_star, resolved, lo, hi, probed = _threshold_search(probe, target, cfg.n_min, cfg.n_max)
    result = ThresholdResult(
        d=d, eps=eps, target=target, n_star=n_star, resolved=resolved,
        lo=lo, hi=hi, probed=tuple(probed),
    )
    return result, cells, all_records


def uniform_convergence_threshold(
    inst: SCOInstance,
    eps: float,
    points: np.ndarray,
    trials: int,
    master_seed: int,
    n_min: int = 1,
    n_max: int = 1 << 20,
    target: float = 0.25,
) -> ThresholdResult:
    """Smallest probed n with max-over-points |F_hat - F| <= eps in >= 1-target of trials.

    points is the evaluation set: a net's points, or a family's structured
    directions when a covering net is out of reach.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    pop = population_loss_many(inst, points)

    def probe(n: int) -> float:
        bad = 0
        for t in range(trials):
            seed = derived_seed(master_seed, 0xAC, n, t)
            sample = draw_sample(inst, n, seed)
            emp = empirical_loss_many(inst, sample, points)
            if float(np.abs(emp - pop).max()) > eps:
                bad += 1
        return bad / trials

    n_star, resolved, lo, hi, probed = _threshold_search(probe, target, n_min, n_max)
    return ThresholdResult(
        d=inst.ball.dim, eps=eps, target=target, n_star=n_star, resolved=resolved,
        lo=lo, hi=hi, probed=tuple(probed),
    )


def fit_scaling(xs, n_stars) -> tuple[float, float, float]:
    """Least-squares power-law fit: log n* against log x.

    Returns (exponent, intercept, rms_residual).  Unresolved thresholds must
    be filtered out by the caller; fewer than three points is an error.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(n_stars, dtype=float)
    if xs.shape[0] != ys.shape[0]:
        raise InputError("xs and n_stars must have equal length")
    if xs.shape[0] < 3:
        raise InputError("need at least 3 resolved thresholds to fit a scaling law")
    lx, ly = np.log(xs), np.log(ys)
    design = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ np.array([slope, intercept])
    return float(slope), float(intercept), float(np.sqrt((resid**2).mean()))


def _auto_scaling_fits(thresholds: list) -> list[dict]:
    # fit whatever power laws the resolved thresholds support: n* against d
    # at fixed eps, and n* against 1/eps at fixed d
    fits: list[dict] = []
    resolved = [t for t in thresholds if t.resolved]
    by_eps: dict[float, list] = {}
    by_d: dict[int, list] = {}
    for t in resolved:
        by_eps.setdefault(t.eps, []).append(t)
        by_d.setdefault(t.d, []).append(t)
    for eps, ts in sorted(by_eps.items()):
        ts = sorted(ts, key=lambda t: t.d)
        if len({t.d for t in ts}) >= 3:
            exponent, intercept, residual = fit_scaling(
                [t.d for t in ts], [t.n_star for t in ts]
            )
            fits.append({
                "axis": "d", "fixed": eps,
                "points": [[t.d, t.n_star] for t in ts],
                "exponent": exponent, "intercept": intercept, "residual": residual,
            })
    for d, ts in sorted(by_d.items()):
        ts = sorted(ts, key=lambda t: t.eps, reverse=True)
        if len({t.eps for t in ts}) >= 3:
            exponent, intercept, residual = fit_scaling(
                [1.0 / t.eps for t in ts], [t.n_star for t in ts]
            )
            fits.append({
                "axis": "inv_eps", "fixed": d,
                "points": [[1.0 / t.eps, t.n_star] for t in ts],
                "exponent": exponent, "intercept": intercept, "residual": residual,
            })
    return fits


# ---------------------------------------------------------------------------
# the full sweep


def _run_column(payload: tuple) -> tuple:
    """One (d, eps) column of a sweep; standalone so worker pools can run it."""
    cfg_dict, d, eps_idx = payload
    cfg = SweepConfig.from_dict(cfg_dict)
    eps = cfg.eps_grid[eps_idx]
    cells: list[CellResult] = []
    records: list[TrialRecord] = []
    threshold = None
    if cfg.n_grid is not None:
        runner = _CellRunner(cfg, d, eps, eps_idx)
        for n in cfg.n_grid:
            cell, cell_records = runner.run_cell(n)
            cells.append(cell)
            if cfg.record_trials:
                records.extend(cell_records)
    else:
        threshold, cells, all_records = sample_threshold(cfg, d, eps, eps_idx)
        if cfg.record_trials:
            records = all_records
    uc = None
    if cfg.uc_enabled:
        inst = instance_for(cfg, d)
        if cfg.net_policy != "none":
            points = _cell_net(cfg, inst.ball, eps).points
        else:
            points = inst.meta.get("directions")
            if points is None:
                raise InputError(
                    "uniform-convergence thresholds need a net or structured directions"
                )
        uc_eps = cfg.uc_eps if cfg.uc_eps is not None else cfg.multiplier * eps
        uc = uniform_convergence_threshold(
            inst, uc_eps, points,
            trials=cfg.uc_trials or cfg.trials,
            master_seed=derived_seed(cfg.master_seed, 0xAC0, d, eps_idx),
            n_min=cfg.n_min,
        )
    return cells, records, threshold, uc


def run_sweep(cfg: SweepConfig, jobs: int = 1) -> SweepResult:
    """Execute every cell of the configuration; pure in (config, master seed).

    Columns (one per grid point of (d, eps)) are independent jobs; with
    jobs > 1 they run on a process pool.  Assembly is order-independent, so
    the result is byte-identical however the work is scheduled.
    """
    payloads = [
        (cfg.to_dict(), d, eps_idx)
        for d in cfg.d_grid
        for eps_idx in range(len(cfg.eps_grid))
    ]
    if jobs > 1 and len(payloads) > 1:
        import multiprocessing

        with multiprocessing.Pool(min(jobs, len(payloads))) as pool:
            columns = pool.map(_run_column, payloads)
    else:
        columns = [_run_column(p) for p in payloads]
    result = SweepResult(config=cfg.to_dict())
    for cells, records, threshold, uc in columns:
        result.cells.extend(cells)
        result.trial_records.extend(records)
        result.claim_violations += sum(c.claim_violations for c in cells)
        if threshold is not None:
            result.thresholds.append(threshold)
        if uc is not None:
            result.uc_thresholds.append(uc)
    result.cells.sort(key=lambda c: (c.d, c.eps, c.n))
    result.trial_records.sort(key=lambda r: (r.d, r.eps, r.n, r.trial))
    result.scaling_fits = _auto_scaling_fits(result.thresholds)
    return result


# ---------------------------------------------------------------------------
# serialization and reports

CSV_HEADER = ["d", "eps", "n", "trials", "failures", "freq", "ci_lo", "ci_hi", "n0_theorem"]


def _trial_dict(record: TrialRecord) -> dict:
    out = asdict(record)
    out.pop("wall_time")  # timing is not reproducible; keep serialized output pure
    return out


def sweep_result_to_dict(result: SweepResult) -> dict:
    return {
        "schema_version": result.schema_version,
        "config": result.config,
        "cells": [asdict(c) for c in result.cells],
        "trial_records": [_trial_dict(r) for r in result.trial_records],
        "thresholds": [asdict(t) for t in result.thresholds],
        "uc_thresholds": [asdict(t) for t in result.uc_thresholds],
        "scaling_fits": result.scaling_fits,
        "claim_violations": result.claim_violations,
    }


def sweep_result_from_dict(data: dict) -> SweepResult:
    def _threshold(t: dict) -> ThresholdResult:
        t = dict(t)
        t["probed"] = tuple(tuple(p) for p in t["probed"])
        return ThresholdResult(**t)

    return SweepResult(
        config=data["config"],
        cells=[CellResult(**c) for c in data["cells"]],
        trial_records=[TrialRecord(**r) for r in data["trial_records"]],
        thresholds=[_threshold(t) for t in data["thresholds"]],
        uc_thresholds=[_threshold(t) for t in data["uc_thresholds"]],
        scaling_fits=data.get("scaling_fits", []),
        claim_violations=data["claim_violations"],
        schema_version=data["schema_version"],
    )


def _render_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for c in result.cells:
        if c.skipped:
            continue
        writer.writerow(
            [c.d, repr(c.eps), c.n, c.trials, c.failures,
             repr(c.freq), repr(c.ci_lo), repr(c.ci_hi), c.n0_theorem]
        )
    return buf.getvalue()


def _render_plot(result: SweepResult, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "scolab"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    resolved = [t for t in result.thresholds if t.resolved]
    if resolved:
        ds = [t.d for t in resolved]
        ns = [t.n_star for t in resolved]
        ax.loglog(ds, ns, "o-", label="measured threshold")
        eps = resolved[0].eps
        try:
            overlay = [sample_size_bound(d, eps) for d in ds]
            ax.loglog(ds, overlay, "s--", label="formula bound")
        except InputError:
            pass
        if result.uc_thresholds:
            uc = [t for t in result.uc_thresholds if t.resolved]
            if uc:
                ax.loglog([t.d for t in uc], [t.n_star for t in uc], "^:",
                          label="uniform convergence")
        ax.set_xlabel("dimension d")
        ax.set_ylabel("sample threshold n*")
    else:
        for key in sorted({(c.d, c.eps) for c in result.cells if not c.skipped}):
            cells = [c for c in result.cells if (c.d, c.eps) == key and not c.skipped]
            cells.sort(key=lambda c: c.n)
            ax.semilogx([c.n for c in cells], [c.freq for c in cells], "o-",
                        label=f"d={key[0]}, eps={key[1]:g}")
        ax.set_xlabel("sample size n")
        ax.set_ylabel("failure frequency")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(result: SweepResult, out_dir: str | Path) -> dict:
    """Write results.json, results.csv and plots.svg under out_dir.

    Refuses empty results before touching the filesystem, so a failed call
    never leaves partial files behind.
    """
    if not result.cells and not result.thresholds:
        raise InputError("refusing to emit a report for an empty sweep result")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_text = json.dumps(sweep_result_to_dict(result), sort_keys=True, separators=(",", ":"))
    (out / "results.json").write_text(json_text)
    (out / "results.csv").write_text(_render_csv(result))
    _render_plot(result, out / "plots.svg")
    return {
        "results_json": str(out / "results.json"),
        "results_csv": str(out / "results.csv"),
        "plots_svg": str(out / "plots.svg"),
    }


def load_sweep_result(path: str | Path) -> SweepResult:
    return sweep_result_from_dict(json.loads(Path(path).read_text()))
