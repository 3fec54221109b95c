"""Experiment harness: integral matching, equivalence trials, sweeps and
simulation-in-the-loop kernel parameter optimization.

The equivalence trial reports the raw triple (influence-integral
difference, performance difference, phase distance) rather than asserting
a tolerance: whether equal-influence kernels really perform alike is the
hypothesis under test, not a package invariant.  Optimization is
derivative-free -- a low-discrepancy grid pass followed by a bounded
Nelder-Mead refinement -- because the objective is a simulation output
with plateaus from step quantization.
"""

from __future__ import annotations

import itertools
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import qmc

from . import engine, kernels
from .errors import MatchIntegralError, ValidationError

#: Multiplier applied to the objective of kernels whose influence integral
#: diverges; keeps the search inside admissible families without making
#: the objective non-finite.
DIVERGENT_PENALTY = 10.0


@dataclass(frozen=True)
class EquivalenceReport:
    """Raw quantities behind the equal-influence comparison of two kernels."""

    integral_1: float
    integral_2: float
    integral_rel_diff: float
    eta_1: float
    eta_2: float
    eta_rel_diff: float
    phase_distance: float
    seeds_used: int


@dataclass
class OptimizationResult:
    family: str
    best_params: dict[str, float]
    best_eta: float
    evaluations: int
    trace: list[tuple[dict[str, float], float]]


def match_integral(
    family: str,
    fixed: dict[str, float],
    target: float,
    dom: kernels.Domain2D,
    rel_tol: float = 0.005,
) -> kernels.KernelSpec:
    """Solve the family's one free scale parameter so the total influence
    hits the target within rel_tol, by bisection with an expanding bracket."""
    if target <= 0:
        raise ValidationError("match_integral: target must be > 0")
    if family not in kernels.SCALE_PARAMS:
        raise ValidationError(f"unknown kernel family {family!r}")
    free = [p for p in kernels.SCALE_PARAMS[family] if p not in fixed]
    if len(free) != 1:
        raise ValidationError(
            f"family {family!r} must have exactly one free scale parameter "
            f"given fixed={sorted(fixed)}; free={free}"
        )
    name = free[0]

    def influence(value: float) -> float:
        return kernels.total_influence(
            kernels.build_kernel(family, {**fixed, name: value}), dom
        )

    lo, hi = 1e-9, 1.0
    val_hi = influence(hi)
    doublings = 0
    while val_hi < target:
        doublings += 1
        if doublings > 200:
            raise MatchIntegralError(
                f"no bracket found for {name} in {family!r}", bracket=(lo, hi)
            )
        new_hi = hi * 2.0
        new_val = influence(new_hi)
        if new_val <= val_hi * (1.0 + 1e-12):
            # integral saturated (kernel already covers the domain)
            raise MatchIntegralError(
                f"target influence {target:g} unreachable for {family!r}: "
                f"integral saturates at {new_val:g} "
                f"(bracket {name} in [{hi:g}, {new_hi:g}])",
                bracket=(hi, new_hi),
            )
        hi, val_hi = new_hi, new_val

    for _ in range(500):
        mid = 0.5 * (lo + hi)
        val = influence(mid)
        if abs(val - target) / target < rel_tol:
            return kernels.build_kernel(family, {**fixed, name: mid})
        if val < target:
            lo = mid
        else:
            hi = mid
    raise MatchIntegralError(
        f"bisection did not reach tolerance {rel_tol} for {family!r} "
        f"(bracket {name} in [{lo:g}, {hi:g}]); the grid may be too coarse",
        bracket=(lo, hi),
    )


def _run_measures(args) -> tuple[float, float]:
    cfg, kernel, seed = args
    metrics, _ = engine.run(replace(cfg, kernel=kernel, seed=seed))
    return metrics.att, metrics.oscillation_index


def _measures_over_seeds(
    cfg: engine.ScenarioConfig,
    kernel: kernels.KernelSpec,
    seeds: list[int],
    jobs: int = 1,
) -> tuple[list[float], list[float]]:
    tasks = [(cfg, kernel, seed) for seed in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_measures, tasks))
    else:
        results = [_run_measures(task) for task in tasks]
    atts = [att for att, _ in results]
    oscillations = [osc for _, osc in results]
    return atts, oscillations


def mean_att(
    cfg: engine.ScenarioConfig,
    kernel: kernels.KernelSpec,
    seeds: list[int],
    jobs: int = 1,
) -> float:
    atts, _ = _measures_over_seeds(cfg, kernel, seeds, jobs)
    return sum(atts) / len(atts)


def equivalence_trial(
    base_cfg: engine.ScenarioConfig,
    k1: kernels.KernelSpec,
    k2: kernels.KernelSpec,
    seeds: list[int],
    dom: kernels.Domain2D,
    allow_divergent: bool = False,
    jobs: int = 1,
) -> EquivalenceReport:
    """Run the same scenario under two kernels and report the equivalence
    triple (integral difference, performance difference, phase distance)."""
    if not seeds:
        raise ValidationError("equivalence_trial: at least one seed is required")
    if not allow_divergent:
        for k in (k1, k2):
            if isinstance(k, kernels.SPATIALLY_UNIFORM):
                raise ValidationError(
                    f"kernel {k.family!r} has divergent total influence; "
                    "pass allow_divergent=True to compare it anyway"
                )
    # with allow_divergent the integrals are still the bounded-domain values
    integral_1 = kernels.total_influence(k1, dom)
    integral_2 = kernels.total_influence(k2, dom)
    eta_1 = mean_att(base_cfg, k1, seeds, jobs)
    eta_2 = mean_att(base_cfg, k2, seeds, jobs)
    top = max(integral_1, integral_2)
    integral_rel_diff = abs(integral_1 - integral_2) / top if top > 0 else 0.0
    mid = 0.5 * (eta_1 + eta_2)
    eta_rel_diff = (eta_1 - eta_2) / mid if mid > 0 else 0.0
    return EquivalenceReport(
        integral_1=integral_1,
        integral_2=integral_2,
        integral_rel_diff=integral_rel_diff,
        eta_1=eta_1,
        eta_2=eta_2,
        eta_rel_diff=eta_rel_diff,
        phase_distance=kernels.phase_distance(k1, k2, dom),
        seeds_used=len(seeds),
    )


@dataclass(frozen=True)
class SweepRow:
    params: dict[str, float]
    mean_att: float
    std_att: float
    mean_oscillation: float
    error: str | None = None


def sweep(
    base_cfg: engine.ScenarioConfig,
    family: str,
    grid: dict[str, list[float]],
    seeds: list[int],
    jobs: int = 1,
) -> list[SweepRow]:
    """Evaluate every grid point averaged over seeds; rows sorted by mean
    ATT ascending (failed rows last, flagged, never fatal)."""
    if not grid or not all(grid.values()):
        raise ValidationError("sweep: grid must be nonempty")
    if not seeds:
        raise ValidationError("sweep: at least one seed is required")
    names = list(grid)
    points = [dict(zip(names, combo)) for combo in itertools.product(*grid.values())]

    rows: list[SweepRow] = []
    for params in points:
        try:
            kernel = kernels.build_kernel(family, params)
            atts, oscillations = _measures_over_seeds(base_cfg, kernel, seeds, jobs)
            mean = sum(atts) / len(atts)
            var = sum((a - mean) ** 2 for a in atts) / len(atts)
            rows.append(
                SweepRow(
                    params=params,
                    mean_att=mean,
                    std_att=math.sqrt(var),
                    mean_oscillation=sum(oscillations) / len(oscillations),
                )
            )
        except Exception as exc:  # row flagged, sweep continues
            print(f"sweep: point {params} failed: {exc}", file=sys.stderr)
            rows.append(
                SweepRow(
                    params=params,
                    mean_att=math.nan,
                    std_att=math.nan,
                    mean_oscillation=math.nan,
                    error=str(exc),
                )
            )
    rows.sort(key=lambda r: (math.isnan(r.mean_att), r.mean_att))
    return rows


def optimize(
    base_cfg: engine.ScenarioConfig,
    family: str,
    bounds: dict[str, tuple[float, float]],
    budget: int,
    seeds: list[int],
    jobs: int = 1,
) -> OptimizationResult:
    """Minimize mean ATT over the family's parameter box.

    Spends half the budget on an unscrambled Halton point set over the
    box, then refines from the best point with a bounded Nelder-Mead
    simplex under a strict total-evaluation cap.  Divergent families are
    admissible but penalized.  Deterministic for fixed inputs.
    """
    if budget < 10:
        raise ValidationError("optimize: budget must be >= 10")
    if not bounds:
        raise ValidationError("optimize: bounds must be nonempty")
    if not seeds:
        raise ValidationError("optimize: at least one seed is required")
    for name, (lo, hi) in bounds.items():
        if not lo < hi:
            raise ValidationError(f"optimize: invalid bounds for {name!r}: [{lo}, {hi}]")
    names = list(bounds)
    lo = np.array([bounds[n][0] for n in names], dtype=float)
    hi = np.array([bounds[n][1] for n in names], dtype=float)

    trace: list[tuple[dict[str, float], float]] = []
    divergent = kernels.FAMILIES[family] in kernels.SPATIALLY_UNIFORM

    def objective(vector: np.ndarray) -> float:
        clipped = np.minimum(np.maximum(vector, lo), hi)
        params = {n: float(v) for n, v in zip(names, clipped)}
        kernel = kernels.build_kernel(family, params)
        att = mean_att(base_cfg, kernel, seeds, jobs)
        if math.isnan(att):
            eta = 1e18
        elif divergent:
            eta = att + DIVERGENT_PENALTY * att
        else:
            eta = att
        trace.append((params, eta))
        return eta

    n_grid = math.ceil(budget / 2)
    sampler = qmc.Halton(d=len(names), scramble=False)
    unit = sampler.random(n_grid)
    grid_points = lo + unit * (hi - lo)
    values = [objective(point) for point in grid_points]
    best_idx = int(np.argmin(values))
    best_x = grid_points[best_idx]

    remaining = budget - n_grid
    if remaining >= len(names) + 2:
        _nelder_mead(objective, best_x, lo, hi, remaining)

    best_params, best_eta = min(trace, key=lambda entry: entry[1])
    return OptimizationResult(
        family=family,
        best_params=best_params,
        best_eta=best_eta,
        evaluations=len(trace),
        trace=trace,
    )


def _nelder_mead(objective, x0, lo, hi, max_evals) -> None:
    """Bounded Nelder-Mead with a strict evaluation cap.

    Mutates nothing outside the objective (which records its own trace);
    standard reflection/expansion/contraction/shrink coefficients.
    """
    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    dim = len(x0)
    evals = [0]

    def f(x):
        evals[0] += 1
        return objective(np.minimum(np.maximum(x, lo), hi))

    simplex = [np.array(x0, dtype=float)]
    for i in range(dim):
        step = 0.1 * (hi[i] - lo[i])
        point = np.array(x0, dtype=float)
        point[i] = point[i] - step if point[i] + step > hi[i] else point[i] + step
        simplex.append(point)
    scores = []
    for point in simplex:
        if evals[0] >= max_evals:
            return
        scores.append(f(point))

    while evals[0] < max_evals:
        order = np.argsort(scores, kind="stable")
        simplex = [simplex[i] for i in order]
        scores = [scores[i] for i in order]
        if abs(scores[-1] - scores[0]) < 1e-12:
            return
        centroid = np.mean(simplex[:-1], axis=0)

        reflected = centroid + alpha * (centroid - simplex[-1])
        r_score = f(reflected)
        if scores[0] <= r_score < scores[-2]:
            simplex[-1], scores[-1] = reflected, r_score
            continue
        if r_score < scores[0]:
            if evals[0] >= max_evals:
                return
            expanded = centroid + gamma * (centroid - simplex[-1])
            e_score = f(expanded)
            if e_score < r_score:
                simplex[-1], scores[-1] = expanded, e_score
            else:
                simplex[-1], scores[-1] = reflected, r_score
            continue
        if evals[0] >= max_evals:
            return
        contracted = centroid + rho * (simplex[-1] - centroid)
        c_score = f(contracted)
        if c_score < scores[-1]:
            simplex[-1], scores[-1] = contracted, c_score
            continue
        for i in range(1, len(simplex)):
            if evals[0] >= max_evals:
                return
            simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
            scores[i] = f(simplex[i])
