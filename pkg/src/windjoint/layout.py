"""First-stage layout problem: AEP objective, spacing penalty, repair and PSO."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .control import ControlSolveOptions, optimize_controls_all_scenarios
from .scenarios import (
    HOURS_PER_YEAR, ControlPlan, OptimizationReport, WindRose, annual_energy_gwh, scenario_powers,
)
from .wake import FarmSpec, Layout, farm_power_batch

logger = logging.getLogger(__name__)

# role tags for deriving independent random streams from one seed
ROLE_PSO = 1
ROLE_CONTROL = 2
ROLE_DBHM = 3


@dataclass
class LayoutProblem:
    """Everything that defines the AEP objective and its feasible set.

    Parameters
    ----------
    spec : FarmSpec
        Turbine, wake and site parameters.
    rose : WindRose
        Wind scenarios and their probabilities.
    hours_per_year : float
        ``T`` in the AEP definition.
    policy : {"greedy", "optimized"}
        Control policy assumed when a layout is scored.
    penalty_factor : float
        Weight of the spacing penalty, per square metre of shortfall.
    movable : list of str, optional
        Per turbine, which coordinates may move (``"xy"``, ``"x"``, ``"y"``
        or ``""``).  ``None`` frees every coordinate.
    """

    spec: FarmSpec
    rose: WindRose
    hours_per_year: float = HOURS_PER_YEAR
    policy: str = "greedy"
    penalty_factor: float = 1e5
    movable: list | None = None
    control_options: ControlSolveOptions = field(default_factory=ControlSolveOptions)
    threads: int = 1

    def __post_init__(self):
        if not self.hours_per_year > 0:
            raise ValueError("hours_per_year must be positive")
        if not self.penalty_factor > 0:
            raise ValueError("penalty_factor must be positive")
        if self.policy not in ("greedy", "optimized"):
            raise ValueError(f"unknown control policy {self.policy!r}")
        if self.movable is not None:
            for m in self.movable:
                if m not in ("xy", "x", "y", ""):
                    raise ValueError(f"invalid movable entry {m!r}")

    def free_mask(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Boolean masks of which x and y coordinates may move."""
        if self.movable is None:
            return np.ones(n, bool), np.ones(n, bool)
        if len(self.movable) != n:
            raise ValueError(f"movable has {len(self.movable)} entries for {n} turbines")
        return (np.array(["x" in m for m in self.movable]),
                np.array(["y" in m for m in self.movable]))


def aep(layout: Layout, plan_or_policy, problem: LayoutProblem) -> float:
    """Annual energy production in GWh.

    ``plan_or_policy`` is a :class:`ControlPlan`, ``"greedy"`` or
    ``"optimized"`` (controls re-optimized per scenario).
    """
    n = len(layout)
    if isinstance(plan_or_policy, ControlPlan):
        plan = plan_or_policy
    elif plan_or_policy == "greedy":
        plan = ControlPlan.greedy(problem.rose.n_scenarios, n)
    elif plan_or_policy == "optimized":
        plan, _ = optimize_controls_all_scenarios(
            layout, problem.rose, problem.spec, problem.control_options, threads=problem.threads)
    else:
        raise ValueError(f"unknown control policy {plan_or_policy!r}")
    return annual_energy_gwh(layout, plan, problem.rose, problem.spec, problem.hours_per_year)


def spacing_penalty(layout: Layout, spec: FarmSpec, penalty_factor: float = 1e5) -> float:
    """``PF * sum over unordered pairs of max(L^2 - d_ij^2, 0)``."""
    return float(spacing_penalty_batch(layout.x, layout.y, spec.min_spacing, penalty_factor))


def spacing_penalty_batch(x, y, min_spacing: float, penalty_factor: float):
    """Vectorised spacing penalty over leading batch axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    i, j = np.triu_indices(n, k=1)
    d2 = (x[..., i] - x[..., j]) ** 2 + (y[..., i] - y[..., j]) ** 2
    return penalty_factor * np.maximum(min_spacing**2 - d2, 0.0).sum(axis=-1)


def spacing_penalty_gradient(x, y, min_spacing: float, penalty_factor: float):
    """Gradient of :func:`spacing_penalty_batch` for a single layout."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    active = (min_spacing**2 - dx**2 - dy**2) > 0
    np.fill_diagonal(active, False)
    gx = -2.0 * penalty_factor * np.sum(np.where(active, dx, 0.0), axis=1)
    gy = -2.0 * penalty_factor * np.sum(np.where(active, dy, 0.0), axis=1)
    return gx, gy


def min_pair_distance(layout: Layout) -> float:
    if len(layout) < 2:
        return math.inf
    i, j = np.triu_indices(len(layout), k=1)
    return float(np.min(np.hypot(layout.x[i] - layout.x[j], layout.y[i] - layout.y[j])))


def is_feasible(layout: Layout, spec: FarmSpec) -> bool:
    """Spacing and site-bound constraints hold exactly."""
    (xl, xu), (yl, yu) = spec.site_bounds
    inside = (np.all(layout.x >= xl) and np.all(layout.x <= xu)
              and np.all(layout.y >= yl) and np.all(layout.y <= yu))
    return bool(inside and min_pair_distance(layout) >= spec.min_spacing)


def repair_layout(layout: Layout, spec: FarmSpec, movable=None, max_passes: int = 1000,
                  overshoot: float = 1e-3) -> Layout:
    """Restore exact feasibility with small, deterministic moves.

    Coordinates are first clipped to the site.  Then, repeatedly, the closest
    violating pair is pushed apart along the line joining it until every pair
    is at least ``min_spacing`` apart.  Each push overshoots by the relative
    margin ``overshoot``; crowded layouts that still jam are retried with a
    10x and 30x larger margin.  Fixed coordinates (per ``movable``) never move.

    Raises
    ------
    RuntimeError
        If feasibility is not reached within ``max_passes`` passes.
    """
    error = None
    for margin in (overshoot, 10 * overshoot, 30 * overshoot):
        try:
            return _repair_once(layout, spec, movable, max_passes, margin)
        except RuntimeError as exc:
            error = exc
    raise error


def _repair_once(layout: Layout, spec: FarmSpec, movable, max_passes: int, overshoot: float):
    (xl, xu), (yl, yu) = spec.site_bounds
    x = np.clip(layout.x.astype(float), xl, xu)
    y = np.clip(layout.y.astype(float), yl, yu)
    n = len(x)
    if movable is None:
        fx, fy = np.ones(n, bool), np.ones(n, bool)
    else:
        fx = np.array(["x" in m for m in movable])
        fy = np.array(["y" in m for m in movable])
    L = spec.min_spacing
    # a small overshoot keeps crowded layouts from creeping towards L forever
    target = L * (1.0 + overshoot) + 1e-9
    if n < 2 or L == 0:
        return Layout(x, y)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_passes):
        d = np.hypot(x[iu] - x[ju], y[iu] - y[ju])
        bad = d < L
        if not bad.any():
            return Layout(x, y)
        k = int(np.argmin(np.where(bad, d, np.inf)))
        i, j = iu[k], ju[k]
        if d[k] > 1e-9:
            ux, uy = (x[j] - x[i]) / d[k], (y[j] - y[i]) / d[k]
        else:
            # coincident turbines: a deterministic direction that differs per pair
            ang = 2.399963229728653 * (i * n + j)
            ux, uy = np.cos(ang), np.sin(ang)

        def push(t, sx, sy):
            if fx[t]:
                x[t] = min(max(x[t] + sx, xl), xu)
            if fy[t]:
                y[t] = min(max(y[t] + sy, yl), yu)

        def gap():
            return target - np.hypot(x[i] - x[j], y[i] - y[j])

        half = 0.5 * gap()
        push(i, -half * ux, -half * uy)
        push(j, half * ux, half * uy)
        # a clipped or pinned partner leaves a remainder for the other turbine
        for t, sign in ((j, 1.0), (i, -1.0)):
            rest = gap()
            if rest <= 0:
                break
            push(t, sign * rest * ux, sign * rest * uy)
        if np.hypot(x[i] - x[j], y[i] - y[j]) <= d[k] + 1e-12:
            # no progress along the joining line: slide one free coordinate
            # sideways, towards the side of the site with more room
            moves = [(t, axis, lo, hi)
                     for t in (j, i)
                     for axis, free, lo, hi in ((y, fy, yl, yu), (x, fx, xl, xu)) if free[t]]
            if not moves:
                break
            t, axis, lo, hi = moves[0]
            step = L if hi - axis[t] >= axis[t] - lo else -L
            axis[t] = min(max(axis[t] + step, lo), hi)
    d = np.hypot(x[iu] - x[ju], y[iu] - y[ju])
    if np.all(d >= L):
        return Layout(x, y)
    raise RuntimeError(f"feasibility repair failed after {max_passes} passes "
                       f"(closest pair {float(d.min()):.3f} m < {L} m)")


# -- particle swarm ------------------------------------------------------------


@dataclass(frozen=True)
class PsoOptions:
    """Constriction-coefficient particle swarm settings."""

    swarm_size: int = 50
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    iterations: int = 200
    restarts: int = 10
    velocity_fraction: float = 0.2

    def __post_init__(self):
        if self.swarm_size < 2 or self.iterations < 1 or self.restarts < 1:
            raise ValueError("swarm_size >= 2, iterations >= 1 and restarts >= 1 required")


@dataclass
class PsoResult:
    layout: Layout
    aep_gwh: float
    initial_aep_gwh: float
    trace: list
    restart_best: list


class _LayoutVector:
    """Maps the free coordinates of a layout to a flat vector and back."""

    def __init__(self, base: Layout, problem: LayoutProblem):
        n = len(base)
        self.n = n
        fx, fy = problem.free_mask(n)
        self.free = np.concatenate([fx, fy])
        self.base = np.concatenate([base.x, base.y])
        (xl, xu), (yl, yu) = problem.spec.site_bounds
        lo = np.concatenate([np.full(n, xl), np.full(n, yl)])
        hi = np.concatenate([np.full(n, xu), np.full(n, yu)])
        self.lo, self.hi = lo[self.free], hi[self.free]

    @property
    def dim(self) -> int:
        return int(self.free.sum())

    def full(self, z):
        z = np.asarray(z, dtype=float)
        out = np.broadcast_to(self.base, z.shape[:-1] + self.base.shape).copy()
        out[..., self.free] = z
        return out[..., : self.n], out[..., self.n:]

    def reduce(self, layout: Layout):
        return np.concatenate([layout.x, layout.y])[self.free]


def _penalized_objective(problem: LayoutProblem, vec: _LayoutVector, batch_size: int = 64):
    """Return ``f(z) = -AEP[MWh] + penalty`` for a batch of particle vectors."""
    rose, spec = problem.rose, problem.spec
    probs = rose.probabilities
    to_mwh = problem.hours_per_year / 1e6

    def f(z):
        x, y = vec.full(z)
        out = np.empty(x.shape[0])
        for s in range(0, x.shape[0], batch_size):
            xb, yb = x[s:s + batch_size], y[s:s + batch_size]
            if problem.policy == "greedy":
                n = xb.shape[-1]
                p = farm_power_batch(xb[:, None, :], yb[:, None, :], np.zeros(n), np.full(n, 1 / 3),
                                     rose.directions_deg, rose.speed, spec)
                energy = to_mwh * (p @ probs)
            else:
                energy = np.array([
                    1e3 * aep(Layout(xi, yi), "optimized", problem) for xi, yi in zip(xb, yb)
                ])
            out[s:s + batch_size] = -energy + spacing_penalty_batch(
                xb, yb, spec.min_spacing, problem.penalty_factor)
        return out

    return f


def pso_layout(problem: LayoutProblem, initial: Layout, options: PsoOptions | None = None,
               seed: int = 0) -> PsoResult:
    """Penalty-based particle swarm search over turbine coordinates.

    Every restart seeds one particle at ``initial``.  The best penalized
    particle is repaired to exact feasibility; if its AEP falls below the
    (repaired) initial layout's, the initial layout is returned instead.
    """
    options = options or PsoOptions()
    vec = _LayoutVector(initial, problem)
    f = _penalized_objective(problem, vec)
    z_init = vec.reduce(initial)
    trace = []
    restart_best = []
    best_z, best_f = z_init.copy(), float(f(z_init[None])[0])
    dim = vec.dim
    if dim > 0:
        vmax = options.velocity_fraction * (vec.hi - vec.lo)
        for r in range(options.restarts):
            rng = np.random.default_rng([seed, ROLE_PSO, r])
            pos = rng.uniform(vec.lo, vec.hi, size=(options.swarm_size, dim))
            pos[0] = z_init
            vel = rng.uniform(-vmax, vmax, size=pos.shape)
            val = f(pos)
            pbest, pval = pos.copy(), val.copy()
            g = int(np.argmin(pval))
            gbest, gval = pbest[g].copy(), float(pval[g])
            for it in range(options.iterations):
                r1 = rng.random(pos.shape)
                r2 = rng.random(pos.shape)
                vel = (options.inertia * vel + options.cognitive * r1 * (pbest - pos)
                       + options.social * r2 * (gbest - pos))
                vel = np.clip(vel, -vmax, vmax)
                pos = np.clip(pos + vel, vec.lo, vec.hi)
                val = f(pos)
                better = val < pval
                pbest[better], pval[better] = pos[better], val[better]
                g = int(np.argmin(pval))
                if pval[g] < gval:
                    gbest, gval = pbest[g].copy(), float(pval[g])
                trace.append({"restart": r, "iteration": it, "best_objective": gval})
            restart_best.append(gval)
            logger.info("pso restart %d: best penalized objective %.6g", r, gval)
            if gval < best_f:
                best_z, best_f = gbest, gval

    bx, by = vec.full(best_z)
    start = repair_layout(initial, problem.spec, problem.movable)
    policy = problem.policy
    start_aep = aep(start, policy, problem)
    try:
        candidate = repair_layout(Layout(bx, by), problem.spec, problem.movable)
        cand_aep = aep(candidate, policy, problem)
    except RuntimeError as exc:
        logger.warning("repair of the best particle failed (%s); keeping the initial layout", exc)
        cand_aep = -np.inf
    if cand_aep < start_aep:
        candidate, cand_aep = start, start_aep
    return PsoResult(candidate, cand_aep, start_aep, trace, restart_best)


# -- reports and pipelines -----------------------------------------------------


def build_report(layout: Layout, plan: ControlPlan, problem: LayoutProblem, *, mode: str,
                 traces: dict | None = None, extra: dict | None = None,
                 wall_clock_seconds: float | None = None) -> OptimizationReport:
    """Assemble a report whose AEP is recomputed exactly from layout and plan."""
    plan.validate(problem.spec)
    powers = scenario_powers(layout, plan, problem.rose, problem.spec)
    aep_gwh = annual_energy_gwh(layout, plan, problem.rose, problem.spec, problem.hours_per_year)
    metadata = {
        "mode": mode,
        "spec": problem.spec.to_dict(),
        "rose": problem.rose.to_dict(),
        "hours_per_year": problem.hours_per_year,
        "penalty_factor": problem.penalty_factor,
        "movable": problem.movable,
        "feasible": is_feasible(layout, problem.spec),
        "min_pair_distance_m": min_pair_distance(layout) if len(layout) > 1 else None,
    }
    metadata.update(extra or {})
    return OptimizationReport(
        layout=layout.copy(), plan=plan, aep_gwh=aep_gwh,
        scenario_power_mw=(powers / 1e6).tolist(), traces=traces or {},
        wall_clock_seconds=wall_clock_seconds, metadata=metadata,
    )


def control_only(problem: LayoutProblem, layout: Layout, seed: int = 0) -> OptimizationReport:
    """Keep the layout, optimize controls in every scenario."""
    t0 = time.perf_counter()
    opts = _seeded(problem.control_options, seed)
    plan, _ = optimize_controls_all_scenarios(layout, problem.rose, problem.spec, opts,
                                             threads=problem.threads)
    greedy = aep(layout, "greedy", problem)
    return build_report(layout, plan, problem, mode="control-only", extra={
        "seed": seed, "greedy_aep_gwh": greedy,
    }, wall_clock_seconds=time.perf_counter() - t0)


def _seeded(options: ControlSolveOptions, seed: int) -> ControlSolveOptions:
    # control multistarts get their own stream, distinct from the PSO one
    return replace(options, seed=int(np.random.SeedSequence([seed, ROLE_CONTROL]).generate_state(1)[0]))


def sequential_optimize(problem: LayoutProblem, initial: Layout, seed: int = 0,
                        pso_options: PsoOptions | None = None) -> OptimizationReport:
    """Layout search under greedy control, then per-scenario control optimization."""
    t0 = time.perf_counter()
    greedy_problem = replace(problem, policy="greedy")
    stage1 = pso_layout(greedy_problem, initial, pso_options, seed)
    opts = _seeded(problem.control_options, seed)
    plan, _ = optimize_controls_all_scenarios(stage1.layout, problem.rose, problem.spec, opts,
                                             threads=problem.threads)
    traces = {"pso": stage1.trace, "pso_restart_best": stage1.restart_best}
    return build_report(stage1.layout, plan, problem, mode="sequential", traces=traces, extra={
        "seed": seed,
        "layout_only_aep_gwh": stage1.aep_gwh,
        "initial_greedy_aep_gwh": stage1.initial_aep_gwh,
    }, wall_clock_seconds=time.perf_counter() - t0)


def layout_only(problem: LayoutProblem, initial: Layout, seed: int = 0,
                pso_options: PsoOptions | None = None) -> OptimizationReport:
    """Layout search under greedy control; the report keeps greedy controls."""
    t0 = time.perf_counter()
    stage1 = pso_layout(replace(problem, policy="greedy"), initial, pso_options, seed)
    plan = ControlPlan.greedy(problem.rose.n_scenarios, len(initial))
    return build_report(stage1.layout, plan, problem, mode="pso", traces={
        "pso": stage1.trace, "pso_restart_best": stage1.restart_best,
    }, extra={"seed": seed, "initial_greedy_aep_gwh": stage1.initial_aep_gwh},
        wall_clock_seconds=time.perf_counter() - t0)
