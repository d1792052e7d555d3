"""Decomposition-based hybrid method: PSO warm start plus consensus ADMM.

Each wind scenario keeps its own copy of the turbine coordinates together
with its own controls.  Scenario subproblems trade scenario power against an
augmented-Lagrangian pull towards the shared layout; a closed-form averaging
step then updates the shared layout and dual ascent updates the multipliers.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .control import GREEDY_INDUCTION, optimize_controls_all_scenarios
from .layout import (
    LayoutProblem, PsoOptions, _seeded, build_report, pso_layout, repair_layout,
    spacing_penalty_batch, spacing_penalty_gradient,
)
from .scenarios import ControlPlan, OptimizationReport, annual_energy_gwh
from .wake import Layout, farm_power_batch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DbhmOptions:
    """Settings of the consensus iteration.

    ``mu`` weighs squared consensus violations in metres against scenario
    power in watts.
    """

    mu: float = 10.0
    tolerance: float = 10.0
    max_iterations: int = 100
    fix_alpha: bool = False
    subproblem_max_iterations: int = 200
    gradient: str = "autodiff"

    def __post_init__(self):
        if not self.mu > 0 or not self.tolerance > 0:
            raise ValueError("mu and tolerance must be positive")
        if self.max_iterations < 1 or self.subproblem_max_iterations < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.gradient not in ("fd", "autodiff"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")


@dataclass
class DbhmState:
    """Shared layout, per-scenario local copies, controls and multipliers.

    Per-scenario arrays have shape ``(n_scenarios, n_turbines)``.
    """

    x: np.ndarray
    y: np.ndarray
    x_local: np.ndarray
    y_local: np.ndarray
    lam_x: np.ndarray
    lam_y: np.ndarray
    yaw_deg: np.ndarray
    induction: np.ndarray
    mu: float = 10.0
    iteration: int = 0
    residuals: list = field(default_factory=list)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    @classmethod
    def initial(cls, layout: Layout, plan: ControlPlan, mu: float = 10.0) -> "DbhmState":
        """Local copies equal to ``layout`` and zero multipliers."""
        m = plan.n_scenarios
        tile = lambda v: np.tile(np.asarray(v, dtype=float), (m, 1))  # noqa: E731
        zeros = np.zeros((m, len(layout)))
        return cls(
            x=layout.x.copy(), y=layout.y.copy(), x_local=tile(layout.x), y_local=tile(layout.y),
            lam_x=zeros.copy(), lam_y=zeros.copy(), yaw_deg=plan.yaw_deg.copy(),
            induction=plan.induction.copy(), mu=mu,
        )

    @property
    def n_scenarios(self) -> int:
        return self.x_local.shape[0]

    @property
    def layout(self) -> Layout:
        return Layout(self.x.copy(), self.y.copy())

    @property
    def plan(self) -> ControlPlan:
        return ControlPlan(self.yaw_deg.copy(), self.induction.copy())


@dataclass
class SubproblemResult:
    x: np.ndarray
    y: np.ndarray
    yaw_deg: np.ndarray
    induction: np.ndarray
    objective: float
    start_objective: float
    failed: bool = False
    message: str = ""


def subproblem_objective(w: int, state: DbhmState, problem: LayoutProblem, xw, yw, yaw, alpha):
    """``-p_w P_WF + sum lam (x - x^w) + mu (x - x^w)^2 + penalty`` in watts."""
    spec, rose = problem.spec, problem.rose
    p = farm_power_batch(xw, yw, yaw, alpha, rose.directions_deg[w], rose.speed, spec)
    dx = state.x - xw
    dy = state.y - yw
    consensus = (np.dot(state.lam_x[w], dx) + np.dot(state.lam_y[w], dy)
                 + state.mu * (np.dot(dx, dx) + np.dot(dy, dy)))
    penalty = spacing_penalty_batch(xw, yw, spec.min_spacing, problem.penalty_factor)
    return float(-rose.probabilities[w] * p + consensus + penalty)


def dbhm_subproblem(w: int, state: DbhmState, problem: LayoutProblem,
                    options: DbhmOptions | None = None) -> SubproblemResult:
    """Solve scenario ``w``'s local layout and control problem.

    Box-bounded quasi-Newton over ``(x^w, y^w, yaw, alpha)`` with the spacing
    constraints folded into the objective as a penalty.  Warm-started at the
    scenario's current local iterate; never returns a point worse than it.
    """
    options = options or DbhmOptions()
    spec, rose = problem.spec, problem.rose
    n = state.x.size
    prob = float(rose.probabilities[w])
    direction = float(rose.directions_deg[w])
    fx, fy = problem.free_mask(n)
    (xl, xu), (yl, yu) = spec.site_bounds

    # fixed coordinates are pinned to the shared layout
    x0 = np.where(fx, np.clip(state.x_local[w], xl, xu), state.x)
    y0 = np.where(fy, np.clip(state.y_local[w], yl, yu), state.y)
    yaw0 = np.clip(state.yaw_deg[w], spec.gamma_min_deg, spec.gamma_max_deg)
    a0 = np.clip(state.induction[w], spec.alpha_min, spec.alpha_max)
    if options.fix_alpha:
        a0 = np.full(n, GREEDY_INDUCTION)

    # scaled variables: positions in rotor diameters, controls over their range
    D = spec.rotor_diameter
    g_span = spec.gamma_max_deg - spec.gamma_min_deg
    a_span = spec.alpha_max - spec.alpha_min
    lo = np.concatenate([np.where(fx, xl, x0) / D, np.where(fy, yl, y0) / D,
                         np.full(n, spec.gamma_min_deg / g_span)])
    hi = np.concatenate([np.where(fx, xu, x0) / D, np.where(fy, yu, y0) / D,
                         np.full(n, spec.gamma_max_deg / g_span)])
    z0 = np.concatenate([x0 / D, y0 / D, yaw0 / g_span])
    if not options.fix_alpha:
        lo = np.concatenate([lo, np.full(n, spec.alpha_min / a_span)])
        hi = np.concatenate([hi, np.full(n, spec.alpha_max / a_span)])
        z0 = np.concatenate([z0, a0 / a_span])

    p_free = 0.5 * spec.air_density * spec.rotor_area * (16 / 27) * rose.speed**3
    scale = max(prob * n * p_free, state.mu * D**2)

    def unpack(z):
        xw, yw, yaw = z[:n] * D, z[n:2 * n] * D, z[2 * n:3 * n] * g_span
        alpha = z[3 * n:] * a_span if not options.fix_alpha else np.full(n, GREEDY_INDUCTION)
        return xw, yw, yaw, alpha

    def power_and_grad(xw, yw, yaw, alpha):
        if options.gradient == "autodiff":
            from .autodiff import farm_power_and_gradient

            return farm_power_and_gradient(xw, yw, yaw, alpha, direction, rose.speed, spec)
        h = 1e-6
        base = np.concatenate([xw, yw, yaw, alpha])
        steps = np.concatenate([np.full(2 * n, h * D), np.full(n, h * g_span), np.full(n, h)])
        m = base.size
        batch = np.repeat(base[None], 2 * m + 1, axis=0)
        idx = np.arange(m)
        batch[1 + idx, idx] += steps
        batch[1 + m + idx, idx] -= steps
        p = farm_power_batch(batch[:, :n], batch[:, n:2 * n], batch[:, 2 * n:3 * n],
                             batch[:, 3 * n:], direction, rose.speed, spec)
        g = (p[1:m + 1] - p[m + 1:]) / (2 * steps)
        return float(p[0]), (g[:n], g[n:2 * n], g[2 * n:3 * n], g[3 * n:])

    best = {"f": math.inf, "z": z0.copy()}

    def fun(z):
        xw, yw, yaw, alpha = unpack(z)
        p, (gx, gy, gyaw, galpha) = power_and_grad(xw, yw, yaw, alpha)
        dx, dy = state.x - xw, state.y - yw
        consensus = (np.dot(state.lam_x[w], dx) + np.dot(state.lam_y[w], dy)
                     + state.mu * (np.dot(dx, dx) + np.dot(dy, dy)))
        pen = spacing_penalty_batch(xw, yw, spec.min_spacing, problem.penalty_factor)
        px, py = spacing_penalty_gradient(xw, yw, spec.min_spacing, problem.penalty_factor)
        f = -prob * p + consensus + pen
        grad_x = -prob * gx - state.lam_x[w] - 2 * state.mu * dx + px
        grad_y = -prob * gy - state.lam_y[w] - 2 * state.mu * dy + py
        parts = [grad_x * D, grad_y * D, -prob * gyaw * g_span]
        if not options.fix_alpha:
            parts.append(-prob * galpha * a_span)
        if np.isfinite(f) and f < best["f"] and np.all(z >= lo) and np.all(z <= hi):
            best["f"], best["z"] = float(f), np.array(z, dtype=float)
        return f / scale, np.concatenate(parts) / scale

    start_f = fun(z0)[0] * scale
    failed, message = False, ""
    try:
        res = minimize(fun, z0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
                       options={"maxiter": options.subproblem_max_iterations, "ftol": 1e-12,
                                "gtol": 1e-10})
        message = str(res.message)
    except (FloatingPointError, ValueError) as exc:
        failed, message = True, f"{type(exc).__name__}: {exc}"
    if not math.isfinite(best["f"]):
        failed = True
    z = best["z"] if not failed else z0
    xw, yw, yaw, alpha = unpack(z)
    return SubproblemResult(
        x=np.clip(xw, xl, xu), y=np.clip(yw, yl, yu),
        yaw_deg=np.clip(yaw, spec.gamma_min_deg, spec.gamma_max_deg),
        induction=np.clip(alpha, spec.alpha_min, spec.alpha_max),
        objective=best["f"] if not failed else start_f, start_objective=start_f,
        failed=failed, message=message,
    )


def dbhm_coordinate(state: DbhmState) -> tuple[np.ndarray, np.ndarray]:
    """Exact minimizer of the unconstrained consensus quadratic.

    ``x_i = mean_w (x_i^w - lam_{i,x}^w / (2 mu))`` and likewise for ``y``.
    """
    x = np.mean(state.x_local - state.lam_x / (2.0 * state.mu), axis=0)
    y = np.mean(state.y_local - state.lam_y / (2.0 * state.mu), axis=0)
    return x, y


def coordination_objective(state: DbhmState, x, y) -> float:
    """Consensus terms of all scenarios as a function of the shared layout."""
    dx = np.asarray(x)[None, :] - state.x_local
    dy = np.asarray(y)[None, :] - state.y_local
    return float(np.sum(state.lam_x * dx + state.lam_y * dy + state.mu * (dx**2 + dy**2)))


def dbhm_update_multipliers(state: DbhmState) -> DbhmState:
    """Dual ascent ``lam += 2 mu (x - x^w)``, in place; returns ``state``."""
    state.lam_x = state.lam_x + 2.0 * state.mu * (state.x[None, :] - state.x_local)
    state.lam_y = state.lam_y + 2.0 * state.mu * (state.y[None, :] - state.y_local)
    return state


def dbhm_residual(state: DbhmState) -> float:
    """``sum_w ||x - x^w||_2 + ||y - y^w||_2`` in metres."""
    rx = np.linalg.norm(state.x[None, :] - state.x_local, axis=1)
    ry = np.linalg.norm(state.y[None, :] - state.y_local, axis=1)
    return math.fsum(rx) + math.fsum(ry)


def _proxy_aep(layout: Layout, state: DbhmState, problem: LayoutProblem) -> float:
    plan = ControlPlan(state.yaw_deg, state.induction)
    return annual_energy_gwh(layout, plan, problem.rose, problem.spec, problem.hours_per_year)


def dbhm_iterate(state: DbhmState, problem: LayoutProblem, options: DbhmOptions,
                 threads: int = 1) -> tuple[float, list]:
    """One pass: subproblems, coordination, residual; multipliers updated last.

    Returns the residual and the per-scenario subproblem results.  The
    multiplier update is skipped once the residual meets the tolerance.
    """
    indices = range(state.n_scenarios)
    solve = lambda w: dbhm_subproblem(w, state, problem, options)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve, indices))
    else:
        results = [solve(w) for w in indices]
    # combine by scenario index, never by completion order
    for w, r in zip(indices, results):
        state.x_local[w], state.y_local[w] = r.x, r.y
        state.yaw_deg[w], state.induction[w] = r.yaw_deg, r.induction
    state.x, state.y = dbhm_coordinate(state)
    residual = dbhm_residual(state)
    state.residuals.append(residual)
    state.iteration += 1
    if residual >= options.tolerance:
        dbhm_update_multipliers(state)
    return residual, results


def dbhm_optimize(problem: LayoutProblem, warm_start: Layout, options: DbhmOptions | None = None,
                  seed: int = 0, *, warm_plan: ControlPlan | None = None) -> OptimizationReport:
    """Consensus ADMM from a warm-start layout.

    The best iterate (by AEP of its repaired shared layout under the current
    scenario controls, the warm start included) is repaired to exact
    feasibility and its controls re-optimized in every scenario, so the
    reported AEP is exact for the reported layout and plan.
    """
    options = options or DbhmOptions()
    t0 = time.perf_counter()
    ctrl_opts = _seeded(replace(problem.control_options, fix_alpha_at_greedy=options.fix_alpha), seed)
    start = repair_layout(warm_start, problem.spec, problem.movable)
    if warm_plan is None:
        warm_plan, _ = optimize_controls_all_scenarios(start, problem.rose, problem.spec, ctrl_opts,
                                                      threads=problem.threads)
    warm_aep = annual_energy_gwh(start, warm_plan, problem.rose, problem.spec,
                                 problem.hours_per_year)
    state = DbhmState.initial(start, warm_plan, options.mu)

    best = (warm_aep, start, warm_plan, 0)
    trace = {"residual": [], "proxy_aep_gwh": [], "subproblem_failures": [],
             "subproblem_gain": []}
    converged = False
    failures = 0
    for k in range(options.max_iterations):
        residual, results = dbhm_iterate(state, problem, options, threads=problem.threads)
        n_failed = sum(r.failed for r in results)
        failures += n_failed
        try:
            candidate = repair_layout(state.layout, problem.spec, problem.movable)
            proxy = _proxy_aep(candidate, state, problem)
        except RuntimeError:
            candidate, proxy = None, -math.inf
        trace["residual"].append(residual)
        trace["proxy_aep_gwh"].append(proxy)
        trace["subproblem_failures"].append(n_failed)
        trace["subproblem_gain"].append(math.fsum(r.start_objective - r.objective for r in results))
        logger.info("dbhm iteration %d: residual %.4g m, proxy AEP %.6g GWh", k + 1, residual, proxy)
        if candidate is not None and proxy > best[0]:
            best = (proxy, candidate, state.plan, k + 1)
        if residual < options.tolerance:
            converged = True
            break

    warn = []
    if not converged:
        msg = (f"consensus residual {state.residuals[-1]:.4g} m did not reach "
               f"{options.tolerance} m within {options.max_iterations} iterations")
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        warn.append(msg)

    _, layout, seed_plan, best_iter = best
    plan, _ = optimize_controls_all_scenarios(layout, problem.rose, problem.spec, ctrl_opts,
                                             threads=problem.threads, initial_plan=seed_plan)
    final_aep = annual_energy_gwh(layout, plan, problem.rose, problem.spec, problem.hours_per_year)
    if final_aep < warm_aep:
        # keep the warm start when re-optimization cannot beat it
        layout, plan, final_aep, best_iter = start, warm_plan, warm_aep, 0
    trace["warm_start_aep_gwh"] = warm_aep
    return build_report(layout, plan, problem, mode="dbhm", traces=trace, extra={
        "seed": seed, "mu": options.mu, "tolerance": options.tolerance,
        "iterations": state.iteration, "converged": converged, "best_iteration": best_iter,
        "fix_alpha": options.fix_alpha, "subproblem_failures": failures, "warnings": warn,
    }, wall_clock_seconds=time.perf_counter() - t0)


def dbhm_pipeline(problem: LayoutProblem, initial: Layout, seed: int = 0,
                  pso_options: PsoOptions | None = None,
                  options: DbhmOptions | None = None) -> OptimizationReport:
    """Full hybrid method: greedy PSO warm start, then consensus ADMM."""
    t0 = time.perf_counter()
    warm = pso_layout(replace(problem, policy="greedy"), initial, pso_options, seed)
    # same control seed as the sequential pipeline, so both share the warm-start plan
    report = dbhm_optimize(problem, warm.layout, options, seed=seed)
    report.traces["pso"] = warm.trace
    report.traces["pso_restart_best"] = warm.restart_best
    report.metadata["seed"] = seed
    report.metadata["warm_start_layout_only_aep_gwh"] = warm.aep_gwh
    report.metadata["initial_greedy_aep_gwh"] = warm.initial_aep_gwh
    report.wall_clock_seconds = time.perf_counter() - t0
    return report
