"""Brute-force references for small instances.

The control grid search builds its pairwise deficit tables from the scalar
wake functions rather than the vectorised kernel used by the optimizers, so
agreement between the two is a meaningful check.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numba
import numpy as np
from scipy.optimize import minimize

from .control import optimize_controls_all_scenarios
from .layout import (
    LayoutProblem, _seeded, repair_layout, spacing_penalty_batch, spacing_penalty_gradient,
)
from .scenarios import ControlPlan, WindRose, annual_energy_gwh
from .wake import (
    TIE_TOLERANCE, Controls, FarmSpec, Inflow, Layout, TurbineControl, farm_power,
    farm_power_batch, single_wake_deficit, wind_frame,
)

FULL_GRID_MAX = 3
COORDINATE_MAX = 10


class OracleTooLargeError(ValueError):
    """The instance is too large for an exhaustive search."""


def yaw_grid(spec: FarmSpec, step: float = 1.0) -> np.ndarray:
    if not 0 < step <= 1.0:
        raise ValueError("yaw step must lie in (0, 1] degrees")
    k = int(math.floor((spec.gamma_max_deg - spec.gamma_min_deg) / step + 1e-9))
    g = spec.gamma_min_deg + step * np.arange(k + 1)
    if g[-1] < spec.gamma_max_deg - 1e-9:
        g = np.append(g, spec.gamma_max_deg)
    return g


def induction_grid(spec: FarmSpec, step: float = 0.02) -> np.ndarray:
    if not 0 < step <= 0.02:
        raise ValueError("induction step must lie in (0, 0.02]")
    k = int(math.floor((spec.alpha_max - spec.alpha_min) / step + 1e-9))
    a = spec.alpha_min + step * np.arange(k + 1)
    if a[-1] < spec.alpha_max - 1e-12:
        a = np.append(a, spec.alpha_max)
    return a


@numba.njit(cache=True)
def _search3(k0, k1, k2max, g1, t10, t20, t21, w):  # pragma: no cover - compiled
    """Exhaustive maximum over three turbines sorted upstream to downstream.

    ``k*`` are per-candidate power factors, ``g1`` maps turbine 1 candidates
    to yaw indices, ``t_ij[c_j, g_i, p]`` are deficits at rotor points and
    ``k2max[g]`` is the best factor of the last turbine at yaw index ``g``.
    """
    n0, n1, ng2 = k0.size, k1.size, k2max.size
    npts = w.size
    best = -1.0
    b0, b1, b2 = 0, 0, 0
    for c0 in range(n0):
        for c1 in range(n1):
            v1 = 0.0
            for p in range(npts):
                v1 += w[p] * (1.0 - min(t10[c0, g1[c1], p], 1.0))
            partial = k0[c0] + k1[c1] * v1 * v1 * v1
            for g in range(ng2):
                v2 = 0.0
                for p in range(npts):
                    a = t20[c0, g, p]
                    b = t21[c1, g, p]
                    v2 += w[p] * (1.0 - min(math.sqrt(a * a + b * b), 1.0))
                total = partial + k2max[g] * v2 * v2 * v2
                if total > best:
                    best = total
                    b0, b1, b2 = c0, c1, g
    return best, b0, b1, b2


def _pair_table(dx, cross_i, cross_j, up_yaw, up_alpha, own_yaw, spec: FarmSpec):
    """Deficit at turbine i's rotor points for every upstream candidate and own yaw."""
    offsets, _ = spec.rotor_rule
    if dx <= TIE_TOLERANCE:
        return np.zeros((up_yaw.size, own_yaw.size, offsets.size))
    pts = cross_i + offsets[None, :] * np.cos(np.deg2rad(own_yaw))[:, None]
    ctrl = TurbineControl(up_yaw[:, None, None], up_alpha[:, None, None])
    return single_wake_deficit(dx, pts[None, :, :] - cross_j, ctrl, spec)


def control_grid_search(layout: Layout, inflow: Inflow, spec: FarmSpec, yaw_step: float = 1.0,
                        alpha_step: float = 0.02, cycles: int = 2) -> tuple[Controls, float]:
    """Grid maximizer of farm power over yaw and induction.

    Up to three turbines the joint grid is searched exhaustively.  A turbine
    with no turbine strictly downstream of it affects nobody else, so its
    induction is set to ``alpha_max`` (the power coefficient increases up to
    1/3) and only its yaw is gridded; this is exact, not a heuristic.
    Between four and ten turbines, ``cycles`` sweeps of one-turbine-at-a-time
    exhaustive search start from greedy settings; the result is a lower
    bound on the grid optimum.

    Raises
    ------
    OracleTooLargeError
        For more than ten turbines.
    """
    n = len(layout)
    if n > COORDINATE_MAX:
        raise OracleTooLargeError(f"grid search supports at most {COORDINATE_MAX} turbines, got {n}")
    gy = yaw_grid(spec, yaw_step)
    ga = induction_grid(spec, alpha_step)
    if n > FULL_GRID_MAX:
        return _coordinate_search(layout, inflow, spec, gy, ga, cycles)

    down, cross = wind_frame(layout.x, layout.y, inflow.direction_deg)
    order = np.argsort(down, kind="stable")
    # pad to three turbines with inert dummies far upstream of nothing
    d = list(down[order]) + [None] * (3 - n)
    c = list(cross[order]) + [None] * (3 - n)
    terminal = [
        not any(d[j] is not None and d[j] - d[i] > TIE_TOLERANCE for j in range(3)) if d[i] is not None else True
        for i in range(3)
    ]
    cand_yaw, cand_alpha, factors = [], [], []
    for i in range(3):
        if d[i] is None:
            yv, av = np.zeros(1), np.array([spec.alpha_max])
        elif terminal[i]:
            yv, av = gy, np.full(gy.size, spec.alpha_max)
        else:
            yv, av = np.repeat(gy, ga.size), np.tile(ga, gy.size)
        cand_yaw.append(yv)
        cand_alpha.append(av)
        cp = 4.0 * av * (1.0 - av) ** 2
        k = 0.5 * spec.air_density * spec.rotor_area * cp * np.cos(np.deg2rad(yv)) ** spec.p_p
        factors.append(k * inflow.speed**3 if d[i] is not None else np.zeros(1))
    yaw_of = [np.searchsorted(gy, cy) if d[i] is not None else np.zeros(1, int)
              for i, cy in enumerate(cand_yaw)]
    own_yaw = [gy if d[i] is not None else np.zeros(1) for i in range(3)]

    def table(i, j):
        if d[i] is None or d[j] is None:
            return np.zeros((cand_yaw[j].size, own_yaw[i].size, spec.rotor_rule[0].size))
        return _pair_table(d[i] - d[j], c[i], c[j], cand_yaw[j], cand_alpha[j], own_yaw[i], spec)

    t10, t20, t21 = table(1, 0), table(2, 0), table(2, 1)
    # the last turbine's best power factor at each of its yaw values
    k2max = np.full(own_yaw[2].size, -np.inf)
    np.maximum.at(k2max, yaw_of[2], factors[2])
    _, b0, b1, g2 = _search3(factors[0], factors[1], k2max, yaw_of[1].astype(np.int64),
                             t10, t20, t21, spec.rotor_rule[1])
    in_g = np.flatnonzero(yaw_of[2] == g2)
    b2 = int(in_g[np.argmax(factors[2][in_g])])
    yaw = np.zeros(n)
    alpha = np.zeros(n)
    for slot, cidx in enumerate((b0, b1, b2)):
        if slot < n:
            yaw[order[slot]] = cand_yaw[slot][cidx]
            alpha[order[slot]] = cand_alpha[slot][cidx]
    controls = Controls(yaw, alpha)
    return controls, farm_power(layout, controls, inflow, spec).farm_power


def _coordinate_search(layout, inflow, spec, gy, ga, cycles):
    n = len(layout)
    yaw = np.zeros(n)
    alpha = np.full(n, spec.alpha_max)
    cand_y = np.repeat(gy, ga.size)
    cand_a = np.tile(ga, gy.size)
    best = farm_power_batch(layout.x, layout.y, yaw, alpha, inflow.direction_deg, inflow.speed, spec)
    for _ in range(cycles):
        for i in range(n):
            ys = np.repeat(yaw[None], cand_y.size, axis=0)
            als = np.repeat(alpha[None], cand_y.size, axis=0)
            ys[:, i], als[:, i] = cand_y, cand_a
            p = farm_power_batch(layout.x, layout.y, ys, als, inflow.direction_deg, inflow.speed, spec)
            k = int(np.argmax(p))
            if p[k] > best:
                best = p[k]
                yaw, alpha = ys[k].copy(), als[k].copy()
    controls = Controls(yaw, alpha)
    return controls, farm_power(layout, controls, inflow, spec).farm_power


# -- position sweeps ----------------------------------------------------------


@dataclass
class SweepResult:
    """AEP along one coordinate of one turbine."""

    grid: np.ndarray
    aep_mwh: np.ndarray
    argmax: float
    controls_at_argmax: ControlPlan
    policy: str

    def __post_init__(self):
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("sweep grid must be strictly increasing")
        if not np.all(np.isfinite(self.aep_mwh)):
            raise ValueError("non-finite AEP in sweep")


def sweep_position(layout: Layout, index: int, axis: str, grid, problem: LayoutProblem,
                   policy: str = "greedy", max_step: float = 10.0, yaw_step: float = 1.0,
                   alpha_step: float = 0.02) -> SweepResult:
    """Move turbine ``index`` along ``axis`` over ``grid`` and record the AEP.

    ``policy`` is ``"greedy"``, ``"grid"`` (controls from
    :func:`control_grid_search` in every scenario) or ``"solver"`` (controls
    from the gradient-based optimizer).
    """
    grid = np.asarray(grid, dtype=float)
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    if grid.size > 1 and np.max(np.diff(grid)) > max_step + 1e-9:
        raise ValueError(f"sweep step exceeds {max_step} m")
    (xl, xu), (yl, yu) = problem.spec.site_bounds
    lo, hi = (xl, xu) if axis == "x" else (yl, yu)
    if grid.min() < lo or grid.max() > hi:
        raise ValueError("sweep grid leaves the site")
    rose, spec = problem.rose, problem.spec
    values = np.empty(grid.size)
    plans = []
    for k, v in enumerate(grid):
        lay = layout.copy()
        getattr(lay, axis)[index] = v
        if policy == "greedy":
            plan = ControlPlan.greedy(rose.n_scenarios, len(lay))
        elif policy == "grid":
            ctrls = [control_grid_search(lay, Inflow(t, rose.speed), spec, yaw_step, alpha_step)[0]
                     for t in rose.directions_deg]
            plan = ControlPlan.from_controls(ctrls)
        elif policy == "solver":
            plan, _ = optimize_controls_all_scenarios(lay, rose, spec, problem.control_options)
        else:
            raise ValueError(f"unknown sweep policy {policy!r}")
        values[k] = 1e3 * annual_energy_gwh(lay, plan, rose, spec, problem.hours_per_year)
        plans.append(plan)
    best = int(np.argmax(values))
    return SweepResult(grid, values, float(grid[best]), plans[best], policy)


def write_sweep_csv(path, grid, curves: dict):
    """Write ``position_m`` plus one AEP column (MWh) per named curve."""
    names = list(curves)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["position_m"] + [f"aep_{name}_mwh" for name in names])
        for k, g in enumerate(grid):
            writer.writerow([repr(float(g))] + [repr(float(curves[name][k])) for name in names])


# -- direct joint solve ---------------------------------------------------------


def direct_joint_solve(problem: LayoutProblem, initial: Layout, seed: int = 0, random_starts: int = 4,
                       max_iterations: int = 500) -> tuple[Layout, ControlPlan, float]:
    """Joint layout and control optimization without decomposition.

    Maximizes ``T sum_w p_w P_WF`` minus the spacing penalty over all
    coordinates and every scenario's controls at once with a box-bounded
    quasi-Newton method, from the initial layout and a few repaired random
    layouts.  The best result is repaired and its controls re-optimized.
    Intended as a reference for small instances.
    """
    from .autodiff import weighted_power_and_gradient

    spec, rose = problem.spec, problem.rose
    n, m = len(initial), rose.n_scenarios
    fx, fy = problem.free_mask(n)
    (xl, xu), (yl, yu) = spec.site_bounds
    D = spec.rotor_diameter
    g_span = spec.gamma_max_deg - spec.gamma_min_deg
    a_span = spec.alpha_max - spec.alpha_min
    p_free = 0.5 * spec.air_density * spec.rotor_area * (16 / 27) * rose.speed**3
    scale = n * p_free
    probs = rose.probabilities
    ctrl_opts = _seeded(problem.control_options, seed)

    def bounds_for(lay):
        lo = np.concatenate([np.where(fx, xl, lay.x) / D, np.where(fy, yl, lay.y) / D,
                             np.full(m * n, spec.gamma_min_deg / g_span),
                             np.full(m * n, spec.alpha_min / a_span)])
        hi = np.concatenate([np.where(fx, xu, lay.x) / D, np.where(fy, yu, lay.y) / D,
                             np.full(m * n, spec.gamma_max_deg / g_span),
                             np.full(m * n, spec.alpha_max / a_span)])
        return lo, hi

    def unpack(z):
        x, y = z[:n] * D, z[n:2 * n] * D
        yaw = z[2 * n:2 * n + m * n].reshape(m, n) * g_span
        alpha = z[2 * n + m * n:].reshape(m, n) * a_span
        return x, y, yaw, alpha

    def fun(z):
        x, y, yaw, alpha = unpack(z)
        xs, ys = np.tile(x, (m, 1)), np.tile(y, (m, 1))
        val, (gx, gy, gyaw, galpha) = weighted_power_and_gradient(
            xs, ys, yaw, alpha, rose.directions_deg, rose.speed, probs, spec)
        pen = spacing_penalty_batch(x, y, spec.min_spacing, problem.penalty_factor)
        px, py = spacing_penalty_gradient(x, y, spec.min_spacing, problem.penalty_factor)
        f = -val + pen
        grad = np.concatenate([(-gx.sum(0) + px) * D, (-gy.sum(0) + py) * D,
                               -gyaw.ravel() * g_span, -galpha.ravel() * a_span])
        return f / scale, grad / scale

    starts = [initial]
    rng = np.random.default_rng([seed, 7])
    for _ in range(random_starts):
        rx = np.where(fx, rng.uniform(xl, xu, n), initial.x)
        ry = np.where(fy, rng.uniform(yl, yu, n), initial.y)
        starts.append(repair_layout(Layout(rx, ry), spec, problem.movable))

    best = None
    for lay in starts:
        plan0, _ = optimize_controls_all_scenarios(lay, rose, spec, ctrl_opts)
        z0 = np.concatenate([lay.x / D, lay.y / D, plan0.yaw_deg.ravel() / g_span,
                             plan0.induction.ravel() / a_span])
        lo, hi = bounds_for(lay)
        res = minimize(fun, np.clip(z0, lo, hi), jac=True, method="L-BFGS-B",
                       bounds=list(zip(lo, hi)), options={"maxiter": max_iterations, "ftol": 1e-13})
        x, y, yaw, alpha = unpack(res.x)
        cand = repair_layout(Layout(x, y), spec, problem.movable)
        seed_plan = ControlPlan(np.clip(yaw, spec.gamma_min_deg, spec.gamma_max_deg),
                                np.clip(alpha, spec.alpha_min, spec.alpha_max))
        plan, _ = optimize_controls_all_scenarios(cand, rose, spec, ctrl_opts, initial_plan=seed_plan)
        value = annual_energy_gwh(cand, plan, rose, spec, problem.hours_per_year)
        if best is None or value > best[2]:
            best = (cand, plan, value)
    return best


def single_scenario_problem(problem: LayoutProblem, direction_deg: float) -> LayoutProblem:
    """Copy of ``problem`` restricted to one inflow direction with probability 1."""
    return replace(problem, rose=WindRose.single(direction_deg, problem.rose.speed))
