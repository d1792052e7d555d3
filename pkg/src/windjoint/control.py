"""Per-scenario cooperative control: maximize farm power over yaw and induction."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .scenarios import ControlPlan, WindRose
from .wake import Controls, FarmSpec, Inflow, Layout, farm_power, farm_power_batch

GREEDY_INDUCTION = 1.0 / 3.0


@dataclass(frozen=True)
class ControlSolveOptions:
    """Settings for :func:`optimize_controls`.

    ``bound_mode`` is ``"projected"`` (L-BFGS-B handles the box natively) or
    ``"clipped"`` (BFGS on the objective composed with a clip onto the box).
    ``gradient`` is ``"fd"`` (batched central differences) or ``"autodiff"``.
    """

    multistart: int = 5
    max_iterations: int = 200
    gradient_tolerance: float = 1e-9
    bound_mode: str = "projected"
    fix_alpha_at_greedy: bool = False
    gradient: str = "fd"
    seed: int = 0
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.multistart < 1 or self.max_iterations < 1:
            raise ValueError("multistart and max_iterations must be >= 1")
        if not self.gradient_tolerance > 0 or not self.fd_step > 0:
            raise ValueError("tolerances must be positive")
        if self.bound_mode not in ("projected", "clipped"):
            raise ValueError(f"unknown bound_mode {self.bound_mode!r}")
        if self.gradient not in ("fd", "autodiff"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")


def greedy_controls(n: int) -> Controls:
    """Zero yaw and Betz-optimal induction for ``n`` turbines."""
    if n < 1:
        raise ValueError("need at least one turbine")
    return Controls(np.zeros(n), np.full(n, GREEDY_INDUCTION))


class _ControlObjective:
    """Negative scaled farm power in unit-box coordinates.

    Variables are ``u in [0, 1]^m``; yaw (and induction unless fixed) are
    mapped affinely onto their bounds.  Tracks the best in-box point seen.
    """

    def __init__(self, layout: Layout, inflow: Inflow, spec: FarmSpec, options: ControlSolveOptions):
        self.layout = layout
        self.inflow = inflow
        self.spec = spec
        self.options = options
        n = len(layout)
        self.n = n
        self.fix_alpha = options.fix_alpha_at_greedy
        if self.fix_alpha and not (spec.alpha_min <= GREEDY_INDUCTION <= spec.alpha_max + 1e-12):
            raise ValueError("greedy induction 1/3 lies outside the induction bounds")
        lo = [spec.gamma_min_deg] * n
        hi = [spec.gamma_max_deg] * n
        if not self.fix_alpha:
            lo += [spec.alpha_min] * n
            hi += [spec.alpha_max] * n
        self.lo = np.array(lo)
        self.span = np.array(hi) - self.lo
        self.scale = n * 0.5 * spec.air_density * spec.rotor_area * (16.0 / 27.0) * inflow.speed**3
        self.best_u = None
        self.best_power = -np.inf

    def to_controls(self, u):
        v = self.lo + self.span * np.asarray(u)
        yaw = v[..., : self.n]
        if self.fix_alpha:
            induction = np.full_like(yaw, GREEDY_INDUCTION)
        else:
            induction = v[..., self.n:]
        return yaw, induction

    def to_unit(self, controls: Controls):
        v = controls.yaw_deg if self.fix_alpha else np.concatenate([controls.yaw_deg, controls.induction])
        return np.clip((v - self.lo) / self.span, 0.0, 1.0)

    def power(self, u):
        yaw, induction = self.to_controls(u)
        return farm_power_batch(
            self.layout.x, self.layout.y, yaw, induction,
            self.inflow.direction_deg, self.inflow.speed, self.spec,
        )

    def _record(self, u, p):
        if p > self.best_power and np.all(u >= 0) and np.all(u <= 1):
            self.best_power = float(p)
            self.best_u = np.array(u, dtype=float)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.options.gradient == "autodiff":
            return self._autodiff(u)
        h = self.options.fd_step
        m = u.size
        batch = np.repeat(u[None, :], 2 * m + 1, axis=0)
        idx = np.arange(m)
        batch[1 + idx, idx] += h
        batch[1 + m + idx, idx] -= h
        p = self.power(batch)
        self._record(u, p[0])
        grad = (p[1: m + 1] - p[m + 1:]) / (2.0 * h)
        return -p[0] / self.scale, -grad / self.scale

    def _autodiff(self, u):
        from .autodiff import farm_power_and_gradient

        yaw, induction = self.to_controls(u)
        p, (_, _, g_yaw, g_alpha) = farm_power_and_gradient(
            self.layout.x, self.layout.y, yaw, induction,
            self.inflow.direction_deg, self.inflow.speed, self.spec,
        )
        self._record(u, p)
        grad = g_yaw if self.fix_alpha else np.concatenate([g_yaw, g_alpha])
        return -p / self.scale, -grad * self.span / self.scale


def _solve_from(objective: _ControlObjective, u0, options: ControlSolveOptions):
    if options.bound_mode == "projected":
        minimize(
            objective, u0, jac=True, method="L-BFGS-B",
            bounds=[(0.0, 1.0)] * u0.size,
            options={"maxiter": options.max_iterations, "gtol": options.gradient_tolerance,
                     "ftol": 1e-13},
        )
    else:
        def clipped(u):
            inside = (u >= 0) & (u <= 1)
            f, g = objective(np.clip(u, 0.0, 1.0))
            return f, np.where(inside, g, 0.0)

        res = minimize(clipped, u0, jac=True, method="BFGS",
                       options={"maxiter": options.max_iterations, "gtol": options.gradient_tolerance})
        objective(np.clip(res.x, 0.0, 1.0))


def optimize_controls(layout: Layout, inflow: Inflow, spec: FarmSpec,
                      options: ControlSolveOptions | None = None, *,
                      scenario_index: int = 0, extra_starts=()) -> tuple[Controls, float]:
    """Maximize farm power over per-turbine yaw and induction within bounds.

    Multistart from the greedy point, any ``extra_starts`` and
    ``multistart - 1`` uniform random points.  Random starts draw from a
    generator seeded by ``(options.seed, scenario_index)``.
    """
    options = options or ControlSolveOptions()
    objective = _ControlObjective(layout, inflow, spec, options)
    n = len(layout)
    rng = np.random.default_rng([options.seed, scenario_index])
    starts = [objective.to_unit(greedy_controls(n))]
    starts += [objective.to_unit(c) for c in extra_starts]
    starts += [rng.uniform(0.0, 1.0, objective.lo.size) for _ in range(options.multistart - 1)]

    candidates = []
    for u0 in starts:
        objective.best_u, objective.best_power = None, -np.inf
        objective(u0)
        _solve_from(objective, u0, options)
        candidates.append((objective.best_power, objective.best_u))

    top = max(p for p, _ in candidates)
    tied = [(p, u) for p, u in candidates if p >= top - 1e-12 * abs(top)]
    _, u_best = min(tied, key=lambda pu: float(np.sum(objective.to_controls(pu[1])[0] ** 2)))
    yaw, induction = objective.to_controls(u_best)
    yaw = np.clip(yaw, spec.gamma_min_deg, spec.gamma_max_deg)
    induction = np.clip(induction, spec.alpha_min, spec.alpha_max)
    controls = Controls(yaw, induction)
    power = farm_power(layout, controls, inflow, spec).farm_power
    if not np.isfinite(power):
        raise FloatingPointError("non-finite farm power at optimized controls")
    return controls, power


def optimize_controls_all_scenarios(layout: Layout, rose: WindRose, spec: FarmSpec,
                                    options: ControlSolveOptions | None = None, *,
                                    threads: int = 1, initial_plan: ControlPlan | None = None
                                    ) -> tuple[ControlPlan, np.ndarray]:
    """Solve the control problem independently for every scenario of ``rose``.

    Returns the plan and per-scenario optimal farm power (W).  Results are
    collected by scenario index, so they do not depend on ``threads``.
    """
    options = options or ControlSolveOptions()

    def solve(w):
        extra = [initial_plan.controls(w)] if initial_plan is not None else []
        inflow = Inflow(rose.directions_deg[w], rose.speed)
        return optimize_controls(layout, inflow, spec, options, scenario_index=w, extra_starts=extra)

    indices = range(rose.n_scenarios)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(solve, w) for w in indices]
            outcomes = []
            for w, f in zip(indices, futures):
                try:
                    outcomes.append(f.result())
                except Exception as exc:
                    outcomes.append(exc)
    else:
        outcomes = []
        for w in indices:
            try:
                outcomes.append(solve(w))
            except Exception as exc:
                outcomes.append(exc)

    failures = [(w, o) for w, o in zip(indices, outcomes) if isinstance(o, Exception)]
    if failures:
        detail = "; ".join(f"scenario {w}: {exc}" for w, exc in failures)
        raise RuntimeError(f"control optimization failed: {detail}")
    plan = ControlPlan.from_controls([c for c, _ in outcomes])
    return plan, np.array([p for _, p in outcomes])
