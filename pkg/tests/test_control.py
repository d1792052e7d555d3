import numpy as np
import pytest

import windjoint.control as control
from windjoint.control import (
    ControlSolveOptions, greedy_controls, optimize_controls, optimize_controls_all_scenarios,
)
from windjoint.scenarios import WindRose
from windjoint.wake import Controls, Inflow, Layout, farm_power, farm_power_batch

from conftest import random_layout


def test_greedy_controls(spec):
    c = greedy_controls(3)
    assert c.yaw_deg.tolist() == [0.0, 0.0, 0.0]
    assert c.induction.tolist() == [1 / 3] * 3
    farm_power(Layout([0, 600, 1200], [0, 0, 0]), c, Inflow(), spec)  # within bounds
    with pytest.raises(ValueError):
        greedy_controls(0)


def test_options_validation():
    with pytest.raises(ValueError):
        ControlSolveOptions(multistart=0)
    with pytest.raises(ValueError):
        ControlSolveOptions(gradient_tolerance=0.0)
    with pytest.raises(ValueError):
        ControlSolveOptions(bound_mode="none")
    with pytest.raises(ValueError):
        ControlSolveOptions(gradient="exact")


def test_single_turbine_optimum_is_greedy(spec):
    c, p = optimize_controls(Layout([0.0], [0.0]), Inflow(), spec)
    assert c.yaw_deg[0] == pytest.approx(0.0, abs=1e-3)
    assert c.induction[0] == pytest.approx(1 / 3, abs=1e-6)
    assert p == pytest.approx(farm_power(Layout([0.0], [0.0]), greedy_controls(1), Inflow(), spec).farm_power,
                              rel=1e-9)


def test_aligned_pair_matches_yaw_grid(spec):
    layout = Layout([0.0, 7 * 126.0], [0.0, 0.0])
    grid = np.arange(-30.0, 30.0 + 1e-9, 0.5)
    yaw = np.stack([grid, np.zeros_like(grid)], axis=1)
    powers = farm_power_batch(np.tile(layout.x, (grid.size, 1)), np.tile(layout.y, (grid.size, 1)),
                              yaw, np.full_like(yaw, 1 / 3), 270.0, 9.0, spec)
    g_grid = grid[np.argmax(powers)]
    c, p = optimize_controls(layout, Inflow(270.0, 9.0), spec, ControlSolveOptions(fix_alpha_at_greedy=True))
    assert abs(c.yaw_deg[0] - g_grid) <= 1.0
    assert p >= powers.max() * (1 - 1e-9)
    assert np.all(c.induction == 1 / 3)


@pytest.mark.parametrize("mode", ["projected", "clipped"])
def test_bounds_and_greedy_dominance(spec, mode):
    rng = np.random.default_rng(17)
    opts = ControlSolveOptions(bound_mode=mode, multistart=2)
    for _ in range(4):
        layout = random_layout(rng, 4, spec)
        inflow = Inflow(rng.uniform(0, 360), 9.0)
        c, p = optimize_controls(layout, inflow, spec, opts)
        assert np.all(c.yaw_deg >= spec.gamma_min_deg) and np.all(c.yaw_deg <= spec.gamma_max_deg)
        assert np.all(c.induction >= spec.alpha_min) and np.all(c.induction <= spec.alpha_max)
        greedy = farm_power(layout, greedy_controls(4), inflow, spec).farm_power
        assert p >= greedy * (1 - 1e-6)
        assert p == farm_power(layout, c, inflow, spec).farm_power


def test_autodiff_path_agrees(spec):
    layout = Layout([0.0, 600.0, 1200.0], [0.0, 30.0, -20.0])
    fd_c, fd_p = optimize_controls(layout, Inflow(270.0, 9.0), spec, ControlSolveOptions(multistart=3))
    ad_c, ad_p = optimize_controls(layout, Inflow(270.0, 9.0), spec,
                                   ControlSolveOptions(multistart=3, gradient="autodiff"))
    assert ad_p == pytest.approx(fd_p, rel=1e-4)


def test_extra_start_is_used(spec):
    layout = Layout([0.0, 600.0], [0.0, 0.0])
    seed = Controls([25.0, 0.0], [0.3, 1 / 3])
    seeded_power = farm_power(layout, seed, Inflow(), spec).farm_power
    _, p = optimize_controls(layout, Inflow(), spec, ControlSolveOptions(multistart=1, max_iterations=1),
                             extra_starts=[seed])
    assert p >= seeded_power


def test_fix_alpha(spec):
    layout = Layout([0.0, 600.0, 1200.0], [0.0, 0.0, 0.0])
    plan, _ = optimize_controls_all_scenarios(layout, WindRose([270.0, 90.0], [0.5, 0.5]), spec,
                                              ControlSolveOptions(fix_alpha_at_greedy=True, multistart=2))
    assert np.all(plan.induction == 1 / 3)


def test_all_scenarios_deterministic_and_thread_independent(spec):
    layout = Layout([0.0, 600.0, 1200.0, 300.0], [0.0, 0.0, 0.0, 600.0])
    rose = WindRose.uniform(4)
    opts = ControlSolveOptions(multistart=3, seed=5)
    a_plan, a_p = optimize_controls_all_scenarios(layout, rose, spec, opts)
    b_plan, b_p = optimize_controls_all_scenarios(layout, rose, spec, opts)
    c_plan, c_p = optimize_controls_all_scenarios(layout, rose, spec, opts, threads=3)
    assert np.array_equal(a_plan.yaw_deg, b_plan.yaw_deg) and np.array_equal(a_p, b_p)
    assert np.array_equal(a_plan.yaw_deg, c_plan.yaw_deg) and np.array_equal(a_p, c_p)
    assert np.array_equal(a_plan.induction, c_plan.induction)
    for w in range(4):
        greedy = farm_power(layout, greedy_controls(4), Inflow(rose.directions_deg[w]), spec).farm_power
        assert a_p[w] >= greedy * (1 - 1e-6)


def test_single_scenario_reduces_to_optimize_controls(spec):
    layout = Layout([0.0, 700.0], [0.0, 40.0])
    opts = ControlSolveOptions(multistart=2)
    plan, powers = optimize_controls_all_scenarios(layout, WindRose.single(270.0), spec, opts)
    c, p = optimize_controls(layout, Inflow(270.0, 9.0), spec, opts)
    assert powers[0] == p
    assert np.array_equal(plan.controls(0).yaw_deg, c.yaw_deg)


def test_failures_name_scenario(spec, monkeypatch):
    real = control.optimize_controls

    def flaky(layout, inflow, spec, options, *, scenario_index=0, extra_starts=()):
        if scenario_index == 1:
            raise FloatingPointError("boom")
        return real(layout, inflow, spec, options, scenario_index=scenario_index, extra_starts=extra_starts)

    monkeypatch.setattr(control, "optimize_controls", flaky)
    with pytest.raises(RuntimeError, match="scenario 1: boom"):
        optimize_controls_all_scenarios(Layout([0.0], [0.0]), WindRose.uniform(3), spec,
                                        ControlSolveOptions(multistart=1))
