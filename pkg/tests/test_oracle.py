import csv

import numpy as np
import pytest

from windjoint.control import ControlSolveOptions, greedy_controls, optimize_controls
from windjoint.layout import LayoutProblem, is_feasible
from windjoint.oracle import (
    OracleTooLargeError, SweepResult, control_grid_search, direct_joint_solve, induction_grid,
    single_scenario_problem, sweep_position, write_sweep_csv, yaw_grid,
)
from windjoint.scenarios import ControlPlan, WindRose, annual_energy_gwh
from windjoint.wake import FarmSpec, Inflow, Layout, farm_power, farm_power_batch


def test_grids(spec):
    g = yaw_grid(spec)
    assert g[0] == -30.0 and g[-1] == 30.0 and g.size == 61
    a = induction_grid(spec)
    assert a[0] == 0.1 and a[-1] == 1 / 3
    assert np.all(np.diff(a) <= 0.02 + 1e-12)
    with pytest.raises(ValueError):
        yaw_grid(spec, 2.0)
    with pytest.raises(ValueError):
        induction_grid(spec, 0.05)


def test_single_turbine(spec):
    c, p = control_grid_search(Layout([0.0], [0.0]), Inflow(), spec)
    assert c.yaw_deg.tolist() == [0.0] and c.induction.tolist() == [1 / 3]
    assert p == farm_power(Layout([0.0], [0.0]), greedy_controls(1), Inflow(), spec).farm_power


def test_pair_matches_brute_force_enumeration(spec):
    """Full joint grid for two turbines through the vectorised kernel."""
    layout = Layout([0.0, 7 * 126.0], [0.0, 0.0])
    gy, ga = yaw_grid(spec), induction_grid(spec)
    cy = np.repeat(gy, ga.size)
    ca = np.tile(ga, gy.size)
    best = -np.inf
    for k in range(cy.size):
        yaw = np.stack([np.full(cy.size, cy[k]), cy], axis=1)
        alpha = np.stack([np.full(cy.size, ca[k]), ca], axis=1)
        p = farm_power_batch(layout.x, layout.y, yaw, alpha, 270.0, 9.0, spec)
        best = max(best, p.max())
    c, p = control_grid_search(layout, Inflow(270.0, 9.0), spec)
    assert p == pytest.approx(best, rel=1e-12)
    greedy = farm_power(layout, greedy_controls(2), Inflow(270.0, 9.0), spec).farm_power
    assert p > greedy
    assert c.yaw_deg[0] != 0.0


def test_three_turbines_beat_coordinate_search(spec):
    layout = Layout([0.0, 600.0, 1200.0], [0.0, 20.0, -10.0])
    _, joint = control_grid_search(layout, Inflow(270.0, 9.0), spec)
    # add far-away inert turbines to force the coordinate-descent branch
    padded = Layout([0.0, 600.0, 1200.0, 0.0], [0.0, 20.0, -10.0, 1700.0])
    c4, p4 = control_grid_search(padded, Inflow(270.0, 9.0), spec)
    alone = farm_power(Layout([0.0], [1700.0]), greedy_controls(1), Inflow(270.0, 9.0), spec).farm_power
    assert p4 - alone <= joint * (1 + 1e-12)
    assert p4 >= farm_power(padded, greedy_controls(4), Inflow(270.0, 9.0), spec).farm_power


def test_too_large(spec):
    layout = Layout(np.arange(11) * 600.0, np.zeros(11))
    with pytest.raises(OracleTooLargeError):
        control_grid_search(layout, Inflow(), spec)


def test_grid_search_deterministic(spec):
    layout = Layout([0.0, 500.0, 1000.0], [0.0, 0.0, 40.0])
    a = control_grid_search(layout, Inflow(265.0, 9.0), spec)
    b = control_grid_search(layout, Inflow(265.0, 9.0), spec)
    assert a[1] == b[1] and np.array_equal(a[0].yaw_deg, b[0].yaw_deg)


def test_solver_not_worse_than_grid(spec):
    layout = Layout([0.0, 630.0, 1260.0], [0.0, 15.0, 0.0])
    _, p_grid = control_grid_search(layout, Inflow(270.0, 9.0), spec)
    _, p_opt = optimize_controls(layout, Inflow(270.0, 9.0), spec)
    assert p_opt >= p_grid * (1 - 1e-3)


def test_sweep_symmetric_row(spec):
    spec = FarmSpec(site_bounds=((0.0, 2000.0), (-100.0, 100.0)))
    prob = LayoutProblem(spec, WindRose([90.0, 270.0], [0.5, 0.5]))
    grid = np.arange(600.0, 1400.0 + 1e-9, 10.0)
    res = sweep_position(Layout([0.0, 1000.0, 2000.0], [0.0, 0.0, 0.0]), 1, "x", grid, prob)
    np.testing.assert_allclose(res.aep_mwh, res.aep_mwh[::-1], rtol=1e-12)
    assert res.policy == "greedy"
    assert isinstance(res.controls_at_argmax, ControlPlan)


def test_sweep_policies_dominate(corridor):
    layout, cfg = corridor
    prob = LayoutProblem(cfg.spec, WindRose.single(270.0), control_options=ControlSolveOptions(multistart=2))
    grid = np.array([600.0, 800.0])
    greedy = sweep_position(layout, 1, "x", grid, prob, max_step=200.0)
    gridded = sweep_position(layout, 1, "x", grid, prob, policy="grid", max_step=200.0)
    solved = sweep_position(layout, 1, "x", grid, prob, policy="solver", max_step=200.0)
    assert np.all(gridded.aep_mwh >= greedy.aep_mwh)
    assert np.all(solved.aep_mwh >= greedy.aep_mwh)
    lay = layout.copy()
    lay.x[1] = gridded.argmax
    plan = gridded.controls_at_argmax
    assert 1e3 * annual_energy_gwh(lay, plan, prob.rose, prob.spec) == pytest.approx(gridded.aep_mwh.max(), rel=1e-12)


def test_sweep_validation(corridor):
    layout, cfg = corridor
    prob = LayoutProblem(cfg.spec, WindRose.single(270.0))
    with pytest.raises(ValueError, match="step"):
        sweep_position(layout, 1, "x", [100.0, 200.0], prob)
    with pytest.raises(ValueError, match="site"):
        sweep_position(layout, 1, "x", [1100.0, 1105.0], prob)
    with pytest.raises(ValueError):
        sweep_position(layout, 1, "z", [100.0], prob)
    with pytest.raises(ValueError):
        sweep_position(layout, 1, "x", [100.0], prob, policy="magic")
    with pytest.raises(ValueError):
        SweepResult(np.array([2.0, 1.0]), np.zeros(2), 1.0, ControlPlan.greedy(1, 1), "greedy")


def test_sweep_csv(tmp_path):
    write_sweep_csv(tmp_path / "s.csv", [1.0, 2.0], {"greedy": [3.0, 4.0], "optimized": [5.0, 6.5]})
    rows = list(csv.reader((tmp_path / "s.csv").open()))
    assert rows[0] == ["position_m", "aep_greedy_mwh", "aep_optimized_mwh"]
    assert rows[2] == ["2.0", "4.0", "6.5"]


def test_direct_joint_solve_small(corridor):
    layout, cfg = corridor
    prob = single_scenario_problem(
        LayoutProblem(cfg.spec, WindRose.uniform(4), movable=cfg.movable,
                      control_options=ControlSolveOptions(multistart=2)), 270.0)
    assert prob.rose.n_scenarios == 1
    lay, plan, value = direct_joint_solve(prob, layout, random_starts=1)
    assert is_feasible(lay, cfg.spec)
    assert lay.x[0] == 0.0 and lay.x[2] == 1100.0
    assert value == pytest.approx(annual_energy_gwh(lay, plan, prob.rose, prob.spec), rel=1e-12)
    greedy = annual_energy_gwh(layout, ControlPlan.greedy(1, 3), prob.rose, prob.spec)
    assert value > greedy
