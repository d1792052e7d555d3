import numpy as np
import pytest

from windjoint.control import ControlSolveOptions
from windjoint.layout import (
    LayoutProblem, PsoOptions, aep, control_only, is_feasible, layout_only, min_pair_distance,
    pso_layout, repair_layout, sequential_optimize, spacing_penalty, spacing_penalty_batch,
    spacing_penalty_gradient,
)
from windjoint.scenarios import ControlPlan, WindRose
from windjoint.wake import FarmSpec, Layout

QUICK_PSO = PsoOptions(swarm_size=12, iterations=25, restarts=2)
QUICK_CONTROL = ControlSolveOptions(multistart=2)


def _rotate_cw(layout, deg):
    r = np.deg2rad(deg)
    return Layout(layout.x * np.cos(r) + layout.y * np.sin(r),
                  -layout.x * np.sin(r) + layout.y * np.cos(r))


def test_problem_validation(spec):
    rose = WindRose.single(270.0)
    for kwargs in [dict(hours_per_year=0), dict(penalty_factor=-1), dict(policy="smart"),
                   dict(movable=["xyz"])]:
        with pytest.raises(ValueError):
            LayoutProblem(spec, rose, **kwargs)
    with pytest.raises(ValueError):
        LayoutProblem(spec, rose, movable=["x"]).free_mask(2)


def test_single_turbine_aep(spec):
    p_free = 3474356.9332981557
    for rose in [WindRose.single(10.0), WindRose.uniform(12)]:
        prob = LayoutProblem(spec, rose)
        assert aep(Layout([5.0], [5.0]), "greedy", prob) == pytest.approx(8760 * p_free / 1e9, rel=1e-12)


def test_uniform_rose_rotation_by_one_bin(spec):
    prob = LayoutProblem(spec, WindRose.uniform(12))
    layout = Layout([0.0, 700.0, 1400.0, 300.0], [0.0, 100.0, -50.0, 800.0])
    base = aep(layout, "greedy", prob)
    assert aep(_rotate_cw(layout, 30.0), "greedy", prob) == pytest.approx(base, rel=1e-6)


def test_aep_policies(spec):
    prob = LayoutProblem(spec, WindRose([270.0, 0.0], [0.8, 0.2]), control_options=QUICK_CONTROL)
    layout = Layout([0.0, 600.0, 1200.0], [0.0, 0.0, 0.0])
    greedy = aep(layout, "greedy", prob)
    assert aep(layout, ControlPlan.greedy(2, 3), prob) == greedy
    assert aep(layout, "optimized", prob) > greedy
    with pytest.raises(ValueError):
        aep(layout, "best", prob)


def test_spacing_penalty_closed_form(spec):
    assert spacing_penalty(Layout([0.0, 504.0, 1008.0], [0.0, 0.0, 0.0]), spec) == 0.0
    assert spacing_penalty(Layout([3.0, 3.0], [4.0, 4.0]), spec, 1e5) == 1e5 * 504.0**2
    # three coincident turbines: three unordered pairs
    assert spacing_penalty(Layout([0.0] * 3, [0.0] * 3), spec, 2.0) == 3 * 2.0 * 504.0**2
    # continuity at the boundary
    eps = 1e-6
    inside = spacing_penalty(Layout([0.0, 504.0 - eps], [0.0, 0.0]), spec)
    assert 0 < inside < 1e5 * 2 * 504.0 * eps * 1.01


def test_spacing_penalty_gradient():
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0, 800, 5), rng.uniform(0, 800, 5)
    gx, gy = spacing_penalty_gradient(x, y, 504.0, 1e5)
    h = 1e-4
    for k in range(5):
        e = np.zeros(5)
        e[k] = h
        fd_x = (spacing_penalty_batch(x + e, y, 504.0, 1e5) - spacing_penalty_batch(x - e, y, 504.0, 1e5)) / (2 * h)
        fd_y = (spacing_penalty_batch(x, y + e, 504.0, 1e5) - spacing_penalty_batch(x, y - e, 504.0, 1e5)) / (2 * h)
        assert gx[k] == pytest.approx(fd_x, rel=1e-6, abs=1e-3)
        assert gy[k] == pytest.approx(fd_y, rel=1e-6, abs=1e-3)


def test_feasibility_helpers(spec):
    assert min_pair_distance(Layout([0.0, 3.0], [0.0, 4.0])) == 5.0
    assert min_pair_distance(Layout([0.0], [0.0])) == np.inf
    assert is_feasible(Layout([0.0, 600.0], [0.0, 0.0]), spec)
    assert not is_feasible(Layout([0.0, 500.0], [0.0, 0.0]), spec)
    assert not is_feasible(Layout([-1.0, 600.0], [0.0, 0.0]), spec)


def test_repair_random_crowded_layouts(spec):
    rng = np.random.default_rng(42)
    for _ in range(30):
        layout = Layout(rng.uniform(0, 1900, 16), rng.uniform(0, 1700, 16))
        fixed = repair_layout(layout, spec)
        assert is_feasible(fixed, spec)
        again = repair_layout(layout, spec)
        assert np.array_equal(fixed.x, again.x) and np.array_equal(fixed.y, again.y)


def test_repair_keeps_feasible_layout(spec):
    layout = Layout([0.0, 600.0, 1200.0], [0.0, 0.0, 500.0])
    fixed = repair_layout(layout, spec)
    assert np.array_equal(fixed.x, layout.x) and np.array_equal(fixed.y, layout.y)


def test_repair_coincident_and_outside(spec):
    fixed = repair_layout(Layout([500.0, 500.0, 500.0, 3000.0], [500.0, 500.0, 500.0, -20.0]), spec)
    assert is_feasible(fixed, spec)


def test_repair_respects_fixed_coordinates(corridor):
    layout, cfg = corridor
    crowded = Layout([0.0, 300.0, 1100.0], [0.0, 0.0, 0.0])
    fixed = repair_layout(crowded, cfg.spec, cfg.movable)
    assert fixed.x[0] == 0.0 and fixed.x[2] == 1100.0
    assert np.all(fixed.y == 0.0)
    assert 504.0 <= fixed.x[1] <= 596.0
    assert is_feasible(fixed, cfg.spec)


def test_repair_reports_impossible(spec):
    tiny = FarmSpec(site_bounds=((0, 100), (0, 100)))
    with pytest.raises(RuntimeError, match="repair failed"):
        repair_layout(Layout([10.0, 20.0], [10.0, 20.0]), tiny)


def test_pso_single_turbine(spec):
    prob = LayoutProblem(spec, WindRose.uniform(4))
    res = pso_layout(prob, Layout([100.0], [100.0]), QUICK_PSO, seed=1)
    assert res.aep_gwh == pytest.approx(res.initial_aep_gwh, rel=1e-12)
    assert is_feasible(res.layout, spec)


def test_pso_corridor_goes_right(corridor):
    layout, cfg = corridor
    prob = LayoutProblem(cfg.spec, WindRose.single(270.0), movable=cfg.movable)
    res = pso_layout(prob, layout, QUICK_PSO, seed=0)
    assert 504.0 <= res.layout.x[1] <= 596.0
    assert res.layout.x[1] > 580.0
    assert res.aep_gwh >= res.initial_aep_gwh
    assert is_feasible(res.layout, cfg.spec)
    again = pso_layout(prob, layout, QUICK_PSO, seed=0)
    assert np.array_equal(again.layout.x, res.layout.x)


def test_pso_never_worse_than_initial(spec):
    rng = np.random.default_rng(3)
    prob = LayoutProblem(spec, WindRose([270.0, 200.0], [0.6, 0.4]))
    initial = Layout([0.0, 600.0, 1200.0, 0.0, 600.0, 1200.0], [0.0, 0.0, 0.0, 800.0, 800.0, 800.0])
    res = pso_layout(prob, initial, PsoOptions(swarm_size=8, iterations=5, restarts=1), seed=int(rng.integers(100)))
    assert res.aep_gwh >= res.initial_aep_gwh
    assert is_feasible(res.layout, spec)
    assert len(res.trace) == 5 and len(res.restart_best) == 1


def test_pipelines_order(corridor):
    layout, cfg = corridor
    prob = LayoutProblem(cfg.spec, WindRose([270.0, 90.0], [0.7, 0.3]), movable=cfg.movable,
                         control_options=QUICK_CONTROL)
    lo = layout_only(prob, layout, seed=0, pso_options=QUICK_PSO)
    seq = sequential_optimize(prob, layout, seed=0, pso_options=QUICK_PSO)
    co = control_only(prob, layout, seed=0)
    assert np.array_equal(lo.layout.x, seq.layout.x)
    assert seq.aep_gwh >= lo.aep_gwh
    assert seq.metadata["layout_only_aep_gwh"] == pytest.approx(lo.aep_gwh, rel=1e-12)
    assert co.aep_gwh >= co.metadata["greedy_aep_gwh"]
    for rep in (lo, seq, co):
        assert rep.metadata["feasible"]
        assert rep.recompute_aep() == pytest.approx(rep.aep_gwh, rel=1e-12)
