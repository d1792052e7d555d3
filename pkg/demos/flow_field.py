"""
Looking at a steered wake
=========================

One turbine pair at 7 rotor diameters.  We first run both greedily, then let
the optimizer pick yaw and induction, and compare the hub-height velocity
along a crosswind line just in front of the downstream rotor.
"""
import numpy as np

from windjoint.control import greedy_controls, optimize_controls
from windjoint.wake import FarmSpec, Inflow, Layout, farm_power, velocity_field

spec = FarmSpec()
D = spec.rotor_diameter
layout = Layout([0.0, 7 * D], [0.0, 0.0])
inflow = Inflow(270.0, 9.0)

greedy = greedy_controls(2)
steered, p_opt = optimize_controls(layout, inflow, spec)
p_greedy = farm_power(layout, greedy, inflow, spec).farm_power

print(f"greedy farm power    {p_greedy / 1e6:6.3f} MW")
print(f"optimized farm power {p_opt / 1e6:6.3f} MW  (+{100 * (p_opt / p_greedy - 1):.1f}%)")
print(f"upstream yaw {steered.yaw_deg[0]:.1f} deg, induction {steered.induction[0]:.3f}")

# crosswind profile one metre upstream of the second rotor
ys = np.linspace(-2 * D, 2 * D, 17)
xs = np.full_like(ys, 7 * D - 1.0)
u_greedy = velocity_field(xs, ys, layout, greedy, inflow, spec)
u_steered = velocity_field(xs, ys, layout, steered, inflow, spec)
print("   y [m]   greedy   steered   [m/s]")
for y, a, b in zip(ys, u_greedy, u_steered):
    print(f"{y:8.1f} {a:8.3f} {b:9.3f}")

# Full field for plotting: x from -2D to 15D, y from -3D to 3D
gx, gy = np.meshgrid(np.linspace(-2 * D, 15 * D, 200), np.linspace(-3 * D, 3 * D, 80))
field = velocity_field(gx, gy, layout, steered, inflow, spec)

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(7, 2.8))
    im = ax.pcolormesh(gx / D, gy / D, field, shading="auto", cmap="viridis")
    ax.plot(layout.x / D, layout.y / D, "w|", markersize=18)
    ax.set_xlabel("x / D")
    ax.set_ylabel("y / D")
    fig.colorbar(im, label="u [m/s]")
    fig.tight_layout()
    fig.savefig("flow_field.png", dpi=120)
    print("saved flow_field.png")
