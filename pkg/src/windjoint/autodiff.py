"""Algorithmic derivatives of farm power through JAX.

Importing this module switches JAX to 64-bit floats; the finite-difference
checks and the optimizers rely on double precision.
"""
from __future__ import annotations

from functools import lru_cache

import jax
import jax.numpy as jnp
import numpy as np

from .wake import Controls, FarmSpec, Inflow, Layout, _power_kernel

jax.config.update("jax_enable_x64", True)


@lru_cache(maxsize=32)
def _compiled(spec: FarmSpec):
    def total(x, y, yaw, induction, direction, speed):
        _, power = _power_kernel(jnp, x, y, yaw, induction, direction, speed, spec)
        return jnp.sum(power)

    value_and_grad = jax.jit(jax.value_and_grad(total, argnums=(0, 1, 2, 3)))
    # weighted sum over scenarios, for stacked per-scenario variables
    def weighted(x, y, yaw, induction, directions, speed, weights):
        _, power = _power_kernel(jnp, x, y, yaw, induction, directions, speed, spec)
        return jnp.sum(weights * jnp.sum(power, axis=-1))

    weighted_vg = jax.jit(jax.value_and_grad(weighted, argnums=(0, 1, 2, 3)))
    return value_and_grad, weighted_vg


def farm_power_and_gradient(x, y, yaw_deg, induction, direction_deg, speed, spec: FarmSpec):
    """Farm power (W) and its gradient with respect to ``x, y, yaw, induction``.

    Yaw derivatives are per degree.  Returns ``(value, (gx, gy, gyaw, galpha))``
    as numpy data.
    """
    vg, _ = _compiled(spec)
    value, grads = vg(
        jnp.asarray(x, dtype=jnp.float64), jnp.asarray(y, dtype=jnp.float64),
        jnp.asarray(yaw_deg, dtype=jnp.float64), jnp.asarray(induction, dtype=jnp.float64),
        jnp.float64(direction_deg), jnp.float64(speed),
    )
    return float(value), tuple(np.asarray(g) for g in grads)


def layout_gradient(layout: Layout, controls: Controls, inflow: Inflow, spec: FarmSpec):
    """Convenience wrapper returning a dict of gradients for one evaluation."""
    value, (gx, gy, gg, ga) = farm_power_and_gradient(
        layout.x, layout.y, controls.yaw_deg, controls.induction,
        inflow.direction_deg, inflow.speed, spec,
    )
    return value, {"x": gx, "y": gy, "yaw_deg": gg, "induction": ga}


def weighted_power_and_gradient(x, y, yaw_deg, induction, directions_deg, speed, weights,
                                spec: FarmSpec):
    """``sum_w weights[w] * P_WF(x[w], y[w], yaw[w], induction[w], theta[w])``.

    All per-scenario arrays have shape ``(n_scenarios, n_turbines)``.
    """
    _, vg = _compiled(spec)
    value, grads = vg(
        jnp.asarray(x, dtype=jnp.float64), jnp.asarray(y, dtype=jnp.float64),
        jnp.asarray(yaw_deg, dtype=jnp.float64), jnp.asarray(induction, dtype=jnp.float64),
        jnp.asarray(directions_deg, dtype=jnp.float64), jnp.float64(speed),
        jnp.asarray(weights, dtype=jnp.float64),
    )
    return float(value), tuple(np.asarray(g) for g in grads)
