"""Gaussian wake model with yaw deflection and farm power evaluation.

The model is two dimensional: each upstream turbine casts a Gaussian velocity
deficit in the horizontal plane, deflected laterally by rotor rotation and yaw
misalignment.  Deficits from several upstream turbines are combined by root
sum of squares, all expressed relative to the freestream speed.

Angles are in degrees at every public boundary.  Wind direction follows the
meteorological convention (the direction the wind blows *from*, clockwise
from north), with ``x`` pointing east and ``y`` pointing north.

Yaw sign: a positive yaw angle steers the wake towards negative crosswind
coordinates, i.e. to the same side as the rotation-induced drift
``a_d * D + b_d * x`` for the default (negative) tuning constants.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_SQRT2 = np.sqrt(2.0)
_E12 = np.exp(1.0 / 12.0)
_E3 = np.exp(1.0 / 3.0)
# near-wake length coefficients (Bastankhah & Porte-Agel closed form)
_NW_ALPHA = 2.32
_NW_BETA = 0.154
# downwind gaps below this count as ties (trig rounding at exact compass points)
TIE_TOLERANCE = 1e-9


class WakeDomainError(ValueError):
    """Raised when wake formulas are evaluated outside their domain."""


@dataclass(frozen=True)
class FarmSpec:
    """Turbine, wake and site parameters.

    Defaults reproduce the NREL 5 MW style turbine of the case studies
    (``D = 126 m``) with the wake tuning constants used there.  Site bounds
    are ``((x_l, x_u), (y_l, y_u))`` in metres.
    """

    rotor_diameter: float = 126.0
    air_density: float = 1.29
    p_p: float = 1.88
    k_y: float = 0.0229
    a_d: float = -0.0356
    b_d: float = -0.01
    gamma_min_deg: float = -30.0
    gamma_max_deg: float = 30.0
    alpha_min: float = 0.1
    alpha_max: float = 1.0 / 3.0
    min_spacing: float = 504.0
    site_bounds: tuple = ((0.0, 1900.0), (0.0, 1700.0))
    turbulence_intensity: float = 0.06
    turbine_count: int | None = None
    rotor_points: int = 9
    rotor_radius_fraction: float = 0.7

    def __post_init__(self):
        (xl, xu), (yl, yu) = self.site_bounds
        object.__setattr__(
            self, "site_bounds", ((float(xl), float(xu)), (float(yl), float(yu)))
        )
        checks = [
            (self.rotor_diameter > 0, "rotor_diameter must be positive"),
            (self.air_density > 0, "air_density must be positive"),
            (self.gamma_min_deg < self.gamma_max_deg, "gamma_min_deg must be < gamma_max_deg"),
            (-90 < self.gamma_min_deg and self.gamma_max_deg < 90, "yaw bounds must lie in (-90, 90)"),
            (0 < self.alpha_min < self.alpha_max <= 1.0 / 3.0 + 1e-12,
             "induction bounds must satisfy 0 < alpha_min < alpha_max <= 1/3"),
            (self.min_spacing >= 0, "min_spacing must be nonnegative"),
            (xl < xu and yl < yu, "site bounds must satisfy x_l < x_u and y_l < y_u"),
            (self.turbulence_intensity > 0, "turbulence_intensity must be positive"),
            (self.k_y > 0, "k_y must be positive"),
            (self.turbine_count is None or self.turbine_count >= 1, "turbine_count must be >= 1"),
            (self.rotor_points >= 1, "rotor_points must be >= 1"),
            (0 <= self.rotor_radius_fraction <= 1, "rotor_radius_fraction must lie in [0, 1]"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(message)

    @property
    def rotor_area(self) -> float:
        return np.pi / 4.0 * self.rotor_diameter**2

    @property
    def lower_bounds(self) -> np.ndarray:
        return np.array([self.site_bounds[0][0], self.site_bounds[1][0]])

    @property
    def upper_bounds(self) -> np.ndarray:
        return np.array([self.site_bounds[0][1], self.site_bounds[1][1]])

    @cached_property
    def rotor_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Lateral sample offsets (metres, unyawed) and weights on the rotor.

        Centre point plus ``rotor_points - 1`` points on a circle of radius
        ``rotor_radius_fraction * D / 2``.  The wake has no vertical
        structure, so points sharing a lateral offset are merged.
        """
        n = self.rotor_points
        radius = self.rotor_radius_fraction * self.rotor_diameter / 2.0
        angles = 2.0 * np.pi * np.arange(n - 1) / max(n - 1, 1)
        raw = np.concatenate([[0.0], radius * np.cos(angles)])
        keys = np.round(raw / max(radius, 1.0), 12)
        unique, inverse = np.unique(keys, return_inverse=True)
        offsets = np.array([raw[inverse == k].mean() for k in range(unique.size)])
        weights = np.bincount(inverse, minlength=unique.size) / n
        return offsets, weights

    def to_dict(self) -> dict:
        return {
            "rotor_diameter": self.rotor_diameter,
            "air_density": self.air_density,
            "p_p": self.p_p,
            "k_y": self.k_y,
            "a_d": self.a_d,
            "b_d": self.b_d,
            "gamma_min_deg": self.gamma_min_deg,
            "gamma_max_deg": self.gamma_max_deg,
            "alpha_min": self.alpha_min,
            "alpha_max": self.alpha_max,
            "min_spacing": self.min_spacing,
            "site_bounds": [list(self.site_bounds[0]), list(self.site_bounds[1])],
            "turbulence_intensity": self.turbulence_intensity,
            "turbine_count": self.turbine_count,
            "rotor_points": self.rotor_points,
            "rotor_radius_fraction": self.rotor_radius_fraction,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FarmSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown FarmSpec keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "site_bounds" in kwargs:
            (xl, xu), (yl, yu) = kwargs["site_bounds"]
            kwargs["site_bounds"] = ((xl, xu), (yl, yu))
        return cls(**kwargs)


@dataclass
class Layout:
    """Turbine coordinates in metres."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have the same length")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("layout coordinates must be finite")

    def __len__(self) -> int:
        return self.x.size

    def copy(self) -> "Layout":
        return Layout(self.x.copy(), self.y.copy())

    @property
    def xy(self) -> np.ndarray:
        return np.stack([self.x, self.y], axis=-1)


@dataclass(frozen=True)
class TurbineControl:
    yaw_deg: float = 0.0
    induction: float = 1.0 / 3.0


@dataclass
class Controls:
    """Yaw angles (degrees) and axial induction factors for every turbine."""

    yaw_deg: np.ndarray
    induction: np.ndarray

    def __post_init__(self):
        self.yaw_deg = np.asarray(self.yaw_deg, dtype=float).reshape(-1)
        self.induction = np.asarray(self.induction, dtype=float).reshape(-1)
        if self.yaw_deg.shape != self.induction.shape:
            raise ValueError("yaw and induction must have the same length")

    @classmethod
    def from_turbines(cls, controls: Sequence[TurbineControl]) -> "Controls":
        return cls([c.yaw_deg for c in controls], [c.induction for c in controls])

    def __len__(self) -> int:
        return self.yaw_deg.size

    def __getitem__(self, i: int) -> TurbineControl:
        return TurbineControl(float(self.yaw_deg[i]), float(self.induction[i]))

    def __iter__(self) -> Iterator[TurbineControl]:
        return (self[i] for i in range(len(self)))

    def copy(self) -> "Controls":
        return Controls(self.yaw_deg.copy(), self.induction.copy())


@dataclass(frozen=True)
class Inflow:
    direction_deg: float = 270.0
    speed: float = 9.0

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError("freestream speed must be positive")
        object.__setattr__(self, "direction_deg", float(self.direction_deg) % 360.0)


@dataclass
class FlowResult:
    effective_velocity: np.ndarray
    power: np.ndarray
    farm_power: float
    near_wake_pairs: int = 0
    order: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


# -- closed-form pieces ------------------------------------------------------


def _check_induction(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(alpha)) or np.any(alpha <= 0) or np.any(alpha >= 1):
        raise WakeDomainError("axial induction must lie in (0, 1)")
    return alpha


def thrust_coefficient(alpha):
    """Thrust coefficient ``4 a (1 - a)``."""
    alpha = _check_induction(alpha)
    return 4.0 * alpha * (1.0 - alpha)


def power_coefficient(alpha):
    """Power coefficient ``4 a (1 - a)^2``."""
    alpha = _check_induction(alpha)
    return 4.0 * alpha * (1.0 - alpha) ** 2


def sigma_y0(rotor_diameter, yaw_deg):
    """Initial lateral wake width ``D cos(gamma) / (2 sqrt 2)``."""
    if rotor_diameter <= 0:
        raise WakeDomainError("rotor diameter must be positive")
    return rotor_diameter * np.cos(np.deg2rad(yaw_deg)) / (2.0 * _SQRT2)


def sigma_y(x, x0, k_y, sigma0):
    """Far-wake lateral width, growing linearly from ``sigma0`` at ``x0``.

    Inside the near wake (``x < x0``) the width is held at ``sigma0``.
    """
    return sigma0 + np.maximum(np.asarray(x, dtype=float) - x0, 0.0) * k_y


def near_wake_length(rotor_diameter, yaw_deg, ct, turbulence_intensity):
    """Length of the near-wake region in metres.

    ``x0 / D = cos(gamma) (1 + sqrt(1 - C_T)) /
    (sqrt(2) [2.32 I + 0.154 (1 - sqrt(1 - C_T))])``
    """
    ct = np.asarray(ct, dtype=float)
    if np.any(ct <= 0) or np.any(ct > 1):
        raise WakeDomainError("thrust coefficient must lie in (0, 1]")
    if np.any(np.asarray(turbulence_intensity) <= 0):
        raise WakeDomainError("turbulence intensity must be positive")
    if rotor_diameter <= 0:
        raise WakeDomainError("rotor diameter must be positive")
    root = np.sqrt(1.0 - ct)
    return (
        rotor_diameter
        * np.cos(np.deg2rad(yaw_deg))
        * (1.0 + root)
        / (_SQRT2 * (_NW_ALPHA * turbulence_intensity + _NW_BETA * (1.0 - root)))
    )


def skew_angle(yaw_deg, ct):
    """Initial wake skew angle in radians, odd in the yaw angle."""
    g = np.deg2rad(np.asarray(yaw_deg, dtype=float))
    if np.any(np.abs(g) >= np.pi / 2):
        raise WakeDomainError("yaw must lie strictly inside (-90, 90) degrees")
    radicand = 1.0 - np.asarray(ct, dtype=float) * np.cos(g)
    if np.any(radicand < 0):
        raise WakeDomainError("C_T cos(gamma) must not exceed 1")
    return 0.3 * g / np.cos(g) * (1.0 - np.sqrt(radicand))


def wake_deflection(x, yaw_deg, ct, sig, sig0, spec: FarmSpec):
    """Lateral offset of the wake centreline at downstream distance ``x``.

    Far wake (``x >= x0``): rotation drift ``a_d D + b_d x`` minus the yaw
    deflection ``tan(phi) x0 + phi / 5.2 * E0 * sqrt(sigma0 / (k_y C_T)) * ln(...)``.
    Inside the near wake the yaw deflection grows linearly, ``tan(phi) x``,
    which meets the far-wake expression continuously at ``x0``.
    """
    x = np.asarray(x, dtype=float)
    ct = np.asarray(ct, dtype=float)
    sqrt_ct = np.sqrt(ct)
    ratio = np.sqrt(np.asarray(sig, dtype=float) / sig0)
    arg = ((1.6 + sqrt_ct) * (1.6 * ratio - sqrt_ct)) / ((1.6 - sqrt_ct) * (1.6 * ratio + sqrt_ct))
    if np.any(arg <= 0):
        raise WakeDomainError("nonpositive logarithm argument in wake deflection")
    phi = skew_angle(yaw_deg, ct)
    x0 = near_wake_length(spec.rotor_diameter, yaw_deg, ct, spec.turbulence_intensity)
    c0 = 1.0 - np.sqrt(1.0 - ct)
    e0 = c0**2 - 3.0 * _E12 * c0 + 3.0 * _E3
    far = phi / 5.2 * e0 * np.sqrt(sig0 / (spec.k_y * ct)) * np.log(arg)
    yaw_shift = np.tan(phi) * np.minimum(x, x0) + far
    return spec.a_d * spec.rotor_diameter + spec.b_d * x - yaw_shift


def single_wake_deficit(x, y, control: TurbineControl, spec: FarmSpec):
    """Fractional velocity deficit at ``(x, y)`` behind one turbine.

    ``x`` is downstream and ``y`` crosswind distance from the rotor centre.
    Points at or upstream of the rotor see no deficit.
    """
    x = np.asarray(x, dtype=float)
    ct = thrust_coefficient(control.induction)
    s0 = sigma_y0(spec.rotor_diameter, control.yaw_deg)
    x0 = near_wake_length(spec.rotor_diameter, control.yaw_deg, ct, spec.turbulence_intensity)
    xp = np.maximum(x, 0.0)
    sig = sigma_y(xp, x0, spec.k_y, s0)
    radicand = 1.0 - s0 / sig * ct
    if np.any(radicand < 0):
        raise WakeDomainError("negative radicand in wake deficit amplitude")
    centre = wake_deflection(xp, control.yaw_deg, ct, sig, s0, spec)
    deficit = (1.0 - np.sqrt(radicand)) * np.exp(-((y - centre) ** 2) / (2.0 * sig**2))
    return np.where(x > TIE_TOLERANCE, deficit, 0.0)


def combine_deficits(deficits) -> float:
    """Root-sum-square combination, clamped to at most 1."""
    d = np.asarray(deficits, dtype=float)
    if d.size == 0:
        return 0.0
    return float(min(np.sqrt(np.sum(d**2)), 1.0))


def turbine_power(velocity, control: TurbineControl, spec: FarmSpec) -> float:
    """Actuator-disk power in watts, with the ``cos(gamma)^p_p`` yaw loss."""
    if velocity < 0:
        raise WakeDomainError("velocity must be nonnegative")
    cp = power_coefficient(control.induction)
    return float(
        0.5 * spec.air_density * spec.rotor_area * cp
        * np.cos(np.deg2rad(control.yaw_deg)) ** spec.p_p * velocity**3
    )


def wind_frame(x, y, direction_deg):
    """Rotate site coordinates into (downwind, crosswind) coordinates."""
    theta = np.deg2rad(direction_deg)
    downwind = -(x * np.sin(theta) + y * np.cos(theta))
    crosswind = x * np.cos(theta) - y * np.sin(theta)
    return downwind, crosswind


def rotor_averaged_velocity(i: int, downwind, crosswind, controls: Controls,
                            inflow: Inflow, spec: FarmSpec) -> float:
    """Rotor-averaged speed at turbine ``i`` from its strictly upstream turbines.

    Coordinates must already be in the wind frame.  This is the scalar
    reference path; :func:`farm_power` uses a vectorised kernel.
    """
    offsets, weights = spec.rotor_rule
    points = crosswind[i] + offsets * np.cos(np.deg2rad(controls.yaw_deg[i]))
    upstream = [j for j in range(len(downwind)) if downwind[i] - downwind[j] > TIE_TOLERANCE]
    speeds = []
    for p in points:
        deficits = [
            single_wake_deficit(downwind[i] - downwind[j], p - crosswind[j], controls[j], spec)
            for j in upstream
        ]
        speeds.append(inflow.speed * (1.0 - combine_deficits(deficits)))
    return float(np.dot(weights, speeds))


# -- vectorised kernel ---------------------------------------------------------


def _power_kernel(xp, x, y, yaw_deg, induction, direction_deg, speed, spec: FarmSpec):
    """Per-turbine rotor-averaged speed and power.

    Written against the array namespace ``xp`` (numpy or jax.numpy) so one
    implementation serves plain evaluation, batched evaluation and automatic
    differentiation.  Inputs broadcast over leading axes; the last axis
    indexes turbines.  No validation happens here.
    """
    D = spec.rotor_diameter
    ky = spec.k_y
    offsets, weights = spec.rotor_rule

    theta = xp.deg2rad(xp.asarray(direction_deg))[..., None]
    downwind = -(x * xp.sin(theta) + y * xp.cos(theta))
    crosswind = x * xp.cos(theta) - y * xp.sin(theta)

    g = xp.deg2rad(yaw_deg)
    cos_g = xp.cos(g)
    ct = 4.0 * induction * (1.0 - induction)
    root = xp.sqrt(1.0 - ct)
    sig0 = D * cos_g / (2.0 * _SQRT2)
    x0 = D * cos_g * (1.0 + root) / (
        _SQRT2 * (_NW_ALPHA * spec.turbulence_intensity + _NW_BETA * (1.0 - root))
    )
    phi = 0.3 * g / cos_g * (1.0 - xp.sqrt(1.0 - ct * cos_g))
    c0 = 1.0 - root
    e0 = c0**2 - 3.0 * _E12 * c0 + 3.0 * _E3

    # pair axes: [..., downstream i, upstream j]
    dx = downwind[..., :, None] - downwind[..., None, :]
    upstream = dx > TIE_TOLERANCE
    dx = xp.where(upstream, dx, 0.0)
    s0_j = sig0[..., None, :]
    x0_j = x0[..., None, :]
    ct_j = ct[..., None, :]
    phi_j = phi[..., None, :]
    sig = s0_j + xp.maximum(dx - x0_j, 0.0) * ky
    sqrt_ct = xp.sqrt(ct_j)
    ratio = xp.sqrt(sig / s0_j)
    log_term = xp.log(
        (1.6 + sqrt_ct) * (1.6 * ratio - sqrt_ct) / ((1.6 - sqrt_ct) * (1.6 * ratio + sqrt_ct))
    )
    yaw_shift = xp.tan(phi_j) * xp.minimum(dx, x0_j) + (
        phi_j / 5.2 * e0[..., None, :] * xp.sqrt(s0_j / (ky * ct_j)) * log_term
    )
    centre = spec.a_d * D + spec.b_d * dx - yaw_shift
    amplitude = 1.0 - xp.sqrt(1.0 - s0_j / sig * ct_j)

    points = crosswind[..., :, None] + offsets * cos_g[..., :, None]
    dy = points[..., :, None, :] - crosswind[..., None, :, None] - centre[..., None]
    deficit = amplitude[..., None] * xp.exp(-0.5 * (dy / sig[..., None]) ** 2)
    deficit = xp.where(upstream[..., None], deficit, 0.0)

    total = xp.sum(deficit**2, axis=-2)
    positive = total > 0
    combined = xp.where(positive, xp.sqrt(xp.where(positive, total, 1.0)), 0.0)
    combined = xp.minimum(combined, 1.0)
    velocity = xp.asarray(speed)[..., None] * xp.sum(weights * (1.0 - combined), axis=-1)

    cp = 4.0 * induction * (1.0 - induction) ** 2
    power = 0.5 * spec.air_density * spec.rotor_area * cp * cos_g**spec.p_p * velocity**3
    return velocity, power


def farm_power_batch(x, y, yaw_deg, induction, direction_deg, speed, spec: FarmSpec):
    """Total farm power (W) for broadcast batches of layouts, controls and inflows.

    ``x``, ``y``, ``yaw_deg`` and ``induction`` share a trailing turbine axis;
    ``direction_deg`` and ``speed`` broadcast against the leading axes.
    """
    _, power = _power_kernel(
        np, np.asarray(x, float), np.asarray(y, float), np.asarray(yaw_deg, float),
        np.asarray(induction, float), direction_deg, speed, spec,
    )
    return power.sum(axis=-1)


def turbine_powers_batch(x, y, yaw_deg, induction, direction_deg, speed, spec: FarmSpec):
    """Like :func:`farm_power_batch` but returns ``(velocity, power)`` per turbine."""
    return _power_kernel(
        np, np.asarray(x, float), np.asarray(y, float), np.asarray(yaw_deg, float),
        np.asarray(induction, float), direction_deg, speed, spec,
    )


def check_controls(controls: Controls, spec: FarmSpec, n: int | None = None):
    if n is not None and len(controls) != n:
        raise ValueError(f"expected {n} turbine controls, got {len(controls)}")
    tol = 1e-9
    for i, (g, a) in enumerate(zip(controls.yaw_deg, controls.induction)):
        if not (np.isfinite(g) and np.isfinite(a)):
            raise ValueError(f"turbine {i}: non-finite control")
        if g < spec.gamma_min_deg - tol or g > spec.gamma_max_deg + tol:
            raise ValueError(
                f"turbine {i}: yaw {g} outside [{spec.gamma_min_deg}, {spec.gamma_max_deg}]"
            )
        if a < spec.alpha_min - tol or a > spec.alpha_max + tol:
            raise ValueError(
                f"turbine {i}: induction {a} outside [{spec.alpha_min}, {spec.alpha_max}]"
            )


def farm_power(layout: Layout, controls: Controls, inflow: Inflow, spec: FarmSpec) -> FlowResult:
    """Evaluate the wind farm for one inflow.

    Raises ``ValueError`` naming the turbine index when a control violates its
    bounds.
    """
    n = len(layout)
    if spec.turbine_count is not None and n != spec.turbine_count:
        raise ValueError(f"layout has {n} turbines, spec expects {spec.turbine_count}")
    check_controls(controls, spec, n)
    velocity, power = turbine_powers_batch(
        layout.x, layout.y, controls.yaw_deg, controls.induction,
        inflow.direction_deg, inflow.speed, spec,
    )
    downwind, _ = wind_frame(layout.x, layout.y, inflow.direction_deg)
    ct = thrust_coefficient(controls.induction)
    x0 = near_wake_length(spec.rotor_diameter, controls.yaw_deg, ct, spec.turbulence_intensity)
    dx = downwind[:, None] - downwind[None, :]
    near = int(np.sum((dx > TIE_TOLERANCE) & (dx < x0[None, :])))
    if near:
        logger.debug("%d turbine pairs inside the near wake; width held at sigma_y0", near)
    if not np.all(np.isfinite(power)):
        raise WakeDomainError("non-finite turbine power")
    return FlowResult(
        effective_velocity=velocity,
        power=power,
        farm_power=float(power.sum()),
        near_wake_pairs=near,
        order=np.argsort(downwind, kind="stable"),
    )


def velocity_field(px, py, layout: Layout, controls: Controls, inflow: Inflow, spec: FarmSpec):
    """Point wind speed at arbitrary site coordinates ``(px, py)``.

    Every turbine strictly upstream of a point contributes its deficit.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    shape = np.broadcast(px, py).shape
    pdown, pcross = wind_frame(px.reshape(-1), py.reshape(-1), inflow.direction_deg)
    tdown, tcross = wind_frame(layout.x, layout.y, inflow.direction_deg)
    total = np.zeros(pdown.size)
    for j in range(len(layout)):
        d = single_wake_deficit(pdown - tdown[j], pcross - tcross[j], controls[j], spec)
        total += d**2
    speed = inflow.speed * (1.0 - np.minimum(np.sqrt(total), 1.0))
    return speed.reshape(shape)
