"""Wind roses, control plans, configuration files and optimization reports."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .wake import Controls, FarmSpec, Layout, farm_power_batch, check_controls

SCHEMA_VERSION = 1
HOURS_PER_YEAR = 8760.0


@dataclass
class WindRose:
    """Discrete wind-direction distribution at a single freestream speed."""

    directions_deg: np.ndarray
    probabilities: np.ndarray
    speed: float = 9.0

    def __post_init__(self):
        d = np.asarray(self.directions_deg, dtype=float).reshape(-1)
        p = np.asarray(self.probabilities, dtype=float).reshape(-1)
        if d.shape != p.shape or d.size == 0:
            raise ValueError("directions and probabilities must be non-empty and equal length")
        if np.any(~np.isfinite(d)) or np.any(d < 0) or np.any(d >= 360):
            raise ValueError("directions must lie in [0, 360)")
        if np.unique(d).size != d.size:
            raise ValueError("duplicate wind directions")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(p) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {math.fsum(p)!r}, expected 1")
        if not self.speed > 0:
            raise ValueError("speed must be positive")
        self.directions_deg = d
        self.probabilities = p
        self.speed = float(self.speed)

    @property
    def n_scenarios(self) -> int:
        return self.directions_deg.size

    def __len__(self) -> int:
        return self.n_scenarios

    def to_dict(self) -> dict:
        return {
            "directions_deg": self.directions_deg.tolist(),
            "probabilities": self.probabilities.tolist(),
            "speed": self.speed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WindRose":
        return cls(data["directions_deg"], data["probabilities"], data["speed"])

    @classmethod
    def uniform(cls, n: int, speed: float = 9.0) -> "WindRose":
        return cls(np.arange(n) * 360.0 / n, np.full(n, 1.0 / n), speed)

    @classmethod
    def single(cls, direction_deg: float, speed: float = 9.0) -> "WindRose":
        return cls([direction_deg % 360.0], [1.0], speed)


def load_wind_rose(path, speed: float | None = None) -> WindRose:
    """Read a ``direction_deg,probability[,speed_mps]`` CSV file.

    Probabilities summing within ``[0.999, 1.001]`` are renormalized; anything
    else is rejected.  A ``speed`` argument overrides the file.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"wind rose file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "direction_deg" not in fields or "probability" not in fields:
            raise ValueError(f"{path}: header must contain direction_deg,probability")
        rows = list(reader)
    try:
        directions = np.array([float(r["direction_deg"]) for r in rows])
        probs = np.array([float(r["probability"]) for r in rows])
        speeds = {float(r["speed_mps"]) for r in rows if r.get("speed_mps") not in (None, "")}
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    if len(speeds) > 1:
        raise ValueError(f"{path}: a single freestream speed is required, got {sorted(speeds)}")
    total = math.fsum(probs)
    if not 0.999 <= total <= 1.001:
        raise ValueError(f"{path}: probabilities sum to {total}, expected 1")
    probs = probs / total
    if speed is None:
        speed = speeds.pop() if speeds else 9.0
    return WindRose(directions % 360.0, probs, speed)


def save_wind_rose(path, rose: WindRose):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["direction_deg", "probability", "speed_mps"])
        for d, p in zip(rose.directions_deg, rose.probabilities):
            writer.writerow([repr(float(d)), repr(float(p)), repr(rose.speed)])


def discretize_rose(rose: WindRose, n_target: int) -> WindRose:
    """Re-bin a rose onto ``n_target`` equal-width sectors centred on ``k * 360 / n``.

    Each source direction is assigned to the sector containing it (sectors
    are half-open, ``[c - w/2, c + w/2)``), so total probability is conserved.
    """
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    if n_target == rose.n_scenarios:
        return WindRose(rose.directions_deg.copy(), rose.probabilities.copy(), rose.speed)
    if n_target > rose.n_scenarios:
        raise ValueError(
            f"cannot refine a {rose.n_scenarios}-direction rose to {n_target} directions"
        )
    width = 360.0 / n_target
    index = np.floor(((rose.directions_deg + width / 2.0) % 360.0) / width).astype(int) % n_target
    probs = np.array([math.fsum(rose.probabilities[index == k]) for k in range(n_target)])
    return WindRose(np.arange(n_target) * width, probs, rose.speed)


@dataclass
class ControlPlan:
    """Per-scenario, per-turbine yaw angles (deg) and induction factors."""

    yaw_deg: np.ndarray
    induction: np.ndarray

    def __post_init__(self):
        self.yaw_deg = np.atleast_2d(np.asarray(self.yaw_deg, dtype=float))
        self.induction = np.atleast_2d(np.asarray(self.induction, dtype=float))
        if self.yaw_deg.shape != self.induction.shape:
            raise ValueError("yaw and induction arrays must match")

    @property
    def n_scenarios(self) -> int:
        return self.yaw_deg.shape[0]

    @property
    def n_turbines(self) -> int:
        return self.yaw_deg.shape[1]

    def controls(self, scenario: int) -> Controls:
        return Controls(self.yaw_deg[scenario].copy(), self.induction[scenario].copy())

    @classmethod
    def from_controls(cls, controls) -> "ControlPlan":
        return cls([c.yaw_deg for c in controls], [c.induction for c in controls])

    @classmethod
    def greedy(cls, n_scenarios: int, n_turbines: int) -> "ControlPlan":
        return cls(np.zeros((n_scenarios, n_turbines)), np.full((n_scenarios, n_turbines), 1.0 / 3.0))

    def validate(self, spec: FarmSpec):
        for w in range(self.n_scenarios):
            try:
                check_controls(self.controls(w), spec)
            except ValueError as exc:
                raise ValueError(f"scenario {w}: {exc}") from exc


def scenario_powers(layout: Layout, plan: ControlPlan, rose: WindRose, spec: FarmSpec) -> np.ndarray:
    """Farm power (W) in every scenario of ``rose``."""
    if plan.n_scenarios != rose.n_scenarios or plan.n_turbines != len(layout):
        raise ValueError("control plan does not match layout/rose dimensions")
    return farm_power_batch(
        layout.x, layout.y, plan.yaw_deg, plan.induction, rose.directions_deg, rose.speed, spec
    )


def annual_energy_gwh(layout: Layout, plan: ControlPlan, rose: WindRose, spec: FarmSpec,
                      hours: float = HOURS_PER_YEAR) -> float:
    """Annual energy ``T * sum_w p_w * P_WF(w)`` in GWh."""
    powers = scenario_powers(layout, plan, rose, spec)
    return hours * math.fsum(rose.probabilities * powers) / 1e9


@dataclass
class OptimizationReport:
    layout: Layout
    plan: ControlPlan
    aep_gwh: float
    scenario_power_mw: list
    traces: dict = field(default_factory=dict)
    wall_clock_seconds: float | None = None
    metadata: dict = field(default_factory=dict)
    aep_mismatch: bool = False

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "layout": {"x_m": self.layout.x.tolist(), "y_m": self.layout.y.tolist()},
            "plan": {"yaw_deg": self.plan.yaw_deg.tolist(), "induction": self.plan.induction.tolist()},
            "aep_gwh": self.aep_gwh,
            "scenario_power_mw": [float(v) for v in self.scenario_power_mw],
            "traces": _plain(self.traces),
            "wall_clock_seconds": self.wall_clock_seconds,
            "metadata": _plain(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizationReport":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {version!r}")
        try:
            return cls(
                layout=Layout(data["layout"]["x_m"], data["layout"]["y_m"]),
                plan=ControlPlan(data["plan"]["yaw_deg"], data["plan"]["induction"]),
                aep_gwh=float(data["aep_gwh"]),
                scenario_power_mw=list(data["scenario_power_mw"]),
                traces=data.get("traces", {}),
                wall_clock_seconds=data.get("wall_clock_seconds"),
                metadata=data.get("metadata", {}),
            )
        except KeyError as exc:
            raise ValueError(f"report is missing field {exc}") from exc

    def recompute_aep(self) -> float | None:
        """AEP recomputed from the stored layout, plan, spec and rose, if embedded."""
        meta = self.metadata
        if "spec" not in meta or "rose" not in meta:
            return None
        spec = FarmSpec.from_dict(meta["spec"])
        rose = WindRose.from_dict(meta["rose"])
        hours = meta.get("hours_per_year", HOURS_PER_YEAR)
        return annual_energy_gwh(self.layout, self.plan, rose, spec, hours)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps_report(report: OptimizationReport) -> str:
    # json writes floats with repr(), which round-trips exactly
    return json.dumps(report.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def save_report(path, report: OptimizationReport):
    Path(path).write_text(dumps_report(report))


def load_report(path, check: bool = True) -> OptimizationReport:
    """Load a report; flags ``aep_mismatch`` if the stored AEP does not reproduce."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON: {exc}") from exc
    report = OptimizationReport.from_dict(data)
    if check:
        recomputed = report.recompute_aep()
        if recomputed is not None and abs(recomputed - report.aep_gwh) > 1e-6 * abs(recomputed):
            report.aep_mismatch = True
            warnings.warn(
                f"{path}: stored AEP {report.aep_gwh} GWh differs from recomputed {recomputed} GWh",
                stacklevel=2,
            )
    return report


# -- layouts and configs -------------------------------------------------------


def load_layout(path) -> Layout:
    """Read a ``turbine_id,x_m,y_m`` CSV file (rows sorted by turbine_id)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"layout file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"turbine_id", "x_m", "y_m"} <= set(reader.fieldnames or []):
            raise ValueError(f"{path}: header must be turbine_id,x_m,y_m")
        rows = sorted(reader, key=lambda r: int(r["turbine_id"]))
    return Layout([float(r["x_m"]) for r in rows], [float(r["y_m"]) for r in rows])


def save_layout(path, layout: Layout):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["turbine_id", "x_m", "y_m"])
        for i, (x, y) in enumerate(zip(layout.x, layout.y)):
            writer.writerow([i, repr(float(x)), repr(float(y))])


@dataclass
class FarmConfig:
    """Contents of a JSON configuration file.

    ``movable`` holds one string per turbine drawn from ``"xy"``, ``"x"``,
    ``"y"`` or ``""``; ``None`` means every coordinate may move.
    """

    spec: FarmSpec
    speed: float | None = None
    movable: list | None = None
    hours_per_year: float = HOURS_PER_YEAR
    penalty_factor: float = 1e5
    solver: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


_CONFIG_EXTRAS = {"schema_version", "speed_mps", "movable", "hours_per_year", "penalty_factor", "solver"}


def load_config(path) -> FarmConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data)


def config_from_dict(data: dict) -> FarmConfig:
    spec = FarmSpec.from_dict({k: v for k, v in data.items() if k not in _CONFIG_EXTRAS})
    return FarmConfig(
        spec=spec,
        speed=data.get("speed_mps"),
        movable=data.get("movable"),
        hours_per_year=float(data.get("hours_per_year", HOURS_PER_YEAR)),
        penalty_factor=float(data.get("penalty_factor", 1e5)),
        solver=dict(data.get("solver", {})),
        raw=data,
    )
