"""Shipped example farms and wind roses.

The CSV and JSON files under ``windjoint/data`` are generated by
:func:`write_all`; tests check that the shipped copies match the generators.
Any CLI path argument of the form ``fixture:NAME`` resolves to one of them.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .scenarios import WindRose, discretize_rose, save_layout, save_wind_rose
from .wake import Layout

ROTOR_DIAMETER = 126.0
TILT_DEG = 7.2

BASE_SPEC = {
    "schema_version": 1,
    "rotor_diameter": 126.0,
    "air_density": 1.29,
    "p_p": 1.88,
    "k_y": 0.0229,
    "a_d": -0.0356,
    "b_d": -0.01,
    "gamma_min_deg": -30.0,
    "gamma_max_deg": 30.0,
    "alpha_min": 0.1,
    "alpha_max": 1.0 / 3.0,
    "min_spacing": 504.0,
    "turbulence_intensity": 0.06,
    "speed_mps": 9.0,
    "hours_per_year": 8760.0,
    "penalty_factor": 1e5,
}


def data_dir() -> Path:
    return Path(str(resources.files("windjoint") / "data"))


def fixture_path(name: str) -> Path:
    path = data_dir() / name
    if not path.is_file():
        raise FileNotFoundError(f"no shipped fixture named {name!r}")
    return path


def resolve(path) -> Path:
    """Map ``fixture:NAME`` to the shipped file, anything else to a Path."""
    text = str(path)
    if text.startswith("fixture:"):
        return fixture_path(text[len("fixture:"):])
    return Path(text)


# -- generators ---------------------------------------------------------------


def corridor_layout() -> Layout:
    """Three turbines on an east-west row, outer ones 1100 m apart."""
    return Layout([0.0, 550.0, 1100.0], [0.0, 0.0, 0.0])


def corridor_config() -> dict:
    cfg = dict(BASE_SPEC)
    cfg["site_bounds"] = [[0.0, 1100.0], [-252.0, 252.0]]
    cfg["movable"] = ["", "x", ""]
    return cfg


def rectangular16_layout() -> Layout:
    """4 x 4 grid filling a 1900 m x 1700 m site."""
    gx = np.linspace(0.0, 1900.0, 4)
    gy = np.linspace(0.0, 1700.0, 4)
    x, y = np.meshgrid(gx, gy, indexing="xy")
    return Layout(x.ravel(), y.ravel())


def rectangular16_config() -> dict:
    cfg = dict(BASE_SPEC)
    cfg["site_bounds"] = [[0.0, 1900.0], [0.0, 1700.0]]
    return cfg


def parallelogram_layout(columns: int, rows: int, spacing: float = 7 * ROTOR_DIAMETER,
                         tilt_deg: float = TILT_DEG) -> Layout:
    """Rows along x, successive rows shifted sideways by the tilt angle."""
    t = np.deg2rad(tilt_deg)
    i, j = np.meshgrid(np.arange(columns), np.arange(rows), indexing="xy")
    x = spacing * (i + j * np.sin(t))
    y = spacing * j * np.cos(t)
    return Layout(x.ravel(), y.ravel())


def bounding_config(layout: Layout) -> dict:
    cfg = dict(BASE_SPEC)
    cfg["site_bounds"] = [[float(layout.x.min()), float(layout.x.max())],
                          [float(layout.y.min()), float(layout.y.max())]]
    return cfg


def wnw_rose36() -> WindRose:
    """36-sector rose with a dominant west-north-westerly sector.

    A smooth two-lobe shape: a strong lobe centred on 290 degrees, a weaker
    one on 200 degrees and a uniform floor.
    """
    theta = np.arange(36) * 10.0
    rad = np.deg2rad(theta)
    weight = (0.35
              + 3.0 * np.exp(2.5 * (np.cos(rad - np.deg2rad(290.0)) - 1.0))
              + 1.0 * np.exp(3.0 * (np.cos(rad - np.deg2rad(200.0)) - 1.0)))
    return WindRose(theta, weight / weight.sum(), 9.0)


def write_all(target: Path | None = None):
    """Regenerate every shipped fixture file."""
    target = Path(target) if target is not None else data_dir()
    target.mkdir(parents=True, exist_ok=True)

    def dump(name, obj):
        (target / name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    save_layout(target / "corridor_layout.csv", corridor_layout())
    dump("corridor_config.json", corridor_config())
    save_wind_rose(target / "aligned_rose.csv", WindRose.single(270.0, 9.0))

    save_layout(target / "rect16_layout.csv", rectangular16_layout())
    dump("rect16_config.json", rectangular16_config())
    rose36 = wnw_rose36()
    save_wind_rose(target / "wnw_rose36.csv", rose36)
    save_wind_rose(target / "wnw_rose12.csv", discretize_rose(rose36, 12))

    horns = parallelogram_layout(8, 10)
    save_layout(target / "hornsrev80_layout.csv", horns)
    dump("hornsrev80_config.json", bounding_config(horns))

    park9 = parallelogram_layout(3, 3)
    save_layout(target / "park9_layout.csv", park9)
    dump("park9_config.json", bounding_config(park9))
