"""Reference scenario: a symmetric corridor with a stationary observer.

The corridor runs along x and is mirrored across both mid-axes, so every pose
has a twin rotated by 180 degrees about the map centre that sees the same
scan. Agent A (id 0) starts with no knowledge of its pose and drives past the
middle; agent B (id 1) stands in the mouth of a room in the first half and
knows its pose. A carries a forward detector and measures B when it comes
into view.

The range model is deliberately tempered (few beams, wide ``sigma_hit``) and
the filter motion noise inflated so that a 1000-particle cloud keeps both
twin hypotheses alive instead of collapsing early onto an arbitrary one.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .maps import CellState, OccupancyGrid, save_map

WIDTH_M = 14.0
HEIGHT_M = 3.5
CORRIDOR_Y = (1.15, 2.35)
CORRIDOR_X = (0.5, 13.5)
# (x0, x1, y0, y1) rooms carved in the lower-left quarter, then mirrored
# across both mid-axes
ROOMS = (
    (1.0, 1.8, 2.35, 3.15),
    (4.0, 5.5, 2.35, 3.25),
    (6.0, 6.5, 0.45, 1.15),
)
OBSERVER_POSE = (4.4, 2.6, -math.pi / 2)
WALL_M = 0.2


def _carve(free: np.ndarray, res: float, x0: float, x1: float, y0: float, y1: float) -> None:
    c0, c1 = int(round(x0 / res)), int(round(x1 / res))
    r0, r1 = int(round(y0 / res)), int(round(y1 / res))
    free[r0:r1, c0:c1] = True


def _dilate(mask: np.ndarray, n: int) -> np.ndarray:
    out = mask.copy()
    for _ in range(n):
        grown = out.copy()
        grown[1:, :] |= out[:-1, :]
        grown[:-1, :] |= out[1:, :]
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        out = grown
    return out


def corridor_grid(resolution: float = 0.05) -> OccupancyGrid:
    """Build the symmetric corridor map at the given resolution."""
    w = int(round(WIDTH_M / resolution))
    h = int(round(HEIGHT_M / resolution))
    free = np.zeros((h, w), dtype=bool)
    _carve(free, resolution, *CORRIDOR_X, *CORRIDOR_Y)
    for x0, x1, y0, y1 in ROOMS:
        for xa, xb in ((x0, x1), (WIDTH_M - x1, WIDTH_M - x0)):
            for ya, yb in ((y0, y1), (HEIGHT_M - y1, HEIGHT_M - y0)):
                _carve(free, resolution, xa, xb, ya, yb)
    walls = _dilate(free, int(round(WALL_M / resolution))) & ~free
    cells = np.full((h, w), CellState.UNKNOWN, dtype=np.int8)
    cells[free] = CellState.FREE
    cells[walls] = CellState.OCCUPIED
    return OccupancyGrid(cells, resolution)


def scenario_document(
    n_particles: int = 1000,
    speed: float = 0.5,
    x_start: float = 1.5,
    x_end: float = 11.5,
    odometry_noise: float | None = 0.05,
    observer_x: float | None = None,
    **overrides,
) -> dict:
    """Scenario JSON for the corridor; ``overrides`` patch sensor/filter keys of both agents."""
    y = sum(CORRIDOR_Y) / 2.0
    t_end = round((x_end - x_start) / speed, 6)
    sensor = {"beams": 5, "fov": math.pi, "max_range": 3.0, "noise_sigma": 0.05}
    filt = {
        "n_particles": n_particles,
        "alpha": [0.4, 0.4, 0.4, 0.4],
        "z_hit": 0.8,
        "z_rand": 0.15,
        "z_max": 0.05,
        "sigma_hit": 1.2,
        "resample_threshold": 0.5,
    }
    for key, value in overrides.items():
        if key in sensor:
            sensor[key] = value
        elif key in filt:
            filt[key] = value
        else:
            raise KeyError(key)
    bx, by, btheta = OBSERVER_POSE
    if observer_x is not None:
        bx = observer_x
    return {
        "map": {"image": "corridor.pgm", "meta": "corridor.json"},
        "seed": 0,
        "dt": 0.1,
        "duration": t_end,
        "channel": {"latency": 0.0, "drop_probability": 0.0},
        "encounter_cooldown": 5.0,
        "focus_agent": 0,
        "convergence_threshold": 0.2,
        "agents": [
            {
                "id": 0,
                "name": "A",
                "trajectory": [
                    {"t": 0.0, "x": x_start, "y": y, "theta": 0.0},
                    {"t": t_end, "x": x_end, "y": y, "theta": 0.0},
                ],
                "sensor": sensor,
                "filter": filt,
                "detection": {"range": 3.5, "fov": math.radians(120.0), "sigma_range": 0.1, "sigma_bearing_deg": 10.0},
                "init": {"mode": "global"},
                **({"odometry_noise": [odometry_noise] * 4} if odometry_noise is not None else {}),
            },
            {
                "id": 1,
                "name": "B",
                "trajectory": [{"t": 0.0, "x": bx, "y": by, "theta": btheta}],
                "sensor": sensor,
                "filter": filt,
                "detection": {"range": 0.0, "fov": 0.0, "sigma_range": 0.1, "sigma_bearing_deg": 10.0},
                "init": {"mode": "pose", "sigma_xy": 0.05, "sigma_theta": 0.05},
            },
        ],
    }


def write_reference(out_dir, resolution: float = 0.05, n_particles: int = 1000) -> Path:
    """Write map image, metadata and scenario JSON; returns the scenario path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_map(corridor_grid(resolution), out / "corridor.pgm", out / "corridor.json")
    path = out / "corridor_scenario.json"
    path.write_text(json.dumps(scenario_document(n_particles), indent=2) + "\n", encoding="utf-8")
    return path


def reference_scenario_path() -> Path:
    return Path(__file__).parent / "data" / "corridor_scenario.json"
