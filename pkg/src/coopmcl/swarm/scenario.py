"""Scenario files: map, timing, channel and agent specifications (JSON)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..geometry import Pose2D, normalize_angle
from ..maps import MapLoadError, OccupancyGrid, is_free, load_map

_MISSING = object()


class ScenarioError(ValueError):
    """Invalid scenario file; the message names the file and offending field."""


@dataclass(frozen=True)
class Waypoint:
    t: float
    pose: Pose2D


@dataclass(frozen=True)
class SensorSpec:
    beams: int = 24
    fov: float = 2.0 * math.pi
    max_range: float = 4.0
    noise_sigma: float = 0.05

    def beam_angles(self) -> np.ndarray:
        if self.fov >= 2.0 * math.pi - 1e-9:
            return np.linspace(-math.pi, math.pi, self.beams, endpoint=False)
        if self.beams == 1:
            return np.zeros(1)
        return np.linspace(-self.fov / 2.0, self.fov / 2.0, self.beams)


@dataclass(frozen=True)
class DetectionSpec:
    range: float = 3.0
    fov: float = math.radians(120.0)
    sigma_range: float = 0.1
    sigma_bearing: float = math.radians(10.0)


@dataclass(frozen=True)
class InitSpec:
    mode: str = "global"
    sigma_xy: float = 0.1
    sigma_theta: float = 0.1


@dataclass(frozen=True)
class FilterSpec:
    n_particles: int = 1000
    alpha: tuple[float, float, float, float] = (0.05, 0.05, 0.05, 0.05)
    z_hit: float = 0.8
    z_rand: float = 0.15
    z_max: float = 0.05
    sigma_hit: float = 0.1
    resample_threshold: float = 0.5


@dataclass(frozen=True)
class AgentSpec:
    agent_id: int
    name: str
    trajectory: tuple[Waypoint, ...]
    sensor: SensorSpec = field(default_factory=SensorSpec)
    filter: FilterSpec = field(default_factory=FilterSpec)
    detection: DetectionSpec = field(default_factory=DetectionSpec)
    init: InitSpec = field(default_factory=InitSpec)
    odometry_noise: tuple[float, float, float, float] | None = None

    @property
    def stationary(self) -> bool:
        return len(self.trajectory) == 1

    def pose_at(self, t: float) -> Pose2D:
        """Ground-truth pose by linear interpolation between waypoints."""
        wps = self.trajectory
        if t <= wps[0].t:
            return wps[0].pose
        if t >= wps[-1].t:
            return wps[-1].pose
        times = [w.t for w in wps]
        i = int(np.searchsorted(times, t, side="right")) - 1
        a, b = wps[i], wps[i + 1]
        s = (t - a.t) / (b.t - a.t)
        dtheta = normalize_angle(b.pose.theta - a.pose.theta)
        return Pose2D(
            a.pose.x + s * (b.pose.x - a.pose.x),
            a.pose.y + s * (b.pose.y - a.pose.y),
            a.pose.theta + s * dtheta,
        )


@dataclass(frozen=True)
class ChannelSpec:
    latency: float = 0.0
    drop_probability: float = 0.0


@dataclass(frozen=True)
class Scenario:
    grid: OccupancyGrid
    agents: tuple[AgentSpec, ...]
    seed: int = 0
    dt: float = 0.1
    duration: float = 30.0
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    encounter_cooldown: float = 5.0
    focus_agent: int = 0
    convergence_threshold: float = 0.2
    source: Path | None = None

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.dt))

    def agent(self, agent_id: int) -> AgentSpec:
        for a in self.agents:
            if a.agent_id == agent_id:
                return a
        raise KeyError(agent_id)


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def fail(self, path: str, msg: str):
        raise ScenarioError(f"{self.source}: field '{path}': {msg}")

    def get(self, obj: dict, key: str, path: str, kind, default=_MISSING):
        full = f"{path}.{key}" if path else key
        if not isinstance(obj, dict):
            self.fail(path or "<root>", "expected a JSON object")
        if key not in obj:
            if default is _MISSING:
                self.fail(full, "is required")
            return default
        value = obj[key]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                self.fail(full, f"expected a finite number, got {value!r}")
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(full, f"expected an integer, got {value!r}")
            return value
        if not isinstance(value, kind):
            self.fail(full, f"expected {kind.__name__}, got {type(value).__name__}")
        return value

    def positive(self, obj, key, path, default=_MISSING) -> float:
        v = self.get(obj, key, path, float, default)
        if not v > 0:
            self.fail(f"{path}.{key}" if path else key, f"must be > 0, got {v}")
        return v


def _parse_agent(r: _Reader, doc: dict, path: str, index: int) -> AgentSpec:
    agent_id = r.get(doc, "id", path, int, index)
    if agent_id < 0 or agent_id > 0xFFFFFFFF:
        r.fail(f"{path}.id", "must fit in an unsigned 32-bit integer")
    name = r.get(doc, "name", path, str, f"agent{agent_id}")
    traj_doc = r.get(doc, "trajectory", path, list)
    if not traj_doc:
        r.fail(f"{path}.trajectory", "must contain at least one waypoint")
    waypoints = []
    for i, wp in enumerate(traj_doc):
        wpath = f"{path}.trajectory[{i}]"
        waypoints.append(
            Waypoint(
                r.get(wp, "t", wpath, float, 0.0),
                Pose2D(r.get(wp, "x", wpath, float), r.get(wp, "y", wpath, float), r.get(wp, "theta", wpath, float, 0.0)),
            )
        )
    for i in range(1, len(waypoints)):
        if not waypoints[i].t > waypoints[i - 1].t:
            r.fail(f"{path}.trajectory[{i}].t", "waypoint times must be strictly increasing")

    s = r.get(doc, "sensor", path, dict, {})
    spath = f"{path}.sensor"
    beams = r.get(s, "beams", spath, int, 24)
    if beams < 1:
        r.fail(f"{spath}.beams", "must be >= 1")
    sensor = SensorSpec(
        beams=beams,
        fov=r.positive(s, "fov", spath, 2.0 * math.pi),
        max_range=r.positive(s, "max_range", spath, 4.0),
        noise_sigma=r.get(s, "noise_sigma", spath, float, 0.05),
    )
    if sensor.noise_sigma < 0:
        r.fail(f"{spath}.noise_sigma", "must be >= 0")

    f = r.get(doc, "filter", path, dict, {})
    fpath = f"{path}.filter"
    alpha = r.get(f, "alpha", fpath, list, [0.05, 0.05, 0.05, 0.05])
    if len(alpha) != 4 or not all(isinstance(a, (int, float)) and a >= 0 for a in alpha):
        r.fail(f"{fpath}.alpha", "must be a list of four numbers >= 0")
    n_particles = r.get(f, "n_particles", fpath, int, 1000)
    if n_particles < 1:
        r.fail(f"{fpath}.n_particles", "must be >= 1")
    filt = FilterSpec(
        n_particles=n_particles,
        alpha=tuple(float(a) for a in alpha),
        z_hit=r.get(f, "z_hit", fpath, float, 0.8),
        z_rand=r.get(f, "z_rand", fpath, float, 0.15),
        z_max=r.get(f, "z_max", fpath, float, 0.05),
        sigma_hit=r.positive(f, "sigma_hit", fpath, 0.1),
        resample_threshold=r.get(f, "resample_threshold", fpath, float, 0.5),
    )
    if abs(filt.z_hit + filt.z_rand + filt.z_max - 1.0) > 1e-9 or min(filt.z_hit, filt.z_rand, filt.z_max) < 0:
        r.fail(fpath, "z_hit, z_rand and z_max must be >= 0 and sum to 1")
    if not 0 <= filt.resample_threshold <= 1:
        r.fail(f"{fpath}.resample_threshold", "must lie in [0, 1]")

    odom = r.get(doc, "odometry_noise", path, list, None)
    if odom is not None and (len(odom) != 4 or not all(isinstance(a, (int, float)) and a >= 0 for a in odom)):
        r.fail(f"{path}.odometry_noise", "must be a list of four numbers >= 0")

    d = r.get(doc, "detection", path, dict, {})
    dpath = f"{path}.detection"
    if "sigma_bearing" in d:
        sigma_bearing = r.positive(d, "sigma_bearing", dpath)
    else:
        sigma_bearing = math.radians(r.positive(d, "sigma_bearing_deg", dpath, 10.0))
    detection = DetectionSpec(
        range=r.get(d, "range", dpath, float, 3.0),
        fov=r.get(d, "fov", dpath, float, math.radians(120.0)),
        sigma_range=r.positive(d, "sigma_range", dpath, 0.1),
        sigma_bearing=sigma_bearing,
    )

    ini = r.get(doc, "init", path, dict, {})
    ipath = f"{path}.init"
    mode = r.get(ini, "mode", ipath, str, "global")
    if mode not in ("global", "pose"):
        r.fail(f"{ipath}.mode", f"must be 'global' or 'pose', got {mode!r}")
    init = InitSpec(mode, r.get(ini, "sigma_xy", ipath, float, 0.1), r.get(ini, "sigma_theta", ipath, float, 0.1))

    return AgentSpec(
        agent_id=agent_id,
        name=name,
        trajectory=tuple(waypoints),
        sensor=sensor,
        filter=filt,
        detection=detection,
        init=init,
        odometry_noise=None if odom is None else tuple(float(a) for a in odom),
    )


def parse_scenario(doc: dict, base_dir: Path, source: str = "<scenario>") -> Scenario:
    r = _Reader(source)
    if not isinstance(doc, dict):
        r.fail("<root>", "expected a JSON object")
    map_doc = r.get(doc, "map", "", dict)
    image = base_dir / r.get(map_doc, "image", "map", str)
    meta = base_dir / r.get(map_doc, "meta", "map", str)
    try:
        grid = load_map(image, meta)
    except MapLoadError as exc:
        raise ScenarioError(f"{source}: field 'map': {exc}") from exc

    agents_doc = r.get(doc, "agents", "", list)
    if not agents_doc:
        r.fail("agents", "at least one agent is required")
    agents = tuple(_parse_agent(r, a, f"agents[{i}]", i) for i, a in enumerate(agents_doc))
    ids = [a.agent_id for a in agents]
    if len(set(ids)) != len(ids):
        r.fail("agents", f"agent ids must be unique, got {ids}")
    for i, a in enumerate(agents):
        for j, wp in enumerate(a.trajectory):
            if not is_free(grid, wp.pose.x, wp.pose.y):
                r.fail(f"agents[{i}].trajectory[{j}]", f"waypoint ({wp.pose.x}, {wp.pose.y}) is not in FREE space")

    ch = r.get(doc, "channel", "", dict, {})
    channel = ChannelSpec(r.get(ch, "latency", "channel", float, 0.0), r.get(ch, "drop_probability", "channel", float, 0.0))
    if channel.latency < 0:
        r.fail("channel.latency", "must be >= 0")
    if not 0 <= channel.drop_probability <= 1:
        r.fail("channel.drop_probability", "must lie in [0, 1]")

    seed = r.get(doc, "seed", "", int, 0)
    if seed < 0:
        r.fail("seed", "must be >= 0")
    focus = r.get(doc, "focus_agent", "", int, ids[0])
    if focus not in ids:
        r.fail("focus_agent", f"no agent with id {focus}")
    return Scenario(
        grid=grid,
        agents=agents,
        seed=seed,
        dt=r.positive(doc, "dt", "", 0.1),
        duration=r.positive(doc, "duration", "", 30.0),
        channel=channel,
        encounter_cooldown=r.get(doc, "encounter_cooldown", "", float, 5.0),
        focus_agent=focus,
        convergence_threshold=r.positive(doc, "convergence_threshold", "", 0.2),
    )


def load_scenario(path) -> Scenario:
    """Parse a scenario JSON file. Map paths are relative to the file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    scenario = parse_scenario(doc, path.parent, str(path))
    return replace(scenario, source=path)
