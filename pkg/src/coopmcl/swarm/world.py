"""Ground-truth world: agent motion, sensor synthesis and encounter detection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import Pose2D, RelativePoseMeas, normalize_angle, predict_relative_pose
from ..maps import raycast, raycast_scan
from ..models import MotionNoiseParams, OdometryReading, RangeScan, sample_motion
from .scenario import AgentSpec, Scenario


@dataclass(frozen=True)
class EncounterEvent:
    observer_id: int
    observed_id: int
    timestamp: float
    measurement: RelativePoseMeas

    def __post_init__(self) -> None:
        if self.observer_id == self.observed_id:
            raise ValueError("an agent cannot observe itself")


@dataclass
class WorldStreams:
    """Random streams owned by the world (never by agents)."""

    motion: np.random.Generator
    scan: np.random.Generator
    detection: np.random.Generator

    @classmethod
    def from_seed_sequences(cls, motion, scan, detection) -> WorldStreams:
        return cls(np.random.default_rng(motion), np.random.default_rng(scan), np.random.default_rng(detection))


class World:
    """Lockstep simulation of ground truth and measurement synthesis.

    The odometry frame of each agent starts at its true initial pose and is
    integrated through the agent's odometry noise, so it drifts from truth.
    """

    def __init__(self, scenario: Scenario, streams: WorldStreams):
        self.scenario = scenario
        self.grid = scenario.grid
        self.streams = streams
        self.t = 0.0
        self.tick = 0
        self.specs = {a.agent_id: a for a in scenario.agents}
        self.truth = {a.agent_id: a.pose_at(0.0) for a in scenario.agents}
        self.odom = dict(self.truth)
        self._beams = {a.agent_id: a.sensor.beam_angles() for a in scenario.agents}
        self._odom_noise = {
            a.agent_id: MotionNoiseParams(*(a.odometry_noise if a.odometry_noise is not None else a.filter.alpha))
            for a in scenario.agents
        }
        self._cooldown_until: dict[frozenset, float] = {}

    def step(self, dt: float | None = None) -> dict[int, tuple[OdometryReading, RangeScan]]:
        """Advance truth by ``dt`` and synthesize one odometry reading and scan per agent."""
        dt = self.scenario.dt if dt is None else float(dt)
        if not dt > 0:
            raise ValueError("dt must be > 0")
        self.tick += 1
        # rounding keeps lockstep timestamps free of accumulated float drift
        self.t = round(self.t + dt, 9)
        out = {}
        for agent_id, spec in self.specs.items():
            prev = self.truth[agent_id]
            curr = spec.pose_at(self.t)
            true_u = OdometryReading(prev, curr)
            odom_prev = self.odom[agent_id]
            odom_curr = sample_motion(odom_prev, true_u, self._odom_noise[agent_id], self.streams.motion)
            self.truth[agent_id] = curr
            self.odom[agent_id] = odom_curr
            out[agent_id] = (OdometryReading(odom_prev, odom_curr), self.scan(agent_id))
        return out

    def scan(self, agent_id: int) -> RangeScan:
        spec = self.specs[agent_id]
        sensor = spec.sensor
        beams = self._beams[agent_id]
        truth = raycast_scan(self.grid, self.truth[agent_id].as_array(), beams, sensor.max_range)[0]
        noisy = truth + sensor.noise_sigma * self.streams.scan.standard_normal(beams.size)
        return RangeScan(beams, np.clip(noisy, 0.0, sensor.max_range), sensor.max_range)

    def line_of_sight(self, a: Pose2D, b: Pose2D) -> bool:
        dist = math.hypot(b.x - a.x, b.y - a.y)
        if dist == 0.0:
            return True
        ray = Pose2D(a.x, a.y, math.atan2(b.y - a.y, b.x - a.x))
        return raycast(self.grid, ray, 0.0, dist) >= dist

    def can_detect(self, observer_id: int, observed_id: int) -> bool:
        """Range, field-of-view and line-of-sight predicate on ground truth."""
        det = self.specs[observer_id].detection
        obs = self.truth[observer_id]
        tgt = self.truth[observed_id]
        rng, bearing = predict_relative_pose(obs, tgt)
        if rng > det.range or abs(bearing) > det.fov / 2.0:
            return False
        return self.line_of_sight(obs, tgt)

    def measure(self, observer_id: int, observed_id: int) -> RelativePoseMeas:
        det = self.specs[observer_id].detection
        rng, bearing = predict_relative_pose(self.truth[observer_id], self.truth[observed_id])
        noise = self.streams.detection.standard_normal(2)
        return RelativePoseMeas(
            range=max(0.0, rng + det.sigma_range * noise[0]),
            bearing=normalize_angle(bearing + det.sigma_bearing * noise[1]),
            sigma_range=det.sigma_range,
            sigma_bearing=det.sigma_bearing,
            timestamp=self.t,
        )

    def detect_encounters(self) -> list[EncounterEvent]:
        """Encounter events for the current tick.

        Each unordered pair yields at most one event per cooldown window; when
        both agents see each other the one listed first in the scenario is the
        observer.
        """
        ids = list(self.specs)
        events = []
        for idx, i in enumerate(ids):
            for j in ids[idx + 1 :]:
                pair = frozenset((i, j))
                if self.t < self._cooldown_until.get(pair, -math.inf):
                    continue
                if self.can_detect(i, j):
                    observer, observed = i, j
                elif self.can_detect(j, i):
                    observer, observed = j, i
                else:
                    continue
                self._cooldown_until[pair] = self.t + self.scenario.encounter_cooldown
                events.append(EncounterEvent(observer, observed, self.t, self.measure(observer, observed)))
        return events
