"""Lockstep multi-agent simulation tying world, agents and channel together."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..filter import ParticleCloud
from ..geometry import Pose2D
from .agent import AgentNode, ExchangeResult, exchange_and_fuse
from .channel import SimulatedChannel
from .scenario import Scenario
from .world import EncounterEvent, World, WorldStreams


@dataclass(frozen=True)
class AgentState:
    agent_id: int
    estimate: Pose2D
    truth: Pose2D
    encounter: bool

    @property
    def position_error(self) -> float:
        return math.hypot(self.estimate.x - self.truth.x, self.estimate.y - self.truth.y)


@dataclass
class TickResult:
    tick: int
    t: float
    states: list[AgentState]
    events: list[EncounterEvent] = field(default_factory=list)
    exchanges: list[ExchangeResult] = field(default_factory=list)
    pre_fusion: dict[int, ParticleCloud] = field(default_factory=dict)
    post_fusion: dict[int, ParticleCloud] = field(default_factory=dict)


class Simulation:
    """Run one scenario in cooperative or standalone mode.

    World, channel and every agent draw from independent streams spawned from
    ``seed``, so both modes see identical odometry, scans and detections.
    """

    def __init__(self, scenario: Scenario, cooperative: bool = True, seed: int | None = None):
        self.scenario = scenario
        self.cooperative = cooperative
        self.seed = scenario.seed if seed is None else int(seed)
        root = np.random.SeedSequence(self.seed)
        motion, scan, detection, chan, *agent_seqs = root.spawn(4 + len(scenario.agents))
        self.world = World(scenario, WorldStreams.from_seed_sequences(motion, scan, detection))
        self.channel = SimulatedChannel(
            scenario.channel.latency, scenario.channel.drop_probability, np.random.default_rng(chan)
        )
        self.nodes = {
            spec.agent_id: AgentNode(spec, scenario.grid, seq) for spec, seq in zip(scenario.agents, agent_seqs)
        }

    def _states(self, fused: set[int]) -> list[AgentState]:
        return [
            AgentState(agent_id, node.estimate(), self.world.truth[agent_id], agent_id in fused)
            for agent_id, node in self.nodes.items()
        ]

    def initial(self) -> TickResult:
        clouds = {i: n.cloud for i, n in self.nodes.items()}
        return TickResult(0, 0.0, self._states(set()), pre_fusion=clouds, post_fusion=clouds)

    def step(self) -> TickResult:
        measurements = self.world.step()
        t = self.world.t
        for agent_id, (odometry, scan) in measurements.items():
            self.nodes[agent_id].step(odometry, scan, t)
        pre = {i: n.cloud for i, n in self.nodes.items()}
        events = self.world.detect_encounters()
        exchanges = []
        fused: set[int] = set()
        if self.cooperative:
            for event in events:
                result = exchange_and_fuse(event, self.channel, self.nodes, window=self.scenario.dt)
                exchanges.append(result)
                fused.update(i for i, ok in result.fused.items() if ok)
        post = {i: n.cloud for i, n in self.nodes.items()}
        return TickResult(self.world.tick, t, self._states(fused), events, exchanges, pre, post)

    def run(self, callback=None) -> list[TickResult]:
        """Run to the scenario duration; ``callback(result)`` sees every tick."""
        results = [self.initial()]
        if callback:
            callback(results[0])
        for _ in range(self.scenario.n_ticks):
            res = self.step()
            if callback:
                callback(res)
            results.append(res)
        return results
