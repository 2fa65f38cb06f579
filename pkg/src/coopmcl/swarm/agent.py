"""Per-agent filter nodes and the encounter exchange protocol."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..estimator import MonteCarloLocalizer
from ..filter import ParticleCloud, Role, uniformize
from ..geometry import Pose2D
from ..maps import OccupancyGrid
from ..models import OdometryReading, RangeScan
from .channel import SimulatedChannel
from .protocol import CloudMessage, MeasurementRecord, ProtocolError
from .scenario import AgentSpec
from .world import EncounterEvent

log = logging.getLogger(__name__)


def localizer_for(spec: AgentSpec, random_state) -> MonteCarloLocalizer:
    f = spec.filter
    return MonteCarloLocalizer(
        n_particles=f.n_particles,
        alpha=f.alpha,
        z_hit=f.z_hit,
        z_rand=f.z_rand,
        z_max=f.z_max,
        sigma_hit=f.sigma_hit,
        resample_threshold=f.resample_threshold,
        init=spec.init.mode,
        init_sigma_xy=spec.init.sigma_xy,
        init_sigma_theta=spec.init.sigma_theta,
        random_state=random_state,
    )


class AgentNode:
    """One agent's private state: its localizer and random stream.

    Other agents only ever see this node through encoded byte payloads.
    """

    def __init__(self, spec: AgentSpec, grid: OccupancyGrid, seed_sequence: np.random.SeedSequence):
        self.agent_id = spec.agent_id
        self.name = spec.name
        filter_seq, comm_seq = seed_sequence.spawn(2)
        self.localizer = localizer_for(spec, np.random.default_rng(filter_seq))
        self._comm_rng = np.random.default_rng(comm_seq)
        initial = spec.trajectory[0].pose if spec.init.mode == "pose" else None
        self.localizer.fit(grid, initial_pose=initial, agent_id=spec.agent_id, timestamp=0.0)

    @property
    def cloud(self) -> ParticleCloud:
        return self.localizer.cloud_

    def step(self, odometry: OdometryReading, scan: RangeScan | None, t: float) -> None:
        self.localizer.partial_fit(odometry, scan, timestamp=t)

    def estimate(self) -> Pose2D:
        return self.localizer.predict()

    def cloud_payload(self, now: float) -> bytes:
        # the wire format carries no weights; resample a copy so that sending
        # never changes the filter state or its random stream
        cloud = uniformize(self.localizer.cloud_, self._comm_rng)
        return CloudMessage(self.agent_id, now, cloud.particles).encode()

    def fuse_payload(self, cloud_bytes: bytes, measurement: MeasurementRecord, role: Role) -> bool:
        msg = CloudMessage.decode(cloud_bytes)
        other = ParticleCloud(msg.particles, agent_id=msg.sender_id, timestamp=msg.timestamp)
        self.localizer.fuse(other, measurement.measurement, role)
        return not self.localizer.last_fusion_rejected_


@dataclass(frozen=True)
class ExchangeResult:
    fused: dict[int, bool]
    skipped: str | None = None
    cloud_messages: int = 0
    measurement_messages: int = 0
    bytes_sent: int = 0


def exchange_and_fuse(
    event: EncounterEvent,
    channel: SimulatedChannel,
    nodes: dict[int, AgentNode],
    window: float = 0.0,
) -> ExchangeResult:
    """Run the encounter protocol between the two agents of ``event``.

    The observer sends its measurement record and cloud; the observed agent
    replies with its own cloud; then each agent fuses on its own, the observer
    with role OBSERVER and the observed agent with role OBSERVED. Every message
    must arrive within ``window`` seconds of the event or the encounter is
    skipped and neither filter changes.
    """
    observer = nodes[event.observer_id]
    observed = nodes[event.observed_id]
    now = event.timestamp
    deadline = now + window
    bytes_before = channel.bytes_sent
    counts = {"cloud": 0, "measurement": 0}

    def send(src, dst, kind, payload):
        counts[kind] += 1
        return channel.send(src.agent_id, dst.agent_id, kind, payload, now)

    record = MeasurementRecord(event.observer_id, event.observed_id, event.measurement)
    send(observer, observed, "measurement", record.encode())
    send(observer, observed, "cloud", observer.cloud_payload(now))
    inbox_observed = {e.kind: e for e in channel.receive(observed.agent_id, deadline) if e.src == observer.agent_id}

    def result(fused, reason=None):
        channel.discard(observer.agent_id)
        channel.discard(observed.agent_id)
        if reason:
            log.debug("encounter %s->%s at t=%.2f skipped: %s", event.observer_id, event.observed_id, now, reason)
        return ExchangeResult(fused, reason, counts["cloud"], counts["measurement"], channel.bytes_sent - bytes_before)

    no_fusion = {observer.agent_id: False, observed.agent_id: False}
    if set(inbox_observed) != {"measurement", "cloud"}:
        return result(no_fusion, "message to observed agent lost or late")
    send(observed, observer, "cloud", observed.cloud_payload(now))
    inbox_observer = {e.kind: e for e in channel.receive(observer.agent_id, deadline) if e.src == observed.agent_id}
    if "cloud" not in inbox_observer:
        return result(no_fusion, "reply to observer lost or late")
    try:
        meas = MeasurementRecord.decode(inbox_observed["measurement"].payload)
        # decode both clouds before touching either filter
        CloudMessage.decode(inbox_observed["cloud"].payload)
        CloudMessage.decode(inbox_observer["cloud"].payload)
    except ProtocolError as exc:
        return result(no_fusion, f"protocol error: {exc}")
    fused = {
        observer.agent_id: observer.fuse_payload(inbox_observer["cloud"].payload, meas, Role.OBSERVER),
        observed.agent_id: observed.fuse_payload(inbox_observed["cloud"].payload, meas, Role.OBSERVED),
    }
    return result(fused)
