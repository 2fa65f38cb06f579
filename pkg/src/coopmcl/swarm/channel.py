"""Simulated lossy, delayed message channel between agents."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Envelope:
    src: int
    dst: int
    kind: str
    payload: bytes
    sent_at: float
    deliver_at: float


class SimulatedChannel:
    """Point-to-point mailbox channel.

    Every message is dropped independently with ``drop_probability``;
    surviving messages become receivable ``latency`` seconds after sending.
    Only ``bytes`` payloads travel through the channel.
    """

    def __init__(self, latency: float = 0.0, drop_probability: float = 0.0, rng: np.random.Generator | None = None):
        if latency < 0:
            raise ValueError("latency must be >= 0")
        if not 0.0 <= drop_probability <= 1.0:
            raise ValueError("drop_probability must lie in [0, 1]")
        self.latency = float(latency)
        self.drop_probability = float(drop_probability)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._boxes: dict[int, deque[Envelope]] = defaultdict(deque)
        self.sent = 0
        self.dropped = 0
        self.bytes_sent = 0

    def send(self, src: int, dst: int, kind: str, payload: bytes, now: float) -> bool:
        """Queue ``payload`` for ``dst``; returns False if the message was lost."""
        if not isinstance(payload, (bytes, bytearray)):
            raise TypeError("channel payloads must be bytes")
        self.sent += 1
        self.bytes_sent += len(payload)
        if self.drop_probability > 0 and self.rng.random() < self.drop_probability:
            self.dropped += 1
            return False
        self._boxes[dst].append(Envelope(src, dst, kind, bytes(payload), now, now + self.latency))
        return True

    def receive(self, dst: int, now: float) -> list[Envelope]:
        """Pop every message for ``dst`` whose delivery time has come."""
        box = self._boxes[dst]
        ready = [e for e in box if e.deliver_at <= now]
        if ready:
            self._boxes[dst] = deque(e for e in box if e.deliver_at > now)
        return ready

    def discard(self, dst: int) -> int:
        """Drop everything still queued for ``dst``."""
        n = len(self._boxes[dst])
        self._boxes[dst].clear()
        return n
