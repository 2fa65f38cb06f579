"""Binary wire format for encounter messages.

All records are little-endian.

Cloud message::

    magic "CPCM" | version u16 | sender_id u32 | timestamp f64 | K u32 | K x (x f64, y f64, theta f64)

Measurement record::

    magic "CPRM" | version u16 | observer_id u32 | observed_id u32 | timestamp f64
    | range f64 | bearing f64 | sigma_range f64 | sigma_bearing f64
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..geometry import RelativePoseMeas

VERSION = 1
CLOUD_MAGIC = b"CPCM"
MEAS_MAGIC = b"CPRM"
_CLOUD_HEADER = struct.Struct("<4sHIdI")
_MEAS = struct.Struct("<4sHIIddddd")
CLOUD_HEADER_SIZE = _CLOUD_HEADER.size
MEASUREMENT_SIZE = _MEAS.size
RECORD_SIZE = 24


class ProtocolError(ValueError):
    """A payload could not be decoded."""


@dataclass(frozen=True, eq=False)
class CloudMessage:
    sender_id: int
    timestamp: float
    particles: np.ndarray

    def encode(self) -> bytes:
        p = np.ascontiguousarray(self.particles, dtype="<f8")
        if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 1:
            raise ValueError(f"particles must have shape (K, 3) with K >= 1, got {p.shape}")
        head = _CLOUD_HEADER.pack(CLOUD_MAGIC, VERSION, self.sender_id, self.timestamp, p.shape[0])
        return head + p.tobytes()

    @classmethod
    def decode(cls, data: bytes) -> CloudMessage:
        if len(data) < CLOUD_HEADER_SIZE:
            raise ProtocolError(f"cloud message truncated: {len(data)} bytes < header {CLOUD_HEADER_SIZE}")
        magic, version, sender, ts, k = _CLOUD_HEADER.unpack_from(data)
        if magic != CLOUD_MAGIC:
            raise ProtocolError(f"bad cloud magic {magic!r}")
        if version != VERSION:
            raise ProtocolError(f"unsupported cloud message version {version}")
        if k < 1:
            raise ProtocolError("cloud message carries no particles")
        expected = CLOUD_HEADER_SIZE + RECORD_SIZE * k
        if len(data) != expected:
            raise ProtocolError(f"cloud message is {len(data)} bytes, header says {expected} (K={k})")
        particles = np.frombuffer(data, dtype="<f8", offset=CLOUD_HEADER_SIZE).reshape(k, 3).astype(float)
        if not np.isfinite(particles).all() or not np.isfinite(ts):
            raise ProtocolError("cloud message contains non-finite values")
        return cls(sender, ts, particles)


def cloud_message_size(k: int) -> int:
    return CLOUD_HEADER_SIZE + RECORD_SIZE * k


@dataclass(frozen=True)
class MeasurementRecord:
    observer_id: int
    observed_id: int
    measurement: RelativePoseMeas

    def encode(self) -> bytes:
        m = self.measurement
        return _MEAS.pack(
            MEAS_MAGIC,
            VERSION,
            self.observer_id,
            self.observed_id,
            m.timestamp,
            m.range,
            m.bearing,
            m.sigma_range,
            m.sigma_bearing,
        )

    @classmethod
    def decode(cls, data: bytes) -> MeasurementRecord:
        if len(data) != MEASUREMENT_SIZE:
            raise ProtocolError(f"measurement record is {len(data)} bytes, expected {MEASUREMENT_SIZE}")
        magic, version, observer, observed, ts, rng, bearing, s_r, s_b = _MEAS.unpack(data)
        if magic != MEAS_MAGIC:
            raise ProtocolError(f"bad measurement magic {magic!r}")
        if version != VERSION:
            raise ProtocolError(f"unsupported measurement version {version}")
        try:
            meas = RelativePoseMeas(rng, bearing, s_r, s_b, ts)
        except ValueError as exc:
            raise ProtocolError(f"invalid measurement values: {exc}") from exc
        return cls(observer, observed, meas)
