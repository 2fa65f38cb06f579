"""Motion, ranging and relative-pose models.

All functions are vectorized over particles. Randomness always comes from an
explicit :class:`numpy.random.Generator` owned by the caller.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Pose2D,
    RelativePoseMeas,
    normalize_angles,
    predict_relative_pose_array,
)
from .maps import CellState, OccupancyGrid, raycast_scan

LOG_FLOOR = -20.0
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class OdometryReading:
    """Odometry-frame poses at the start and end of one interval."""

    prev_odom: Pose2D
    curr_odom: Pose2D

    @classmethod
    def identity(cls, at: Pose2D | None = None) -> OdometryReading:
        at = at or Pose2D(0.0, 0.0, 0.0)
        return cls(at, at)

    def decompose(self) -> tuple[float, float, float]:
        """``(rot1, trans, rot2)`` increments of the interval."""
        return decompose_odometry(self.prev_odom.as_array(), self.curr_odom.as_array())


@dataclass(frozen=True)
class MotionNoiseParams:
    """Odometry noise gains.

    ``alpha1`` rotation from rotation, ``alpha2`` rotation from translation,
    ``alpha3`` translation from translation, ``alpha4`` translation from
    rotation. Each enters as a variance coefficient on squared increments.
    """

    alpha1: float = 0.05
    alpha2: float = 0.05
    alpha3: float = 0.05
    alpha4: float = 0.05

    def __post_init__(self) -> None:
        for name in ("alpha1", "alpha2", "alpha3", "alpha4"):
            v = float(getattr(self, name))
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite value >= 0, got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def zero(cls) -> MotionNoiseParams:
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class RangeScan:
    """One ranging measurement: body-frame beam angles and measured distances."""

    beam_angles: np.ndarray
    ranges: np.ndarray
    max_range: float

    def __post_init__(self) -> None:
        angles = np.array(self.beam_angles, dtype=float).ravel()
        ranges = np.array(self.ranges, dtype=float).ravel()
        max_range = float(self.max_range)
        if angles.size == 0 or angles.shape != ranges.shape:
            raise ValueError("beam_angles and ranges must be non-empty and of equal length")
        if not (max_range > 0 and math.isfinite(max_range)):
            raise ValueError(f"max_range must be > 0, got {max_range!r}")
        if not np.isfinite(angles).all():
            raise ValueError("beam angles must be finite")
        if not (np.isfinite(ranges).all() and (ranges >= 0).all() and (ranges <= max_range).all()):
            raise ValueError("every range must lie in [0, max_range]")
        angles.setflags(write=False)
        ranges.setflags(write=False)
        object.__setattr__(self, "beam_angles", angles)
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "max_range", max_range)


@dataclass(frozen=True)
class RangeModelParams:
    """Beam-model mixture weights and the hit-component spread."""

    z_hit: float = 0.8
    z_rand: float = 0.15
    z_max: float = 0.05
    sigma_hit: float = 0.1

    def __post_init__(self) -> None:
        weights = (self.z_hit, self.z_rand, self.z_max)
        if min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"z_hit, z_rand, z_max must be >= 0 and sum to 1, got {weights}")
        if not self.sigma_hit > 0:
            raise ValueError(f"sigma_hit must be > 0, got {self.sigma_hit!r}")


# --------------------------------------------------------------------------
# motion


def decompose_odometry(prev: np.ndarray, curr: np.ndarray) -> tuple[float, float, float]:
    dx = curr[0] - prev[0]
    dy = curr[1] - prev[1]
    trans = math.hypot(dx, dy)
    # pure rotation: atan2 of a near-zero vector is noise
    rot1 = 0.0 if trans < 1e-9 else float(normalize_angles(math.atan2(dy, dx) - prev[2]))
    rot2 = float(normalize_angles(curr[2] - prev[2] - rot1))
    return rot1, trans, rot2


def sample_motion_array(
    poses: np.ndarray,
    u: OdometryReading,
    params: MotionNoiseParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Propagate ``(K, 3)`` poses through the odometry motion model."""
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    k = poses.shape[0]
    rot1, trans, rot2 = u.decompose()
    a1, a2, a3, a4 = params.alpha1, params.alpha2, params.alpha3, params.alpha4
    sd_rot1 = math.sqrt(a1 * rot1**2 + a2 * trans**2)
    sd_trans = math.sqrt(a3 * trans**2 + a4 * (rot1**2 + rot2**2))
    sd_rot2 = math.sqrt(a1 * rot2**2 + a2 * trans**2)
    noise = rng.standard_normal((k, 3))
    r1 = rot1 + sd_rot1 * noise[:, 0]
    tr = trans + sd_trans * noise[:, 1]
    r2 = rot2 + sd_rot2 * noise[:, 2]
    heading = poses[:, 2] + r1
    out = np.empty_like(poses)
    out[:, 0] = poses[:, 0] + tr * np.cos(heading)
    out[:, 1] = poses[:, 1] + tr * np.sin(heading)
    out[:, 2] = normalize_angles(heading + r2)
    return out


def sample_motion(
    x_prev: Pose2D,
    u: OdometryReading,
    params: MotionNoiseParams,
    rng: np.random.Generator,
) -> Pose2D:
    """Draw one successor pose for ``x_prev`` given odometry ``u``."""
    return Pose2D.from_array(sample_motion_array(x_prev.as_array()[None, :], u, params, rng)[0])


# --------------------------------------------------------------------------
# ranging


def beam_log_likelihoods(z: np.ndarray, expected: np.ndarray, max_range: float, params: RangeModelParams) -> np.ndarray:
    """Per-beam floored log densities of the beam mixture, broadcasting ``z`` over rows of ``expected``."""
    s = params.sigma_hit
    resid = (z - expected) / s
    p = params.z_hit * np.exp(-0.5 * resid * resid - _LOG_SQRT_2PI) / s
    p = p + params.z_rand / max_range
    p = p + params.z_max * (z >= max_range)
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(p), LOG_FLOOR)


def range_log_likelihood_array(
    z: RangeScan, poses: np.ndarray, m: OccupancyGrid, params: RangeModelParams
) -> np.ndarray:
    """Log of the scan likelihood for each of ``(K, 3)`` poses.

    Poses outside FREE space have no valid prediction and get the floor on
    every beam.
    """
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    expected = raycast_scan(m, poses, z.beam_angles, z.max_range)
    ll = beam_log_likelihoods(z.ranges[None, :], expected, z.max_range, params).sum(axis=1)
    valid = m.state_at(poses[:, 0], poses[:, 1]) == CellState.FREE
    return np.where(valid, ll, LOG_FLOOR * z.ranges.size)


def range_log_likelihood(z: RangeScan, x: Pose2D, m: OccupancyGrid, params: RangeModelParams) -> float:
    return float(range_log_likelihood_array(z, x.as_array()[None, :], m, params)[0])


def range_likelihood(z: RangeScan, x: Pose2D, m: OccupancyGrid, params: RangeModelParams) -> float:
    """Beam-model likelihood ``p(z | x, m)``.

    Large scans can fall below the smallest positive double; the filters use
    :func:`range_log_likelihood_array` instead.
    """
    if not isinstance(z, RangeScan):
        raise TypeError("z must be a RangeScan")
    return math.exp(range_log_likelihood(z, x, m, params))


# --------------------------------------------------------------------------
# relative pose


class EvaluationCounter:
    """Thread-safe tally of relative-pose likelihood evaluations."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    @property
    def count(self) -> int:
        return self._count

    def add(self, n: int) -> None:
        with self._lock:
            self._count += int(n)

    def reset(self) -> int:
        with self._lock:
            n, self._count = self._count, 0
        return n


relative_pose_evaluations = EvaluationCounter()


def relative_pose_likelihood_array(r_meas: RelativePoseMeas, observer: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Vectorized relative-pose likelihood over broadcastable pose arrays.

    Every element of the result counts as one evaluation in
    :data:`relative_pose_evaluations`.
    """
    rng_hat, bearing_hat = predict_relative_pose_array(observer, target)
    er = (r_meas.range - rng_hat) / r_meas.sigma_range
    eb = normalize_angles(r_meas.bearing - bearing_hat) / r_meas.sigma_bearing
    norm = 1.0 / (2.0 * math.pi * r_meas.sigma_range * r_meas.sigma_bearing)
    out = norm * np.exp(-0.5 * (er * er + eb * eb))
    relative_pose_evaluations.add(out.size)
    return out


def relative_pose_likelihood(r_meas: RelativePoseMeas, observer: Pose2D, target: Pose2D) -> float:
    """Density of ``r_meas`` given the two poses: independent Gaussians on range and wrapped bearing."""
    return float(relative_pose_likelihood_array(r_meas, observer.as_array(), target.as_array()))
