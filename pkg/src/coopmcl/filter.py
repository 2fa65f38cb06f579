"""Particle-filter operations: Monte Carlo localization and encounter fusion.

Clouds are immutable; every operation returns a new :class:`ParticleCloud`.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Pose2D, RelativePoseMeas, normalize_angles
from .maps import OccupancyGrid, sample_free_poses
from .models import (
    MotionNoiseParams,
    OdometryReading,
    RangeModelParams,
    RangeScan,
    range_log_likelihood_array,
    relative_pose_likelihood_array,
    sample_motion_array,
)
from .validation import check_count, check_fraction, check_poses, check_weights


class DegenerateWeightsWarning(RuntimeWarning):
    """Importance weights collapsed numerically; uniform weights were used."""


class FusionRejectedWarning(RuntimeWarning):
    """Every fusion weight underflowed; the own cloud was returned unchanged."""


class Role(enum.Enum):
    OBSERVER = "observer"
    OBSERVED = "observed"


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    """``K`` pose hypotheses for one agent, optionally weighted.

    ``particles`` is a read-only ``(K, 3)`` array of ``[x, y, theta]`` rows.
    ``weights is None`` means the cloud is uniformly weighted, which is the
    state after resampling.
    """

    particles: np.ndarray
    weights: np.ndarray | None = None
    agent_id: int = 0
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        p = np.array(check_poses(self.particles, "particles"))
        p[:, 2] = normalize_angles(p[:, 2])
        p.setflags(write=False)
        object.__setattr__(self, "particles", p)
        if self.weights is not None:
            w = np.array(check_weights(self.weights, p.shape[0]))
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.particles.shape[0]

    @property
    def K(self) -> int:
        return self.particles.shape[0]

    def normalized_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.K, 1.0 / self.K)
        return self.weights

    def effective_sample_size(self) -> float:
        w = self.normalized_weights()
        return float(1.0 / np.dot(w, w))

    def poses(self) -> list[Pose2D]:
        return [Pose2D.from_array(row) for row in self.particles]


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 1000
    motion: MotionNoiseParams = field(default_factory=MotionNoiseParams)
    range_model: RangeModelParams = field(default_factory=RangeModelParams)
    resample_threshold: float = 0.5

    def __post_init__(self) -> None:
        check_count(self.n_particles, "n_particles")
        check_fraction(self.resample_threshold, "resample_threshold")


def init_uniform(m: OccupancyGrid, K: int, rng: np.random.Generator, agent_id: int = 0, timestamp: float = 0.0) -> ParticleCloud:
    """Global initialization: ``K`` poses uniform over FREE space."""
    K = check_count(K, "K")
    return ParticleCloud(sample_free_poses(m, K, rng), agent_id=agent_id, timestamp=timestamp)


def init_gaussian(
    pose: Pose2D,
    K: int,
    sigma_xy: float,
    sigma_theta: float,
    rng: np.random.Generator,
    agent_id: int = 0,
    timestamp: float = 0.0,
) -> ParticleCloud:
    """Local initialization around a known pose."""
    K = check_count(K, "K")
    noise = rng.standard_normal((K, 3)) * np.array([sigma_xy, sigma_xy, sigma_theta])
    return ParticleCloud(pose.as_array() + noise, agent_id=agent_id, timestamp=timestamp)


def predict(cloud: ParticleCloud, u: OdometryReading, cfg: FilterConfig, rng: np.random.Generator) -> ParticleCloud:
    """Propagate every particle through the motion model; weights carried over."""
    return replace(cloud, particles=sample_motion_array(cloud.particles, u, cfg.motion, rng))


def update_weights(cloud: ParticleCloud, z: RangeScan, m: OccupancyGrid, cfg: FilterConfig) -> ParticleCloud:
    """Multiply the current weights by the scan likelihood and renormalize.

    The computation runs in log space. If the result is still unusable
    (NaN, or no positive weight) the cloud gets uniform weights and a
    :class:`DegenerateWeightsWarning` is issued.
    """
    ll = range_log_likelihood_array(z, cloud.particles, m, cfg.range_model)
    if cloud.weights is not None:
        with np.errstate(divide="ignore"):
            ll = ll + np.log(cloud.weights)
    w = _normalize_log_weights(ll)
    if w is None:
        warnings.warn("scan weights degenerate, falling back to uniform", DegenerateWeightsWarning, stacklevel=2)
        w = np.full(cloud.K, 1.0 / cloud.K)
    return replace(cloud, weights=w)


def _normalize_log_weights(logw: np.ndarray) -> np.ndarray | None:
    top = np.max(logw)
    if not np.isfinite(top):
        return None
    w = np.exp(logw - top)
    total = w.sum()
    if not (total > 0 and np.isfinite(total)):
        return None
    w /= total
    # absorb rounding so that the sum is within tolerance of 1
    w[np.argmax(w)] += 1.0 - w.sum()
    return w


def systematic_indices(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling: ``n`` indices drawn with one uniform offset.

    Index ``i`` appears either ``floor(n*w_i)`` or ``ceil(n*w_i)`` times.
    """
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    positions = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(cumulative, positions, side="right")
    return np.minimum(idx, len(weights) - 1)


def resample(cloud: ParticleCloud, rng: np.random.Generator) -> ParticleCloud:
    """Systematic resampling of a weighted cloud; the output is unweighted."""
    if cloud.weights is None:
        raise ValueError("resample requires a weighted cloud")
    w = check_weights(cloud.weights, cloud.K)
    idx = systematic_indices(w, cloud.K, rng)
    return replace(cloud, particles=cloud.particles[idx], weights=None)


def mcl_step(
    cloud: ParticleCloud,
    u: OdometryReading,
    z: RangeScan | None,
    m: OccupancyGrid,
    cfg: FilterConfig,
    rng: np.random.Generator,
    timestamp: float | None = None,
) -> ParticleCloud:
    """One predict / weight / resample cycle.

    Resampling happens only when the effective sample size drops below
    ``cfg.resample_threshold * K``. ``z=None`` skips the measurement update.
    """
    cloud = predict(cloud, u, cfg, rng)
    if z is not None:
        cloud = update_weights(cloud, z, m, cfg)
        if cloud.effective_sample_size() < cfg.resample_threshold * cloud.K:
            cloud = resample(cloud, rng)
    if timestamp is not None:
        cloud = replace(cloud, timestamp=float(timestamp))
    return cloud


def uniformize(cloud: ParticleCloud, rng: np.random.Generator) -> ParticleCloud:
    """Resample a weighted cloud so that plain uniform draws represent it."""
    if cloud.weights is None:
        return cloud
    return resample(cloud, rng)


def fuse_encounter(
    own: ParticleCloud,
    other: ParticleCloud,
    r_meas: RelativePoseMeas,
    own_role: Role,
    rng: np.random.Generator,
) -> ParticleCloud:
    """Fuse a received particle cloud and a relative-pose measurement into ``own``.

    ``K = len(own)`` pairs are formed by drawing one own and one other
    particle uniformly at random; each pair is weighted by the relative-pose
    likelihood, with the observer/target order given by ``own_role``. ``K``
    own poses are then resampled by those weights. Exactly ``K`` likelihood
    evaluations are made.

    Weighted inputs are first resampled to uniform. If all pair weights
    underflow the measurement is treated as inconsistent: ``own`` is returned
    unchanged and a :class:`FusionRejectedWarning` is issued.
    """
    own_role = Role(own_role)
    if len(other) == 0:
        raise ValueError("other cloud is empty")
    own_u = uniformize(own, rng)
    other_u = uniformize(other, rng)
    K = own_u.K
    a_idx = rng.integers(0, K, size=K)
    b_idx = rng.integers(0, other_u.K, size=K)
    own_pts = own_u.particles[a_idx]
    other_pts = other_u.particles[b_idx]
    if own_role is Role.OBSERVED:
        w = relative_pose_likelihood_array(r_meas, other_pts, own_pts)
    else:
        w = relative_pose_likelihood_array(r_meas, own_pts, other_pts)
    total = w.sum()
    if not (total > 0 and math.isfinite(total)):
        warnings.warn("relative-pose measurement inconsistent with both clouds", FusionRejectedWarning, stacklevel=2)
        return own
    w = w / total
    pick = systematic_indices(w, K, rng)
    return ParticleCloud(own_pts[pick], agent_id=own.agent_id, timestamp=own.timestamp)


def pose_estimate(cloud: ParticleCloud) -> Pose2D:
    """Weighted mean position and circular-mean heading."""
    w = cloud.normalized_weights()
    p = cloud.particles
    x = float(np.dot(w, p[:, 0]))
    y = float(np.dot(w, p[:, 1]))
    theta = math.atan2(float(np.dot(w, np.sin(p[:, 2]))), float(np.dot(w, np.cos(p[:, 2]))))
    return Pose2D(x, y, theta)


def position_spread(cloud: ParticleCloud) -> float:
    """Root-mean-square distance of particles from the weighted mean position."""
    w = cloud.normalized_weights()
    p = cloud.particles[:, :2]
    mean = w @ p
    return float(math.sqrt(w @ ((p - mean) ** 2).sum(axis=1)))
