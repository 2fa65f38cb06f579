"""Planar pose types and SE(2) arithmetic.

Angles are kept in the half-open interval ``(-pi, pi]`` everywhere. Scalar
helpers work on :class:`Pose2D`; the ``*_array`` variants operate on ``(K, 3)``
arrays of ``[x, y, theta]`` rows and are what the filters use internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """Wrap an angle into ``(-pi, pi]``.

    Raises
    ------
    ValueError
        If ``a`` is NaN or infinite.
    """
    a = float(a)
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a!r}")
    r = math.remainder(a, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def normalize_angles(a: np.ndarray) -> np.ndarray:
    """Vectorized :func:`normalize_angle` (no finiteness check)."""
    a = np.asarray(a, dtype=float)
    r = a - TWO_PI * np.round(a / TWO_PI)
    r = np.where(r <= -math.pi, r + TWO_PI, r)
    return np.where(r > math.pi, r - TWO_PI, r)


@dataclass(frozen=True, slots=True)
class Pose2D:
    """Agent pose ``[x, y, theta]`` in the map frame (meters, radians)."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        x, y = float(self.x), float(self.y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"pose position must be finite, got ({x!r}, {y!r})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @classmethod
    def from_array(cls, row) -> Pose2D:
        x, y, theta = row
        return cls(float(x), float(y), float(theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    def __iter__(self):
        yield self.x
        yield self.y
        yield self.theta


@dataclass(frozen=True, slots=True)
class RelativePoseMeas:
    """Range and bearing of a detected agent in the observer's body frame.

    ``sigma_range`` and ``sigma_bearing`` are the standard deviations of the
    independent Gaussian errors on the two components.
    """

    range: float
    bearing: float
    sigma_range: float
    sigma_bearing: float
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        for name in ("range", "sigma_range", "sigma_bearing", "timestamp"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.range < 0:
            raise ValueError(f"range must be >= 0, got {self.range}")
        if self.sigma_range <= 0 or self.sigma_bearing <= 0:
            raise ValueError("sigma_range and sigma_bearing must be > 0")
        object.__setattr__(self, "bearing", normalize_angle(self.bearing))


def compose(a: Pose2D, b: Pose2D) -> Pose2D:
    """Rigid-body composition ``a (+) b``: ``b`` expressed in ``a``'s frame."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2D(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )


def inverse(a: Pose2D) -> Pose2D:
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2D(-c * a.x - s * a.y, s * a.x - c * a.y, -a.theta)


def relative(a: Pose2D, b: Pose2D) -> Pose2D:
    """Pose of ``b`` in the frame of ``a``, i.e. ``inverse(a) (+) b``."""
    return compose(inverse(a), b)


def compose_array(a: Pose2D | np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compose ``a`` with every row of ``b`` (``a`` may also be ``(K, 3)``)."""
    a = a.as_array() if isinstance(a, Pose2D) else np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ax, ay, at = a[..., 0], a[..., 1], a[..., 2]
    c, s = np.cos(at), np.sin(at)
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=float)
    out[..., 0] = ax + c * b[..., 0] - s * b[..., 1]
    out[..., 1] = ay + s * b[..., 0] + c * b[..., 1]
    out[..., 2] = normalize_angles(at + b[..., 2])
    return out


def predict_relative_pose(observer: Pose2D, target: Pose2D) -> tuple[float, float]:
    """Range and body-frame bearing from ``observer`` to ``target``.

    Coincident positions are degenerate: range 0 and bearing 0 by convention.
    """
    dx = target.x - observer.x
    dy = target.y - observer.y
    rng = math.hypot(dx, dy)
    if rng == 0.0:
        return 0.0, 0.0
    return rng, normalize_angle(math.atan2(dy, dx) - observer.theta)


def predict_relative_pose_array(observer: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`predict_relative_pose` over broadcastable ``(..., 3)`` arrays."""
    observer = np.asarray(observer, dtype=float)
    target = np.asarray(target, dtype=float)
    dx = target[..., 0] - observer[..., 0]
    dy = target[..., 1] - observer[..., 1]
    rng = np.hypot(dx, dy)
    bearing = normalize_angles(np.arctan2(dy, dx) - observer[..., 2])
    return rng, np.where(rng == 0.0, 0.0, bearing)


def angle_diff(a, b):
    """Wrapped difference ``a - b`` in ``(-pi, pi]``; works on scalars and arrays."""
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return normalize_angle(float(a) - float(b))
    return normalize_angles(np.asarray(a) - np.asarray(b))
