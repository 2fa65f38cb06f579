"""Cooperative multi-agent Monte Carlo localization."""

from .estimator import MonteCarloLocalizer
from .filter import (
    FilterConfig,
    ParticleCloud,
    Role,
    fuse_encounter,
    init_uniform,
    mcl_step,
    pose_estimate,
    predict,
    resample,
    update_weights,
)
from .geometry import Pose2D, RelativePoseMeas, compose, normalize_angle, predict_relative_pose
from .maps import CellState, OccupancyGrid, is_free, load_map, raycast, sample_free_pose
from .models import (
    MotionNoiseParams,
    OdometryReading,
    RangeModelParams,
    RangeScan,
    range_likelihood,
    relative_pose_likelihood,
    sample_motion,
)

__version__ = "0.1.0"
