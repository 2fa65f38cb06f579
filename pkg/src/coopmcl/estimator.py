"""Estimator-style wrapper around the functional filter API."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import filter as pf
from .geometry import Pose2D, RelativePoseMeas
from .maps import OccupancyGrid
from .models import MotionNoiseParams, OdometryReading, RangeModelParams, RangeScan
from .validation import check_count, check_fraction, check_random_state


class MonteCarloLocalizer(BaseEstimator):
    """Monte Carlo localization of one agent, with cooperative encounter fusion.

    ``fit`` initializes the particle cloud on a map, ``partial_fit`` consumes
    one odometry/scan pair, ``fuse`` folds in another agent's cloud at an
    encounter and ``predict`` returns the current pose estimate.

    Parameters
    ----------
    n_particles : int
        Cloud size K.
    alpha : tuple of 4 floats
        Odometry noise gains, see :class:`~coopmcl.models.MotionNoiseParams`.
    z_hit, z_rand, z_max, sigma_hit : float
        Beam-model mixture parameters.
    resample_threshold : float
        Resample when ESS falls below this fraction of K. 1.0 resamples after
        every measurement.
    init : {"global", "pose"}
        Uniform over free space, or Gaussian around ``initial_pose``.
    init_sigma_xy, init_sigma_theta : float
        Spread of the ``"pose"`` initialization.
    random_state : None, int, SeedSequence or Generator
    """

    def __init__(
        self,
        n_particles=1000,
        alpha=(0.05, 0.05, 0.05, 0.05),
        z_hit=0.8,
        z_rand=0.15,
        z_max=0.05,
        sigma_hit=0.1,
        resample_threshold=0.5,
        init="global",
        init_sigma_xy=0.1,
        init_sigma_theta=0.1,
        random_state=None,
    ):
        self.n_particles = n_particles
        self.alpha = alpha
        self.z_hit = z_hit
        self.z_rand = z_rand
        self.z_max = z_max
        self.sigma_hit = sigma_hit
        self.resample_threshold = resample_threshold
        self.init = init
        self.init_sigma_xy = init_sigma_xy
        self.init_sigma_theta = init_sigma_theta
        self.random_state = random_state

    def _build_config(self) -> pf.FilterConfig:
        check_count(self.n_particles, "n_particles")
        check_fraction(self.resample_threshold, "resample_threshold")
        if len(self.alpha) != 4:
            raise ValueError(f"alpha must have 4 entries, got {len(self.alpha)}")
        return pf.FilterConfig(
            n_particles=self.n_particles,
            motion=MotionNoiseParams(*self.alpha),
            range_model=RangeModelParams(self.z_hit, self.z_rand, self.z_max, self.sigma_hit),
            resample_threshold=self.resample_threshold,
        )

    def fit(self, grid: OccupancyGrid, initial_pose: Pose2D | None = None, agent_id: int = 0, timestamp: float = 0.0):
        if not isinstance(grid, OccupancyGrid):
            raise TypeError("grid must be an OccupancyGrid")
        self.config_ = self._build_config()
        self.rng_ = check_random_state(self.random_state)
        self.map_ = grid
        if self.init == "global":
            self.cloud_ = pf.init_uniform(grid, self.n_particles, self.rng_, agent_id, timestamp)
        elif self.init == "pose":
            if initial_pose is None:
                raise ValueError("init='pose' needs an initial_pose")
            self.cloud_ = pf.init_gaussian(
                initial_pose, self.n_particles, self.init_sigma_xy, self.init_sigma_theta, self.rng_, agent_id, timestamp
            )
        else:
            raise ValueError(f"init must be 'global' or 'pose', got {self.init!r}")
        self.n_updates_ = 0
        self.n_fusions_ = 0
        self.last_fusion_rejected_ = False
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "cloud_"):
            raise NotFittedError("call fit() before using this MonteCarloLocalizer")

    def partial_fit(self, odometry: OdometryReading, scan: RangeScan | None, timestamp: float | None = None):
        """Advance the filter by one odometry interval and scan."""
        self._check_fitted()
        self.cloud_ = pf.mcl_step(self.cloud_, odometry, scan, self.map_, self.config_, self.rng_, timestamp)
        self.n_updates_ += 1
        return self

    def fuse(self, other: pf.ParticleCloud, measurement: RelativePoseMeas, role: pf.Role):
        """Update the cloud with another agent's particles at an encounter."""
        self._check_fitted()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", pf.FusionRejectedWarning)
            fused = pf.fuse_encounter(self.cloud_, other, measurement, role, self.rng_)
        rejected = any(issubclass(w.category, pf.FusionRejectedWarning) for w in caught)
        for w in caught:
            if not issubclass(w.category, pf.FusionRejectedWarning):
                warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
        self.last_fusion_rejected_ = rejected
        if not rejected:
            self.n_fusions_ += 1
        self.cloud_ = fused
        return self

    def predict(self, X=None) -> Pose2D:
        """Current pose estimate; ``X`` is ignored."""
        self._check_fitted()
        return pf.pose_estimate(self.cloud_)

    def transform(self, X=None) -> np.ndarray:
        """Current particle poses as a ``(K, 3)`` array; ``X`` is ignored."""
        self._check_fitted()
        return np.array(self.cloud_.particles)
