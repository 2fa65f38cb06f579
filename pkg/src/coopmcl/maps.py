"""Occupancy grids: PGM/JSON loading, raycasting and free-space sampling.

Cell ``(row, col)`` covers ``[col*res, (col+1)*res) x [row*res, (row+1)*res)``
in the grid frame, whose pose in the map frame is ``origin``. Row 0 is the
bottom of the map, so image rows are flipped on load and on save.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .geometry import Pose2D, compose_array, inverse, normalize_angles


class CellState(enum.IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


class MapLoadError(ValueError):
    """Raised when a map image or its metadata cannot be parsed."""


class SamplingError(ValueError):
    """Raised when free-space sampling is requested on a grid with no FREE cell."""


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Immutable tri-state occupancy grid.

    Parameters
    ----------
    cells:
        ``(height, width)`` array of :class:`CellState` codes, row 0 at the
        bottom of the map.
    resolution:
        Cell edge length in meters.
    origin:
        Map-frame pose of the lower-left corner of cell ``(0, 0)``.
    """

    cells: np.ndarray
    resolution: float
    origin: Pose2D = field(default_factory=lambda: Pose2D(0.0, 0.0, 0.0))

    def __post_init__(self) -> None:
        cells = np.array(self.cells, dtype=np.int8)
        if cells.ndim != 2 or cells.size == 0:
            raise ValueError("cells must be a non-empty 2-D array")
        if not np.isin(cells, (CellState.FREE, CellState.OCCUPIED, CellState.UNKNOWN)).all():
            raise ValueError("cells contain codes other than FREE/OCCUPIED/UNKNOWN")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise ValueError(f"resolution must be > 0, got {self.resolution!r}")
        cells.setflags(write=False)
        blocking = np.ascontiguousarray(cells == CellState.OCCUPIED, dtype=np.uint8)
        blocking.setflags(write=False)
        free_index = np.flatnonzero(cells.ravel() == CellState.FREE)
        free_index.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "_blocking", blocking)
        object.__setattr__(self, "_free_index", free_index)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def n_free(self) -> int:
        return int(self._free_index.size)

    @property
    def free_index(self) -> np.ndarray:
        """Flat (row-major) indices of FREE cells."""
        return self._free_index

    @property
    def blocking(self) -> np.ndarray:
        """``uint8`` mask of ray-terminating (OCCUPIED) cells."""
        return self._blocking

    @property
    def _axis_aligned(self) -> bool:
        return self.origin.theta == 0.0

    def to_grid_frame(self, poses: np.ndarray) -> np.ndarray:
        """Express ``(K, 3)`` map-frame poses in the grid frame."""
        poses = np.asarray(poses, dtype=float)
        if self._axis_aligned:
            out = poses.copy()
            out[..., 0] -= self.origin.x
            out[..., 1] -= self.origin.y
            return out
        return compose_array(inverse(self.origin), poses)

    def to_map_frame(self, poses: np.ndarray) -> np.ndarray:
        poses = np.asarray(poses, dtype=float)
        if self._axis_aligned:
            out = poses.copy()
            out[..., 0] += self.origin.x
            out[..., 1] += self.origin.y
            return out
        return compose_array(self.origin, poses)

    def cell_of(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """``(row, col)`` of map-frame points; may be out of bounds."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        pts = np.stack([x, y, np.zeros_like(x)], axis=-1)
        g = self.to_grid_frame(pts)
        col = np.floor(g[..., 0] / self.resolution).astype(np.int64)
        row = np.floor(g[..., 1] / self.resolution).astype(np.int64)
        return row, col

    def state_at(self, x, y) -> np.ndarray:
        """Cell state at map-frame points; ``-1`` for out-of-bounds."""
        row, col = self.cell_of(x, y)
        inside = (row >= 0) & (row < self.height) & (col >= 0) & (col < self.width)
        out = np.full(row.shape, -1, dtype=np.int8)
        out[inside] = self.cells[row[inside], col[inside]]
        return out

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        g = np.array([(col + 0.5) * self.resolution, (row + 0.5) * self.resolution, 0.0])
        m = self.to_map_frame(g)
        return float(m[0]), float(m[1])


def is_free(m: OccupancyGrid, x: float, y: float) -> bool:
    """True iff ``(x, y)`` falls in an in-bounds FREE cell."""
    if not (math.isfinite(x) and math.isfinite(y)):
        return False
    return bool(m.state_at(x, y) == CellState.FREE)


def is_free_array(m: OccupancyGrid, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return m.state_at(x, y) == CellState.FREE


# --------------------------------------------------------------------------
# raycasting


@numba.njit(cache=True)
def _cast_one(blocking, res, x, y, angle, max_range):
    height, width = blocking.shape
    cx = x / res
    cy = y / res
    i = int(math.floor(cx))
    j = int(math.floor(cy))
    if i < 0 or j < 0 or i >= width or j >= height:
        return max_range
    if blocking[j, i]:
        return 0.0
    dx = math.cos(angle)
    dy = math.sin(angle)
    inf = math.inf
    if dx > 1e-12:
        step_i = 1
        t_max_x = (i + 1 - cx) * res / dx
        t_delta_x = res / dx
    elif dx < -1e-12:
        step_i = -1
        t_max_x = (cx - i) * res / -dx
        t_delta_x = res / -dx
    else:
        step_i = 0
        t_max_x = inf
        t_delta_x = inf
    if dy > 1e-12:
        step_j = 1
        t_max_y = (j + 1 - cy) * res / dy
        t_delta_y = res / dy
    elif dy < -1e-12:
        step_j = -1
        t_max_y = (cy - j) * res / -dy
        t_delta_y = res / -dy
    else:
        step_j = 0
        t_max_y = inf
        t_delta_y = inf
    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            i += step_i
            t_max_x += t_delta_x
        else:
            t = t_max_y
            j += step_j
            t_max_y += t_delta_y
        if t >= max_range:
            return max_range
        if i < 0 or j < 0 or i >= width or j >= height:
            return max_range
        if blocking[j, i]:
            return t


@numba.njit(cache=True)
def _cast_rays(blocking, res, xs, ys, angles, max_range):
    out = np.empty(xs.shape[0])
    for k in range(xs.shape[0]):
        out[k] = _cast_one(blocking, res, xs[k], ys[k], angles[k], max_range)
    return out


@numba.njit(cache=True)
def _cast_scan(blocking, res, poses, beam_angles, max_range):
    n = poses.shape[0]
    b = beam_angles.shape[0]
    out = np.empty((n, b))
    for k in range(n):
        x = poses[k, 0]
        y = poses[k, 1]
        th = poses[k, 2]
        for a in range(b):
            out[k, a] = _cast_one(blocking, res, x, y, th + beam_angles[a], max_range)
    return out


def raycast(m: OccupancyGrid, origin: Pose2D, ray_angle: float, max_range: float) -> float:
    """Distance along ``origin.theta + ray_angle`` to the first OCCUPIED cell.

    Returns ``max_range`` when nothing is hit within range or when ``origin``
    lies outside the grid. UNKNOWN cells do not stop the ray.
    """
    if not max_range > 0:
        raise ValueError(f"max_range must be > 0, got {max_range!r}")
    g = m.to_grid_frame(origin.as_array())
    return float(
        _cast_one(m.blocking, m.resolution, g[0], g[1], g[2] + float(ray_angle), float(max_range))
    )


def raycast_scan(m: OccupancyGrid, poses: np.ndarray, beam_angles: np.ndarray, max_range: float) -> np.ndarray:
    """Expected ranges for every pose/beam pair, shape ``(K, B)``."""
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    g = np.ascontiguousarray(m.to_grid_frame(poses))
    return _cast_scan(
        m.blocking, m.resolution, g, np.ascontiguousarray(beam_angles, dtype=float), float(max_range)
    )


# --------------------------------------------------------------------------
# sampling


def sample_free_positions(m: OccupancyGrid, n: int, rng: np.random.Generator) -> np.ndarray:
    """``(n, 2)`` positions uniform over FREE cells."""
    if m.n_free == 0:
        raise SamplingError("grid has no FREE cell to sample from")
    flat = m.free_index[rng.integers(0, m.n_free, size=n)]
    row, col = np.divmod(flat, m.width)
    jitter = rng.random((n, 2))
    g = np.empty((n, 3))
    g[:, 0] = (col + jitter[:, 0]) * m.resolution
    g[:, 1] = (row + jitter[:, 1]) * m.resolution
    g[:, 2] = 0.0
    return m.to_map_frame(g)[:, :2]


def sample_free_poses(m: OccupancyGrid, n: int, rng: np.random.Generator) -> np.ndarray:
    """``(n, 3)`` poses: position uniform over FREE cells, heading uniform."""
    out = np.empty((n, 3))
    out[:, :2] = sample_free_positions(m, n, rng)
    out[:, 2] = normalize_angles(rng.uniform(-math.pi, math.pi, size=n))
    return out


def sample_free_pose(m: OccupancyGrid, rng: np.random.Generator) -> Pose2D:
    return Pose2D.from_array(sample_free_poses(m, 1, rng)[0])


# --------------------------------------------------------------------------
# file I/O


def _pgm_tokens(data: bytes, path: Path):
    """Yield ``(token, offset_after)`` for header tokens, skipping comments."""
    pos = 0
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            end = data.find(b"\n", pos)
            pos = n if end < 0 else end + 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
                pos += 1
            yield data[start:pos], pos


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit P5 or P2 PGM into a ``(height, width)`` array, top row first."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MapLoadError(f"{path}: cannot read map image ({exc.strerror})") from exc
    tokens = _pgm_tokens(data, path)
    header = []
    end = 0
    for tok, end in tokens:
        header.append(tok)
        if len(header) == 4:
            break
    if len(header) < 4:
        raise MapLoadError(f"{path}: truncated PGM header (found {len(header)} of 4 fields)")
    magic = header[0]
    if magic not in (b"P5", b"P2"):
        raise MapLoadError(f"{path}: unsupported magic {magic!r} at byte 0 (expected P5 or P2)")
    try:
        width, height, maxval = (int(t) for t in header[1:])
    except ValueError as exc:
        raise MapLoadError(f"{path}: non-integer PGM header field ({exc})") from exc
    if width <= 0 or height <= 0:
        raise MapLoadError(f"{path}: invalid dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise MapLoadError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    count = width * height
    if magic == b"P5":
        raster = data[end + 1 : end + 1 + count]
        if len(raster) != count:
            raise MapLoadError(
                f"{path}: raster has {len(raster)} bytes at offset {end + 1}, expected {count} ({width}x{height})"
            )
        pixels = np.frombuffer(raster, dtype=np.uint8)
    else:
        values = []
        for tok, off in tokens:
            try:
                values.append(int(tok))
            except ValueError as exc:
                raise MapLoadError(f"{path}: bad pixel value {tok!r} near byte {off}") from exc
        if len(values) != count:
            raise MapLoadError(f"{path}: found {len(values)} pixel values, expected {count} ({width}x{height})")
        pixels = np.array(values, dtype=np.int64)
        if pixels.min() < 0 or pixels.max() > maxval:
            raise MapLoadError(f"{path}: pixel value outside [0, {maxval}]")
    return (pixels.reshape(height, width).astype(float) / maxval)


def write_pgm(path, brightness: np.ndarray) -> None:
    """Write a ``(height, width)`` array of brightness in ``[0, 1]`` as binary P5."""
    img = np.clip(np.rint(np.asarray(brightness) * 255), 0, 255).astype(np.uint8)
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


@dataclass(frozen=True)
class MapMetadata:
    resolution: float
    origin: Pose2D = field(default_factory=lambda: Pose2D(0.0, 0.0, 0.0))
    occupied_thresh: float = 0.35
    free_thresh: float = 0.8
    negate: bool = False

    def to_json(self) -> dict:
        return {
            "resolution": self.resolution,
            "origin": {"x": self.origin.x, "y": self.origin.y, "theta": self.origin.theta},
            "occupied_thresh": self.occupied_thresh,
            "free_thresh": self.free_thresh,
            "negate": self.negate,
        }


def read_metadata(path) -> MapMetadata:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise MapLoadError(f"{path}: cannot read map metadata ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise MapLoadError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(doc, dict):
        raise MapLoadError(f"{path}: metadata must be a JSON object")
    try:
        resolution = float(doc["resolution"])
        o = doc.get("origin", {"x": 0.0, "y": 0.0, "theta": 0.0})
        origin = Pose2D(float(o["x"]), float(o["y"]), float(o.get("theta", 0.0)))
        meta = MapMetadata(
            resolution=resolution,
            origin=origin,
            occupied_thresh=float(doc.get("occupied_thresh", 0.35)),
            free_thresh=float(doc.get("free_thresh", 0.8)),
            negate=bool(doc.get("negate", False)),
        )
    except KeyError as exc:
        raise MapLoadError(f"{path}: missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise MapLoadError(f"{path}: invalid field value ({exc})") from exc
    if not resolution > 0:
        raise MapLoadError(f"{path}: field 'resolution' must be > 0, got {resolution}")
    if not 0.0 <= meta.occupied_thresh < meta.free_thresh <= 1.0:
        raise MapLoadError(f"{path}: need 0 <= occupied_thresh < free_thresh <= 1")
    return meta


def grid_from_brightness(brightness: np.ndarray, meta: MapMetadata) -> OccupancyGrid:
    """Classify an image (top row first, values in ``[0, 1]``) into a grid."""
    b = 1.0 - brightness if meta.negate else brightness
    cells = np.full(b.shape, CellState.UNKNOWN, dtype=np.int8)
    cells[b <= meta.occupied_thresh] = CellState.OCCUPIED
    cells[b >= meta.free_thresh] = CellState.FREE
    return OccupancyGrid(cells[::-1], meta.resolution, meta.origin)


def load_map(image_path, meta_path) -> OccupancyGrid:
    """Load a PGM image plus JSON metadata into an :class:`OccupancyGrid`.

    Brightness is normalized to ``[0, 1]`` by the PGM ``maxval``. Pixels with
    brightness at or below ``occupied_thresh`` become OCCUPIED, at or above
    ``free_thresh`` FREE, anything between UNKNOWN. ``negate`` inverts the
    brightness first.
    """
    meta = read_metadata(meta_path)
    return grid_from_brightness(read_pgm(image_path), meta)


def save_map(m: OccupancyGrid, image_path, meta_path) -> None:
    brightness = np.full(m.cells.shape, 0.5)
    brightness[m.cells == CellState.FREE] = 1.0
    brightness[m.cells == CellState.OCCUPIED] = 0.0
    write_pgm(image_path, brightness[::-1])
    meta = MapMetadata(resolution=m.resolution, origin=m.origin)
    Path(meta_path).write_text(json.dumps(meta.to_json(), indent=2) + "\n", encoding="utf-8")
