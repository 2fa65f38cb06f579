import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from coopmcl.geometry import Pose2D
from coopmcl.maps import (
    CellState,
    MapLoadError,
    MapMetadata,
    OccupancyGrid,
    SamplingError,
    is_free,
    is_free_array,
    load_map,
    raycast,
    raycast_scan,
    read_pgm,
    sample_free_pose,
    sample_free_poses,
    save_map,
)
from coopmcl.reference import corridor_grid

from .conftest import open_grid
from .oracles import march_ray


def wall_grid(res=0.05):
    """10 m x 10 m grid with the half-plane x >= 2 m occupied."""
    g = open_grid(10.0, res).cells.copy()
    g[:, int(round(2.0 / res)) :] = CellState.OCCUPIED
    return OccupancyGrid(g, res)


def write_pgm_text(path, rows, maxval=255):
    h, w = len(rows), len(rows[0])
    body = "\n".join(" ".join(str(v) for v in r) for r in rows)
    path.write_text(f"P2\n# comment\n{w} {h}\n{maxval}\n{body}\n")


def write_meta(path, resolution=0.025, **kw):
    import json

    path.write_text(json.dumps({"resolution": resolution, "origin": {"x": 0, "y": 0, "theta": 0}, **kw}))


class TestGrid:
    def test_dimensions(self):
        g = OccupancyGrid(np.zeros((3, 5), dtype=np.int8), 0.1)
        assert (g.height, g.width) == (3, 5)
        assert g.cells.size == g.width * g.height

    @pytest.mark.parametrize("res", [0.0, -1.0, math.nan])
    def test_bad_resolution(self, res):
        with pytest.raises(ValueError):
            OccupancyGrid(np.zeros((2, 2), dtype=np.int8), res)

    def test_bad_codes(self):
        with pytest.raises(ValueError):
            OccupancyGrid(np.full((2, 2), 7), 0.1)

    def test_cells_read_only(self):
        g = OccupancyGrid(np.zeros((2, 2), dtype=np.int8), 0.1)
        with pytest.raises(ValueError):
            g.cells[0, 0] = 1

    def test_is_free(self):
        cells = np.array([[0, 1], [2, 0]], dtype=np.int8)
        g = OccupancyGrid(cells, 1.0)
        assert is_free(g, 0.5, 0.5)
        assert not is_free(g, 1.5, 0.5)
        assert not is_free(g, 0.5, 1.5)
        assert is_free(g, 1.5, 1.5)
        assert not is_free(g, -0.1, 0.5)
        assert not is_free(g, 5.0, 5.0)
        assert list(is_free_array(g, np.array([0.5, 1.5]), np.array([0.5, 0.5]))) == [True, False]

    def test_origin_offset(self):
        g = OccupancyGrid(np.array([[0, 1]], dtype=np.int8), 1.0, Pose2D(10.0, 5.0, 0.0))
        assert is_free(g, 10.5, 5.5)
        assert not is_free(g, 11.5, 5.5)
        assert not is_free(g, 0.5, 0.5)


class TestRaycast:
    def test_empty_map(self):
        g = open_grid(10.0, 0.1)
        for a in np.linspace(-math.pi, math.pi, 9):
            assert raycast(g, Pose2D(5, 5, 0), a, 5.0) == 5.0

    def test_axis_aligned_wall(self):
        g = wall_grid()
        assert raycast(g, Pose2D(0.0, 0.0, 0.0), 0.0, 5.0) == pytest.approx(2.0, abs=g.resolution)

    def test_diagonal_against_oracle(self):
        g = wall_grid()
        got = raycast(g, Pose2D(0.0, 0.0, 0.0), math.pi / 4, 5.0)
        ref = march_ray(g.blocking.astype(bool), g.resolution, 0.0, 0.0, math.pi / 4, 5.0)
        assert got == pytest.approx(2 * math.sqrt(2), abs=g.resolution)
        assert abs(got - ref) <= g.resolution * math.sqrt(2)

    def test_heading_adds_to_ray_angle(self):
        g = wall_grid()
        a = raycast(g, Pose2D(0.5, 5.0, math.pi / 8), math.pi / 8, 9.0)
        b = raycast(g, Pose2D(0.5, 5.0, 0.0), math.pi / 4, 9.0)
        assert a == pytest.approx(b, abs=1e-12)

    def test_origin_outside(self):
        assert raycast(wall_grid(), Pose2D(-1.0, 5.0, 0.0), 0.0, 3.0) == 3.0

    def test_origin_in_wall(self):
        assert raycast(wall_grid(), Pose2D(3.0, 5.0, 0.0), 0.0, 3.0) == 0.0

    def test_unknown_does_not_stop(self):
        cells = np.zeros((10, 40), dtype=np.int8)
        cells[:, 10:20] = CellState.UNKNOWN
        cells[:, 30:] = CellState.OCCUPIED
        g = OccupancyGrid(cells, 0.1)
        assert raycast(g, Pose2D(0.05, 0.5, 0.0), 0.0, 10.0) == pytest.approx(2.95, abs=1e-9)

    def test_invalid_max_range(self):
        with pytest.raises(ValueError):
            raycast(wall_grid(), Pose2D(0, 0, 0), 0.0, 0.0)

    @settings(max_examples=60, deadline=None)
    @given(
        x=st.floats(0.2, 13.8),
        y=st.floats(0.2, 3.3),
        angle=st.floats(-math.pi, math.pi),
    )
    def test_fine_marching_agreement(self, x, y, angle):
        g = corridor_grid()
        got = raycast(g, Pose2D(x, y, 0.0), angle, 3.0)
        ref = march_ray(g.blocking.astype(bool), g.resolution, x, y, angle, 3.0)
        assert abs(got - ref) <= g.resolution * math.sqrt(2)

    def test_scan_matches_single_rays(self, rng):
        g = corridor_grid()
        poses = np.column_stack([rng.uniform(1, 13, 20), rng.uniform(1.2, 2.3, 20), rng.uniform(-3, 3, 20)])
        beams = np.linspace(-1.5, 1.5, 7)
        out = raycast_scan(g, poses, beams, 3.0)
        assert out.shape == (20, 7)
        for k in range(20):
            for b, a in enumerate(beams):
                assert out[k, b] == raycast(g, Pose2D.from_array(poses[k]), a, 3.0)


class TestSampling:
    def test_single_free_cell(self, rng):
        cells = np.ones((3, 3), dtype=np.int8)
        cells[1, 2] = CellState.FREE
        g = OccupancyGrid(cells, 0.5)
        for _ in range(50):
            p = sample_free_pose(g, rng)
            assert 1.0 <= p.x < 1.5 and 0.5 <= p.y < 1.0

    def test_two_cell_frequency(self, rng):
        g = OccupancyGrid(np.zeros((1, 2), dtype=np.int8), 1.0)
        p = sample_free_poses(g, 10_000, rng)
        assert abs((p[:, 0] < 1.0).mean() - 0.5) <= 0.02

    def test_theta_uniform_chi_square(self, rng):
        p = sample_free_poses(open_grid(2.0, 0.5), 10_000, rng)
        counts, _ = np.histogram(p[:, 2], bins=20, range=(-math.pi, math.pi))
        assert stats.chisquare(counts).pvalue > 0.01
        assert np.all(p[:, 2] > -math.pi) and np.all(p[:, 2] <= math.pi)

    def test_only_free(self, rng):
        g = corridor_grid()
        p = sample_free_poses(g, 5000, rng)
        assert is_free_array(g, p[:, 0], p[:, 1]).all()

    def test_no_free_cell(self, rng):
        g = OccupancyGrid(np.ones((2, 2), dtype=np.int8), 1.0)
        with pytest.raises(SamplingError):
            sample_free_pose(g, rng)


class TestIO:
    def test_all_white_p2(self, tmp_path):
        write_pgm_text(tmp_path / "m.pgm", [[255] * 4] * 4)
        write_meta(tmp_path / "m.json")
        g = load_map(tmp_path / "m.pgm", tmp_path / "m.json")
        assert (g.cells == CellState.FREE).sum() == 16
        assert g.resolution == 0.025

    def test_all_black_p5(self, tmp_path):
        (tmp_path / "m.pgm").write_bytes(b"P5\n4 4\n255\n" + bytes(16))
        write_meta(tmp_path / "m.json")
        g = load_map(tmp_path / "m.pgm", tmp_path / "m.json")
        assert (g.cells == CellState.OCCUPIED).sum() == 16

    def test_thresholds_and_orientation(self, tmp_path):
        # top image row is the top of the map
        write_pgm_text(tmp_path / "m.pgm", [[0, 128, 255], [255, 255, 255]])
        write_meta(tmp_path / "m.json", resolution=1.0)
        g = load_map(tmp_path / "m.pgm", tmp_path / "m.json")
        assert list(g.cells[1]) == [CellState.OCCUPIED, CellState.UNKNOWN, CellState.FREE]
        assert (g.cells[0] == CellState.FREE).all()

    def test_negate(self, tmp_path):
        write_pgm_text(tmp_path / "m.pgm", [[0, 255]])
        write_meta(tmp_path / "m.json", resolution=1.0, negate=True)
        g = load_map(tmp_path / "m.pgm", tmp_path / "m.json")
        assert list(g.cells[0]) == [CellState.FREE, CellState.OCCUPIED]

    def test_maxval_scaling(self, tmp_path):
        write_pgm_text(tmp_path / "m.pgm", [[100, 0, 50]], maxval=100)
        assert read_pgm(tmp_path / "m.pgm").tolist() == [[1.0, 0.0, 0.5]]

    def test_sixteen_bit_rejected(self, tmp_path):
        write_pgm_text(tmp_path / "m.pgm", [[65535, 0]], maxval=65535)
        with pytest.raises(MapLoadError, match="8-bit"):
            read_pgm(tmp_path / "m.pgm")

    def test_round_trip(self, tmp_path):
        g = corridor_grid()
        save_map(g, tmp_path / "c.pgm", tmp_path / "c.json")
        h = load_map(tmp_path / "c.pgm", tmp_path / "c.json")
        assert np.array_equal(g.cells, h.cells) and h.resolution == g.resolution

    @pytest.mark.parametrize(
        "content",
        [b"P6\n1 1\n255\n\x00", b"P5\n2 2\n255\n\x00", b"P2\n2 2\n255\n1 2 3", b"P5\nx 2\n255\n", b""],
    )
    def test_malformed_image(self, tmp_path, content):
        (tmp_path / "m.pgm").write_bytes(content)
        write_meta(tmp_path / "m.json")
        with pytest.raises(MapLoadError, match="m.pgm"):
            load_map(tmp_path / "m.pgm", tmp_path / "m.json")

    def test_missing_files(self, tmp_path):
        write_meta(tmp_path / "m.json")
        with pytest.raises(MapLoadError):
            load_map(tmp_path / "nope.pgm", tmp_path / "m.json")
        with pytest.raises(MapLoadError):
            load_map(tmp_path / "nope.pgm", tmp_path / "nope.json")

    @pytest.mark.parametrize("meta", ['{"origin": {}}', '{"resolution": -1}', "[1]", "{bad json"])
    def test_bad_metadata(self, tmp_path, meta):
        write_pgm_text(tmp_path / "m.pgm", [[255]])
        (tmp_path / "m.json").write_text(meta)
        with pytest.raises(MapLoadError):
            load_map(tmp_path / "m.pgm", tmp_path / "m.json")

    def test_metadata_json(self):
        d = MapMetadata(0.05).to_json()
        assert d["resolution"] == 0.05 and d["occupied_thresh"] < d["free_thresh"]
