"""Experiment runner: single runs, seeded batches, metrics and CSV artifacts.

Every float is written with ``repr`` so that files round-trip exactly and two
executions with identical arguments produce identical bytes.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .swarm.scenario import Scenario, load_scenario
from .swarm.simulation import Simulation, TickResult

log = logging.getLogger(__name__)

RUN_COLUMNS = (
    "t",
    "agent_id",
    "est_x",
    "est_y",
    "est_theta",
    "truth_x",
    "truth_y",
    "truth_theta",
    "position_error",
    "encounter_flag",
)
PARTICLE_COLUMNS = ("agent_id", "x", "y", "theta")
SUMMARY_COLUMNS = (
    "run_id",
    "mode",
    "seed",
    "status",
    "first_encounter",
    "convergence_time",
    "post_encounter_max_error",
    "settled_max_error",
    "post_midpoint_median_error",
    "final_error",
    "message",
)
# time allowed after the first encounter before the error must stay low
SETTLE_TIME = 1.0


class Mode(enum.Enum):
    COOPERATIVE = "coop"
    STANDALONE = "standalone"

    @classmethod
    def parse(cls, value) -> Mode:
        if isinstance(value, cls):
            return value
        text = str(value).lower()
        for mode in cls:
            if text in (mode.value, mode.name.lower()):
                return mode
        raise ValueError(f"unknown mode {value!r}; expected 'coop' or 'standalone'")


@dataclass
class RunRecord:
    """Per-tick trace of one run.

    Attributes
    ----------
    run_id : str
        ``"<mode>_seed<seed>"``.
    rows : ndarray of shape (n_ticks * n_agents, 10)
        Columns as in ``RUN_COLUMNS``; ``agent_id`` and ``encounter_flag``
        are stored as floats holding integer values.
    snapshots : dict
        ``(tick, phase, agent_id) -> (K, 3)`` particle arrays, with phase
        ``"pre"`` (after the filter step) or ``"post"`` (after fusion).
    """

    run_id: str
    seed: int
    mode: Mode
    rows: np.ndarray
    focus_agent: int
    duration: float
    convergence_threshold: float
    snapshots: dict = field(default_factory=dict)

    def agent_rows(self, agent_id: int | None = None) -> np.ndarray:
        agent_id = self.focus_agent if agent_id is None else agent_id
        return self.rows[self.rows[:, 1] == agent_id]

    def to_csv(self) -> str:
        return _csv_text(RUN_COLUMNS, (_format_run_row(r) for r in self.rows))


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _format_run_row(row: np.ndarray) -> list[str]:
    out = [_fmt(v) for v in row]
    out[1] = str(int(row[1]))
    out[9] = str(int(row[9]))
    return out


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.write_bytes(text.encode("utf-8"))


def _tick_rows(res: TickResult) -> list[list[float]]:
    involved = {e.observer_id for e in res.events} | {e.observed_id for e in res.events}
    rows = []
    for s in sorted(res.states, key=lambda s: s.agent_id):
        est, tru = s.estimate, s.truth
        rows.append(
            [res.t, s.agent_id, est.x, est.y, est.theta, tru.x, tru.y, tru.theta, s.position_error, s.agent_id in involved]
        )
    return rows


def run_scenario(scenario, mode="coop", seed: int | None = None, snapshot_ticks=None) -> RunRecord:
    """Run one scenario in one mode.

    Parameters
    ----------
    scenario : Scenario or path-like
        A parsed scenario or the path of a scenario JSON file.
    mode : {"coop", "standalone"} or Mode
        Standalone runs skip the exchange but consume identical odometry,
        scans and detections.
    seed : int, optional
        Overrides the scenario seed.
    snapshot_ticks : iterable of int, optional
        Ticks whose pre- and post-fusion particle clouds are kept.

    Returns
    -------
    RunRecord
    """
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    mode = Mode.parse(mode)
    wanted = set(snapshot_ticks) if snapshot_ticks is not None else set()
    sim = Simulation(scenario, cooperative=mode is Mode.COOPERATIVE, seed=seed)
    rows: list[list[float]] = []
    snaps: dict = {}

    def record(res: TickResult) -> None:
        rows.extend(_tick_rows(res))
        if res.tick in wanted:
            for phase, clouds in (("pre", res.pre_fusion), ("post", res.post_fusion)):
                for agent_id, cloud in clouds.items():
                    snaps[(res.tick, phase, agent_id)] = np.array(cloud.particles)

    sim.run(record)
    return RunRecord(
        run_id=f"{mode.value}_seed{sim.seed}",
        seed=sim.seed,
        mode=mode,
        rows=np.asarray(rows, dtype=float),
        focus_agent=scenario.focus_agent,
        duration=scenario.duration,
        convergence_threshold=scenario.convergence_threshold,
        snapshots=snaps,
    )


# ---------------------------------------------------------------- metrics


def first_encounter_time(record: RunRecord, agent_id: int | None = None) -> float | None:
    rows = record.agent_rows(agent_id)
    hit = np.flatnonzero(rows[:, 9] > 0)
    return float(rows[hit[0], 0]) if hit.size else None


def convergence_time(t: np.ndarray, err: np.ndarray, threshold: float) -> float | None:
    """First time after which ``err`` stays below ``threshold``; None if never."""
    above = np.flatnonzero(err >= threshold)
    if above.size == 0:
        return float(t[0])
    last = above[-1]
    return float(t[last + 1]) if last + 1 < t.size else None


def max_error_since(t: np.ndarray, err: np.ndarray, start: float | None) -> float | None:
    if start is None:
        return None
    mask = t >= start - 1e-9
    return float(err[mask].max()) if mask.any() else None


def post_midpoint_median(t: np.ndarray, err: np.ndarray, duration: float) -> float:
    """Median error over ticks strictly after half the run duration."""
    mask = t > duration / 2.0
    return float(np.median(err[mask] if mask.any() else err))


@dataclass(frozen=True)
class RunSummary:
    run_id: str
    mode: str
    seed: int
    status: str
    first_encounter: float | None = None
    convergence_time: float | None = None
    post_encounter_max_error: float | None = None
    settled_max_error: float | None = None
    post_midpoint_median_error: float | None = None
    final_error: float | None = None
    message: str = ""

    def as_row(self) -> list[str]:
        row = []
        for name in SUMMARY_COLUMNS:
            v = getattr(self, name)
            row.append(v if isinstance(v, str) else _fmt(v))
        return row


def summarize(record: RunRecord) -> RunSummary:
    rows = record.agent_rows()
    t, err = rows[:, 0], rows[:, 8]
    enc = first_encounter_time(record)
    return RunSummary(
        run_id=record.run_id,
        mode=record.mode.value,
        seed=record.seed,
        status="ok",
        first_encounter=enc,
        convergence_time=convergence_time(t, err, record.convergence_threshold),
        post_encounter_max_error=max_error_since(t, err, enc),
        settled_max_error=max_error_since(t, err, None if enc is None else enc + SETTLE_TIME),
        post_midpoint_median_error=post_midpoint_median(t, err, record.duration),
        final_error=float(err[-1]),
    )


def _median(values) -> float | None:
    vals = [v for v in values if v is not None and math.isfinite(v)]
    return float(np.median(vals)) if vals else None


def mode_median(summaries: list[RunSummary], mode: Mode) -> RunSummary:
    ok = [s for s in summaries if s.mode == mode.value and s.status == "ok"]
    return RunSummary(
        run_id="median",
        mode=mode.value,
        seed=-1,
        status=f"{len(ok)} ok",
        first_encounter=_median(s.first_encounter for s in ok),
        convergence_time=_median(s.convergence_time for s in ok),
        post_encounter_max_error=_median(s.post_encounter_max_error for s in ok),
        settled_max_error=_median(s.settled_max_error for s in ok),
        post_midpoint_median_error=_median(s.post_midpoint_median_error for s in ok),
        final_error=_median(s.final_error for s in ok),
    )


# ---------------------------------------------------------------- outputs


def write_run(record: RunRecord, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"run_{record.run_id}.csv"
    _write(path, record.to_csv())
    return path


def emit_particles(record: RunRecord, out_dir, ticks=None) -> list[Path]:
    """Write one CSV of (agent_id, x, y, theta) per snapshot.

    Files are named ``particles_<run_id>_t<tick>_<phase>_agent<id>.csv``;
    ``ticks`` restricts output to a subset of the recorded ticks.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for (tick, phase, agent_id), particles in sorted(record.snapshots.items()):
        if ticks is not None and tick not in ticks:
            continue
        path = out / f"particles_{record.run_id}_t{tick:05d}_{phase}_agent{agent_id}.csv"
        rows = ([str(agent_id), _fmt(x), _fmt(y), _fmt(th)] for x, y, th in particles)
        _write(path, _csv_text(PARTICLE_COLUMNS, rows))
        paths.append(path)
    return paths


def write_summary(summaries: list[RunSummary], path) -> Path:
    path = Path(path)
    rows = [s.as_row() for s in summaries]
    rows += [mode_median(summaries, m).as_row() for m in Mode]
    _write(path, _csv_text(SUMMARY_COLUMNS, rows))
    return path


def batch(scenario_path, n_runs: int, base_seed: int, out_dir) -> list[RunSummary]:
    """Run both modes for seeds ``base_seed .. base_seed + n_runs - 1``.

    Writes one CSV per run and ``summary.csv`` into ``out_dir``. Scenario
    errors propagate; a run that raises is recorded with status ``failed``.
    """
    if isinstance(n_runs, bool) or int(n_runs) != n_runs or n_runs < 1:
        raise ValueError(f"n_runs must be a positive integer, got {n_runs!r}")
    scenario = scenario_path if isinstance(scenario_path, Scenario) else load_scenario(scenario_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summaries = []
    for seed in range(int(base_seed), int(base_seed) + int(n_runs)):
        for mode in Mode:
            run_id = f"{mode.value}_seed{seed}"
            try:
                record = run_scenario(scenario, mode, seed)
            except Exception as exc:  # recorded, not fatal
                log.warning("run %s failed: %s", run_id, exc)
                summaries.append(RunSummary(run_id, mode.value, seed, "failed", message=f"{type(exc).__name__}: {exc}"))
                continue
            write_run(record, out)
            summaries.append(summarize(record))
    write_summary(summaries, out / "summary.csv")
    return summaries
