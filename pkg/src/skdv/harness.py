"""Experiment configuration, ensemble Monte Carlo and persistence.

Configuration files are TOML with the sections ``[grid]``, ``[noise]``,
``[forcing]``, ``[run]`` and ``[thresholds]``; unknown keys are rejected.
Outputs are written so that the same configuration and seed reproduce every
byte of the CSV and summary files. Timestamps go to ``metadata.json`` only.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .grid import Grid
from .noise import build_kernel
from .soliton import AmplitudeWindow
from .solver import ForcingProfile, SimConfig
from .trajectory import RECORD_FIELDS, TrajectoryRecord, simulate_batch

DEFAULTS = {
    "grid": {"length": 80.0, "n_points": 1024},
    "noise": {"sigma": 0.0, "family": "gaussian", "correlation_length": 1.0, "normalize": True},
    "forcing": {"epsilon": 0.0, "kind": "zero", "amplitude": 1.0, "rate": 10.0,
                "t_off": 10.0, "width": 1.0},
    "run": {"t_end": 10.0, "dt": 1e-3, "record_every": 10, "c_star": 1.0, "w": 0.2,
            "frame_speed": None, "sponge_strength": 200.0, "sponge_fraction": 0.5,
            "n_trajectories": 1, "seed": 0, "antithetic": False, "batch_size": 100,
            "workers": 1},
    "thresholds": {"eta": 0.05, "eta_L2": None, "lambda": 0.01, "budget": None,
                   "min_budget": 0.05, "strict": False},
}

SUMMARY_KEYS = ("config_hash", "n", "p_exit_st", "p_exit_st_stderr", "p_exit_ap",
                "p_exit_ap_stderr", "p_exit_c", "sup_err_q50", "sup_err_q90", "failures")


class ConfigError(ValueError):
    pass


class OutputError(OSError):
    pass


def _merge(raw: dict) -> dict:
    out = {}
    for sec, defaults in DEFAULTS.items():
        given = dict(raw.get(sec, {}))
        unknown = set(given) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown keys in [{sec}]: {sorted(unknown)}")
        out[sec] = {**defaults, **given}
    extra = set(raw) - set(DEFAULTS)
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    return out


@dataclass(eq=False)
class ExperimentConfig:
    sim: SimConfig
    thresholds: dict
    window: AmplitudeWindow
    n_trajectories: int = 1
    seed: int = 0
    output_dir: str | None = None
    antithetic: bool = False
    batch_size: int = 100
    workers: int = 1
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for k, v in self.thresholds.items():
            if not v > 0:
                raise ConfigError(f"threshold {k} must be positive")
        if self.batch_size < 1 or self.workers < 1:
            raise ConfigError("batch_size and workers must be >= 1")

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical settings (output location excluded)."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, raw: dict, output_dir=None) -> "ExperimentConfig":
        m = _merge(raw)
        g, nz, fo, run, th = (m[k] for k in ("grid", "noise", "forcing", "run", "thresholds"))
        try:
            grid = Grid(g["length"], g["n_points"])
            kernel = build_kernel(nz["family"], nz["correlation_length"], grid, nz["normalize"])
            forcing = ForcingProfile(fo["kind"], fo["amplitude"], fo["rate"], fo["t_off"],
                                     fo["width"])
            sim = SimConfig(
                epsilon=fo["epsilon"], sigma=nz["sigma"], forcing=forcing, t_end=run["t_end"],
                dt=run["dt"], grid=grid, kernel=kernel, c_star=run["c_star"],
                record_every=run["record_every"], w=run["w"], frame_speed=run["frame_speed"],
                sponge_strength=run["sponge_strength"], sponge_fraction=run["sponge_fraction"],
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        budget = th["budget"]
        if budget is None:
            # a window of zero width would flag every noisy trajectory at t = 0
            budget = max(sim.epsilon * forcing.l1_norm(sim.t_end), th["min_budget"])
        try:
            window = AmplitudeWindow.from_budget(sim.c_star, budget, sim.w, th["strict"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        thresholds = {"eta_H1w": th["eta"], "lambda_ap": th["lambda"]}
        if th["eta_L2"] is not None:
            thresholds["eta_L2"] = th["eta_L2"]
        return cls(sim, thresholds, window, int(run["n_trajectories"]), int(run["seed"]),
                   output_dir, bool(run["antithetic"]), int(run["batch_size"]),
                   int(run["workers"]), m)


def load_config(path, output_dir=None) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw, output_dir)


def _run_batch(args):
    cfg, indices = args
    return simulate_batch(cfg.sim, indices, cfg.seed, antithetic=cfg.antithetic,
                          thresholds=cfg.thresholds, window=cfg.window)


def simulate_ensemble(cfg: ExperimentConfig, indices=None) -> list[TrajectoryRecord]:
    """Run the trajectories (default ``0..n-1``) in batches, optionally in worker processes.

    Each trajectory draws from its own counter-based stream, so the results do
    not depend on batching or on the number of workers.
    """
    if indices is None:
        indices = np.arange(cfg.n_trajectories)
    indices = np.asarray(indices, dtype=np.int64)
    chunks = [indices[i:i + cfg.batch_size] for i in range(0, indices.size, cfg.batch_size)]
    jobs = [(cfg, ch) for ch in chunks]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_batch, jobs))
    else:
        parts = [_run_batch(j) for j in jobs]
    return [r for part in parts for r in part]


@dataclass
class EnsembleStats:
    config_hash: str
    n: int
    p_exit_st: float
    p_exit_st_stderr: float
    p_exit_ap: float
    p_exit_ap_stderr: float
    p_exit_c: float
    p_exit_c_stderr: float
    sup_err_q50: float
    sup_err_q90: float
    failures: int
    records: list | None = field(default=None, repr=False)

    def summary(self) -> dict:
        d = {k: getattr(self, k) for k in SUMMARY_KEYS}
        d["p_exit_c_stderr"] = self.p_exit_c_stderr
        return d


def _proportion(flags):
    n = len(flags)
    p = float(np.mean(flags))
    return p, math.sqrt(p * (1 - p) / n)


def summarize(records, cfg: ExperimentConfig | None = None, horizon: float | None = None,
              config_hash: str = "") -> EnsembleStats:
    """Exit frequencies with binomial standard errors and ``sup|c - c_ap|`` quantiles.

    Failed trajectories count as exits (their records turn ``nan`` when the
    decomposition is lost) and are also tallied in ``failures``.
    """
    records = list(records)
    if not records:
        raise ValueError("no trajectories")
    if cfg is not None:
        horizon = cfg.sim.t_end if horizon is None else horizon
        config_hash = config_hash or cfg.config_hash
    if horizon is None:
        horizon = float(records[0].times[-1])
    if any(r.exit is None for r in records):
        raise ValueError("records carry no exit times; simulate with thresholds and a window")
    # the last record sits at the horizon; an exit there is still before T + dt_record
    end = horizon + 1e-9
    st = [r.exit.t_st <= end for r in records]
    ap = [r.exit.t_ap <= end for r in records]
    cc = [r.exit.t_c <= end for r in records]
    sup = np.array([r.sup_error() for r in records])
    ok = np.isfinite(sup)
    q50, q90 = (np.quantile(sup[ok], [0.5, 0.9]) if ok.any() else (math.nan, math.nan))
    p_st, s_st = _proportion(st)
    p_ap, s_ap = _proportion(ap)
    p_c, s_c = _proportion(cc)
    return EnsembleStats(config_hash, len(records), p_st, s_st, p_ap, s_ap, p_c, s_c,
                         float(q50), float(q90), int(sum(r.failed for r in records)), records)


def run_ensemble(cfg: ExperimentConfig) -> EnsembleStats:
    return summarize(simulate_ensemble(cfg), cfg)


def _fmt(x) -> str:
    return "%.17g" % x


def write_trajectory_csv(path, record: TrajectoryRecord) -> None:
    cols = record.columns()
    lines = [",".join(RECORD_FIELDS)]
    lines += [",".join(_fmt(v) for v in row) for row in cols]
    _write_text(path, "\n".join(lines) + "\n")


def read_trajectory_csv(path) -> dict:
    """Columns of a trajectory CSV as float arrays keyed by name."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return {name: data[:, i] for i, name in enumerate(header)}


def _write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_outputs(stats: EnsembleStats, records, out_dir, cfg: ExperimentConfig | None = None):
    """Write ``summary.json``, ``exit_times.csv``, ``trajectories/traj_XXXXXX.csv`` and
    ``metadata.json`` (the only file with timestamps) under ``out_dir``."""
    out = Path(out_dir)
    records = sorted(records, key=lambda r: r.index)
    for r in records:
        write_trajectory_csv(out / "trajectories" / f"traj_{r.index:06d}.csv", r)
    rows = ["index,t_st,t_en,t_c,t_ap,failed"]
    for r in records:
        e = r.exit
        rows.append(",".join([str(r.index), _fmt(e.t_st), _fmt(e.t_en), _fmt(e.t_c),
                              _fmt(e.t_ap), str(int(r.failed))]))
    _write_text(out / "exit_times.csv", "\n".join(rows) + "\n")
    _write_text(out / "summary.json", json.dumps(stats.summary(), indent=2) + "\n")
    meta = {
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pid": os.getpid(),
        "config_hash": stats.config_hash,
    }
    if cfg is not None:
        meta["config"] = cfg.raw
        meta["exit_time_resolution"] = cfg.sim.record_every * cfg.sim.dt
        meta["window"] = [cfg.window.c_min, cfg.window.c_max]
    fails = {str(r.index): r.message for r in records if r.failed}
    if fails:
        meta["failures"] = fails
    _write_text(out / "metadata.json", json.dumps(meta, indent=2, default=str) + "\n")
    return out
