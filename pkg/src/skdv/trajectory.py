"""Batched stochastic KdV trajectories with per-record modulation diagnostics.

A batch of trajectories is stepped together in Fourier space. Every
``record_every`` steps each state is decomposed into a modulated soliton plus
remainder and the norms of the remainder are logged. Alongside, the reduced
amplitude equation is driven by the same increments read off at the current
soliton position.

The PDE is integrated in a frame moving with ``cfg.frame_speed``. Positions
``xi`` in the records are lab-frame positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import soliton as sol
from .grid import WeightConfig, inner_product, weighted_h1_norm, weighted_l2_norm
from .modulation import ExitTimes, ReducedSDE, decompose_batch, exit_times
from .noise import NoiseStream
from .solver import SimConfig, SplitStepSolver

RECORD_FIELDS = ("t", "c", "xi", "omega", "c_ap", "l2_v", "l2w_v", "h1w_v", "energy")


@dataclass
class TrajectoryRecord:
    """Time series of one trajectory; all arrays share the length of ``times``."""

    index: int
    times: np.ndarray
    c: np.ndarray
    xi: np.ndarray
    omega: np.ndarray
    c_ap: np.ndarray
    l2_v: np.ndarray
    l2w_v: np.ndarray
    h1w_v: np.ndarray
    energy: np.ndarray
    failed: bool = False
    message: str = ""
    exit: ExitTimes | None = None
    snapshots: np.ndarray | None = field(default=None, repr=False)

    def columns(self) -> np.ndarray:
        """Array of shape ``(n_records, 9)`` in :data:`RECORD_FIELDS` order."""
        return np.column_stack([self.times, self.c, self.xi, self.omega, self.c_ap,
                                self.l2_v, self.l2w_v, self.h1w_v, self.energy])

    def sup_error(self) -> float:
        """``sup_t |c - c_ap|`` (``nan`` for failed trajectories)."""
        return float(np.max(np.abs(self.c - self.c_ap)))


def _omega(times, xi, c):
    # Omega = xi - int_0^t c, trapezoid at record resolution
    dt = np.diff(times)[None, :]
    integral = np.concatenate([np.zeros((c.shape[0], 1)),
                               np.cumsum(0.5 * dt * (c[:, 1:] + c[:, :-1]), axis=1)], axis=1)
    return xi - integral


def simulate_batch(cfg: SimConfig, indices, seed: int = 0, *, antithetic: bool = False,
                   reduced: bool = True, keep_snapshots: bool = False,
                   thresholds: dict | None = None, window=None) -> list[TrajectoryRecord]:
    """Simulate the trajectories ``indices`` (with their own noise streams) together.

    Failures (non-finite fields, lost decompositions) are confined to the
    affected trajectory: its record is filled with ``nan`` from that point and
    ``failed`` is set. When ``thresholds`` and ``window`` are given the exit
    times are attached.
    """
    indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    B = indices.size
    grid = cfg.grid
    N = grid.n_points
    solver = SplitStepSolver(cfg)
    stream = NoiseStream(cfg.kernel, seed, indices, cfg.dt, antithetic=antithetic) \
        if cfg.sigma > 0 else None
    red = ReducedSDE(cfg) if reduced else None
    weight = WeightConfig(cfg.w)

    n_steps = cfg.n_steps
    n_rec = n_steps // cfg.record_every + 1
    times = np.empty(n_rec)
    cols = {name: np.full((B, n_rec), np.nan) for name in RECORD_FIELDS[1:]}
    snaps = np.full((B, n_rec, N), np.nan) if keep_snapshots else None
    alive = np.ones(B, dtype=bool)
    messages = [""] * B

    uh = np.tile(np.fft.rfft(sol.phi(cfg.c_star, grid)), (B, 1))
    c_ap = np.full(B, float(cfg.c_star))
    # soliton position in the moving frame at the last record, and its speed there
    xf_rec = np.zeros(B)
    c_rec = np.full(B, float(cfg.c_star))
    t_rec = 0.0
    V = cfg.frame_speed

    def record(j, t):
        nonlocal t_rec
        times[j] = t
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            return
        u = np.fft.irfft(uh[idx], n=N, axis=-1)
        guess = xf_rec[idx] + (c_rec[idx] - V) * (t - t_rec)
        c, xf, v, dv, ok, _ = decompose_batch(u, c_rec[idx], guess, grid)
        bad = idx[~ok]
        for b in bad:
            messages[b] = f"decomposition lost at t={t:g}"
        alive[bad] = False
        uh[bad] = 0.0
        keep = ok
        idx, c, xf, v, dv, u = idx[keep], c[keep], xf[keep], v[keep], dv[keep], u[keep]
        xf_rec[idx] = xf
        c_rec[idx] = c
        t_rec = t
        cols["c"][idx, j] = c
        cols["xi"][idx, j] = xf + V * t
        cols["c_ap"][idx, j] = c_ap[idx]
        cols["l2_v"][idx, j] = np.sqrt(inner_product(v, v, grid))
        cols["l2w_v"][idx, j] = weighted_l2_norm(v, grid, weight)
        cols["h1w_v"][idx, j] = weighted_h1_norm(v, grid, weight, dv)
        cols["energy"][idx, j] = inner_product(u, u, grid)
        if snaps is not None:
            snaps[idx, j] = u

    record(0, 0.0)
    for n in range(n_steps):
        t = n * cfg.dt
        dW = stream.increments(n) if stream is not None else None
        if red is not None:
            xi_now = xf_rec + (c_rec - V) * (t - t_rec)
            c_ap = red.step(c_ap, t, dW, xi_now if dW is not None else 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            uh = solver.advance(uh, t, dW)
        if (n + 1) % cfg.record_every == 0:
            finite = np.isfinite(uh).all(axis=-1)
            for b in np.flatnonzero(alive & ~finite):
                messages[b] = f"solution blew up before t={t + cfg.dt:g}"
            alive &= finite
            uh[~alive] = 0.0
            record((n + 1) // cfg.record_every, (n + 1) * cfg.dt)

    omega = _omega(times, cols["xi"], cols["c"])
    out = []
    for b in range(B):
        rec = TrajectoryRecord(
            int(indices[b]), times.copy(), cols["c"][b], cols["xi"][b], omega[b], cols["c_ap"][b],
            cols["l2_v"][b], cols["l2w_v"][b], cols["h1w_v"][b], cols["energy"][b],
            failed=not alive[b], message=messages[b],
            snapshots=snaps[b] if snaps is not None else None,
        )
        if thresholds is not None and window is not None:
            rec.exit = exit_times(rec, thresholds, window)
        out.append(rec)
    return out


def simulate_trajectory(cfg: SimConfig, trajectory_index: int = 0, seed: int = 0,
                        **kwargs) -> TrajectoryRecord:
    """Single-trajectory convenience wrapper around :func:`simulate_batch`."""
    return simulate_batch(cfg, [trajectory_index], seed, **kwargs)[0]


def frame_positions(record: TrajectoryRecord, cfg: SimConfig) -> np.ndarray:
    """Record positions relative to the moving frame."""
    return record.xi - cfg.frame_speed * record.times


def ito_energy_growth(records, horizon: float | None = None) -> float:
    """Least-squares slope of ``log E||u(t)||^2`` over the recorded times."""
    E = np.array([r.energy for r in records])
    t = records[0].times
    if horizon is not None:
        keep = t <= horizon + 1e-12
        E, t = E[:, keep], t[keep]
    m = np.log(np.nanmean(E, axis=0))
    slope = np.polyfit(t, m - m[0], 1)[0]
    return float(slope) if math.isfinite(slope) else math.nan
