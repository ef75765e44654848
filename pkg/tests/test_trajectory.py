import numpy as np
import pytest

from skdv import soliton as sol
from skdv.grid import Grid
from skdv.modulation import exit_times
from skdv.solver import ForcingProfile, SimConfig
from skdv.trajectory import (RECORD_FIELDS, TrajectoryRecord, frame_positions, ito_energy_growth,
                             simulate_batch, simulate_trajectory)


def _cfg(**kw):
    base = dict(grid=Grid(80.0, 512), t_end=0.5, dt=2e-3, record_every=25)
    base.update(kw)
    return SimConfig(**base)


def test_unforced_soliton_record():
    rec = simulate_trajectory(_cfg(c_star=1.2))
    assert rec.times.tolist() == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35,
                                                0.4, 0.45, 0.5])
    np.testing.assert_allclose(rec.c, 1.2, atol=1e-7)
    np.testing.assert_allclose(rec.xi, 1.2 * rec.times, atol=1e-6)
    np.testing.assert_allclose(rec.omega, 0.0, atol=1e-6)
    np.testing.assert_allclose(rec.c_ap, 1.2)
    # splitting error at dt = 2e-3
    assert rec.h1w_v.max() < 2e-5 and not rec.failed
    assert rec.columns().shape == (11, len(RECORD_FIELDS))
    np.testing.assert_allclose(frame_positions(rec, _cfg(c_star=1.2)), 0.0, atol=1e-6)


def test_batch_equals_individual_runs():
    cfg = _cfg(sigma=0.05)
    batch = simulate_batch(cfg, [4, 1, 9], seed=3)
    single = simulate_trajectory(cfg, 1, seed=3)
    np.testing.assert_allclose(batch[1].columns(), single.columns(), rtol=1e-12, atol=1e-14)
    assert [r.index for r in batch] == [4, 1, 9]
    assert not np.allclose(batch[0].c, batch[2].c)


def test_antithetic_pairs_mirror_first_order():
    cfg = _cfg(sigma=0.02)
    a, b = simulate_batch(cfg, [0, 1], seed=1, antithetic=True)
    da, db = a.c - 1.0, b.c - 1.0
    # the first-order responses cancel, leaving a second-order remainder
    assert np.abs(da + db).max() < 0.05 * np.abs(da).max()


def test_forced_amplitude_grows():
    cfg = _cfg(epsilon=0.05, forcing=ForcingProfile("constant"), t_end=1.0)
    rec = simulate_trajectory(cfg)
    assert rec.c[-1] == pytest.approx(np.exp(4 / 3 * 0.05), rel=2e-3)
    assert rec.c_ap[-1] == pytest.approx(np.exp(4 / 3 * 0.05), rel=1e-4)


def test_failures_are_isolated():
    cfg = _cfg(sigma=6.0, t_end=0.2, record_every=5)
    recs = simulate_batch(cfg, range(4), seed=0, reduced=False)
    assert any(r.failed for r in recs)
    for r in recs:
        if r.failed:
            assert r.message
            assert np.isnan(r.c[-1])
            assert np.isnan(r.sup_error()) or r.sup_error() >= 0


def test_snapshots_and_exits():
    cfg = _cfg(sigma=0.02)
    win = sol.AmplitudeWindow.from_budget(1.0, 0.05, cfg.w)
    rec = simulate_trajectory(cfg, keep_snapshots=True, thresholds={"eta_H1w": 1e-9},
                              window=win)
    assert rec.snapshots.shape == (11, 512)
    np.testing.assert_allclose(rec.snapshots[0], sol.phi(1.0, cfg.grid), atol=1e-14)
    assert rec.exit.t_st > 0 and rec.exit.t_st <= 0.05
    assert rec.exit == exit_times(rec, {"eta_H1w": 1e-9}, win)


def _fake(index, energy):
    t = np.linspace(0, 1, energy.size)
    z = np.zeros_like(t)
    return TrajectoryRecord(index, t, z + 1, z, z, z + 1, z, z, z, energy)


def test_energy_growth_fit():
    t = np.linspace(0, 1, 11)
    recs = [_fake(0, 2 * np.exp(0.3 * t)), _fake(1, 4 * np.exp(0.3 * t))]
    assert ito_energy_growth(recs) == pytest.approx(0.3)
    assert ito_energy_growth(recs, horizon=0.5) == pytest.approx(0.3)
