import math

import numpy as np
import pytest

from skdv import soliton as sol
from skdv.grid import Grid, inner_product, spectral_derivative
from skdv.modulation import (DecompositionError, ReducedSDE, ReducedState,
                             SingularModulationError, apply_Z, assemble_K, decompose,
                             decompose_batch, drift_coefficients, exit_times, first_failure,
                             g_Q, integrate_reduced_sde, stochastic_coefficients)
from skdv.noise import NoiseStream, q_norm_sq
from skdv.solver import ForcingProfile, SimConfig
from skdv.trajectory import TrajectoryRecord

G_Q_REF = {0.5: 0.10790240, 1.0: 0.24609194, 2.0: 0.49576506}


def _bump(grid, rng, scale=0.02):
    raw = rng.standard_normal(grid.n_points)
    smooth = np.fft.irfft(np.fft.rfft(raw) * np.exp(-grid.k**2), n=grid.n_points)
    return scale * smooth * np.exp(-grid.x**2 / 40) / np.abs(smooth).max()


def _shift(f, xi, grid):
    # f(x - xi) by Fourier interpolation
    return np.fft.irfft(np.fft.rfft(f) * np.exp(-1j * grid.k_odd * xi), n=grid.n_points)


def test_decompose_recovers_parameters(grid, rng):
    c, xi = 1.3, 2.7
    v = sol.complementary_projection(_bump(grid, rng), c, grid)
    u = _shift(sol.phi(c, grid) + v, xi, grid)
    d = decompose(u, (1.0, 2.0), grid)
    assert d.c == pytest.approx(c, abs=1e-10)
    assert d.xi == pytest.approx(xi, abs=1e-10)
    np.testing.assert_allclose(d.v, v, atol=1e-10)
    assert max(map(abs, d.residuals)) < 1e-11 * (1 + np.sqrt(inner_product(v, v, grid)))
    assert d.iterations <= 10


def test_decompose_accepts_soliton_params(grid):
    d = decompose(sol.phi(0.9, grid, -1.0), sol.SolitonParams(1.0, 0.0), grid)
    assert (d.c, d.xi) == pytest.approx((0.9, -1.0), abs=1e-10)


def test_decompose_fails_outside_basin(grid):
    with pytest.raises(DecompositionError):
        decompose(np.zeros(grid.n_points), (1.0, 0.0), grid)
    with pytest.raises(DecompositionError):
        decompose(-sol.phi(1.0, grid), (1.0, 0.0), grid)


def test_decompose_batch_isolates_bad_rows(grid):
    u = np.stack([sol.phi(1.0, grid, 0.5), np.full(grid.n_points, np.nan), sol.phi(1.2, grid)])
    c, xi, v, dv, ok, its = decompose_batch(u, 1.0, 0.0, grid)
    assert ok.tolist() == [True, False, True]
    assert c[0] == pytest.approx(1.0) and c[2] == pytest.approx(1.2)
    np.testing.assert_allclose(dv[2], spectral_derivative(v[2], grid, 1), atol=1e-10)


def test_K_is_jacobian_of_orthogonality_map(grid, rng):
    c0, xi0 = 1.1, 0.4
    v = sol.complementary_projection(_bump(grid, rng, 0.05), c0, grid)
    u = _shift(sol.phi(c0, grid) + v, xi0, grid)
    uh = np.fft.rfft(u)

    def F(c, xi):
        Tu = np.fft.irfft(uh * np.exp(1j * grid.k_odd * xi), n=grid.n_points)
        w = Tu - sol.phi(c, grid)
        return np.array([inner_product(w, sol.phi(c, grid), grid),
                         inner_product(w, sol.zeta(c, grid), grid)])

    h = 1e-6
    J = np.column_stack([(F(c0 + h, xi0) - F(c0 - h, xi0)) / (2 * h),
                         (F(c0, xi0 + h) - F(c0, xi0 - h)) / (2 * h)])
    np.testing.assert_allclose(assemble_K(v, c0, grid), J, atol=1e-7)


def test_singular_K_is_reported(grid):
    # v = phi_c zeroes the first row of K
    with pytest.raises(SingularModulationError):
        assemble_K(sol.phi(1.0, grid), 1.0, grid)


def test_noise_coefficients_preserve_orthogonality(grid, rng):
    c = 0.9
    v = sol.complementary_projection(_bump(grid, rng, 0.05), c, grid)
    c_s, om_s = stochastic_coefficients(v, c, grid)
    for _ in range(3):
        h = rng.standard_normal(grid.n_points)
        Zh = apply_Z(h, v, c, grid, c_s, om_s)
        dc = inner_product(c_s, h, grid)
        assert abs(inner_product(Zh, sol.phi(c, grid), grid)
                   + dc * inner_product(v, sol.dphi_dc(c, grid), grid)) < 1e-9
        assert abs(inner_product(Zh, sol.zeta(c, grid), grid)
                   + dc * inner_product(v, sol.dzeta_dc(c, grid), grid)) < 1e-9


def _mode_basis(kernel):
    g = kernel.grid
    vecs, lams = [], []
    keep = kernel.q_hat > 1e-18 * kernel.q_hat.max()
    for m in np.flatnonzero(keep):
        k, qh = g.k[m], kernel.q_hat[m]
        if m == 0:
            vecs.append(np.ones(g.n_points))
            lams.append(qh / g.length)
        else:
            vecs += [np.cos(k * g.x), np.sin(k * g.x)]
            lams += [2 * qh / g.length] * 2
    return np.array(vecs), np.array(lams)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_g_Q_matches_second_difference_of_decomposition(kernel, c):
    g = kernel.grid
    E, lam = _mode_basis(kernel)
    p = sol.phi(c, g)
    h = 1e-3
    cp = decompose_batch(p + h * p * E, c, 0.0, g)[0]
    cm = decompose_batch(p - h * p * E, c, 0.0, g)[0]
    oracle = float(np.sum(lam * (cp + cm - 2 * c) / (2 * h * h)))
    assert g_Q(c, kernel) == pytest.approx(oracle, rel=2e-5)
    assert g_Q(c, kernel) == pytest.approx(G_Q_REF[c], rel=2e-5)


def test_g_Q_matches_energy_balance(kernel):
    g = kernel.grid
    c = 1.0
    E, lam = _mode_basis(kernel)
    zero = np.zeros(g.n_points)
    c_s, om_s = stochastic_coefficients(zero, c, g)
    trace = sum(l * inner_product(apply_Z(e, zero, c, g, c_s, om_s), apply_Z(e, zero, c, g, c_s, om_s), g)
                for e, l in zip(E, lam))
    qc = q_norm_sq(kernel, c_s)
    balance = (6 * c**1.5 - 2.25 * qc / np.sqrt(c) - trace) / (9 * np.sqrt(c))
    assert g_Q(c, kernel) == pytest.approx(balance, rel=1e-8)


def test_uncorrected_form_differs(kernel):
    assert g_Q(1.0, kernel, "uncorrected") == pytest.approx(-0.3329, abs=2e-4)
    with pytest.raises(ValueError):
        drift_coefficients(np.zeros(kernel.grid.n_points), 1.0, kernel, form="ito")


def test_drift_totals(kernel, rng):
    g = kernel.grid
    v = sol.complementary_projection(_bump(g, rng), 1.0, g)
    m = drift_coefficients(v, 1.0, kernel, sigma=0.1, epsilon=0.01, f_t=0.5)
    assert m.c_drift == pytest.approx(m.c_d0 + 0.005 * m.c_f + 0.01 * m.c_d)
    assert m.omega_drift == pytest.approx(m.omega_d0 + 0.005 * m.omega_f + 0.01 * m.omega_d)
    assert all(np.isfinite([m.c_d0, m.c_f, m.c_d, m.omega_d]))


def _cfg(**kw):
    base = dict(grid=Grid(80.0, 512), t_end=1.0, dt=2e-3)
    base.update(kw)
    return SimConfig(**base)


def test_reduced_sde_deterministic_is_euler_of_exponential():
    cfg = _cfg(epsilon=0.01, forcing=ForcingProfile("constant"), t_end=2.0)
    path = integrate_reduced_sde(1.0, cfg)
    n = cfg.n_steps
    assert path.c_ap[0, -1] == pytest.approx((1 + 4 / 3 * 0.01 * cfg.dt) ** n, rel=1e-13)
    assert path.state(n).c_ap == path.c_ap[0, -1]


def test_reduced_sde_interpolant(kernel):
    cfg = _cfg(sigma=0.02)
    red = ReducedSDE(cfg)
    assert red.interp_error < 1e-9
    assert red.g_Q(1.0) == pytest.approx(g_Q(1.0, cfg.kernel), abs=1e-9)
    # outside the interpolation interval the drift is evaluated directly
    assert red.g_Q(np.array([5.0]))[0] == pytest.approx(g_Q(5.0, cfg.kernel), rel=1e-9)


def test_reduced_paths_reproducible_and_coupled():
    cfg = _cfg(sigma=0.05, t_end=0.2)
    a = integrate_reduced_sde(1.0, cfg, n_paths=3, seed=4)
    b = integrate_reduced_sde(1.0, cfg, n_paths=3, seed=4)
    np.testing.assert_array_equal(a.c_ap, b.c_ap)
    assert not a.exited.any()
    n = cfg.n_steps
    stream = NoiseStream(cfg.kernel, 4, [0], cfg.dt)
    dWs = np.stack([stream.increments(i)[0] for i in range(n)])
    cpl = integrate_reduced_sde(1.0, cfg, "frame-coupled", (dWs, np.zeros(n)))
    red = ReducedSDE(cfg)
    c = 1.0
    for i in range(n):
        c = red.step(c, i * cfg.dt, dWs[i], 0.0)
    assert cpl.c_ap[0, -1] == pytest.approx(float(c), rel=1e-14)
    with pytest.raises(ValueError):
        integrate_reduced_sde(1.0, cfg, "frame-coupled")
    with pytest.raises(ValueError):
        integrate_reduced_sde(1.0, cfg, "telepathic")


def test_reduced_state_validation():
    assert math.isnan(ReducedState(1.0).omega_ap)
    with pytest.raises(ValueError):
        ReducedState(0.0)


def test_first_failure_and_exit_times():
    t = np.arange(6.0)
    assert first_failure(t, [True, True, False, True, False, True]) == 2.0
    assert math.isinf(first_failure(t, [True] * 6))
    nanrow = np.array([0, 0, 0, 0, np.nan, np.nan])
    rec = TrajectoryRecord(0, t, c=np.array([1, 1.01, 1.02, 1.5, np.nan, np.nan]),
                           xi=nanrow, omega=nanrow, c_ap=np.array([1, 1, 1.04, 1.0, 1, 1]),
                           l2_v=np.array([0, .01, .02, .03, np.nan, np.nan]),
                           l2w_v=nanrow, h1w_v=np.array([0, .01, .06, .01, np.nan, np.nan]),
                           energy=nanrow)
    win = sol.AmplitudeWindow(0.9, 1.2, 0.1)
    e = exit_times(rec, {"eta_H1w": 0.05, "eta_L2": 0.025, "lambda_ap": 0.03}, win)
    assert (e.t_st, e.t_en, e.t_c, e.t_ap) == (2.0, 3.0, 3.0, 3.0)
    assert e.exited("t_st", 2.5) and not e.exited("t_st", 2.0)
    e2 = exit_times(rec, {}, win)
    assert math.isinf(e2.t_st) and math.isinf(e2.t_ap)
