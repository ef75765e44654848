import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skdv import soliton as sol
from skdv.grid import Grid, inner_product, spectral_derivative


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_profile_solves_travelling_wave_equation(grid, c):
    p = sol.phi(c, grid)
    res = (-c * spectral_derivative(p, grid, 1) + spectral_derivative(p, grid, 3)
           + 2 * p * spectral_derivative(p, grid, 1))
    assert np.abs(res).max() < 1e-9


def test_peak_and_width(grid):
    p = sol.phi(2.0, grid)
    assert p.max() == pytest.approx(3.0)
    assert grid.x[p.argmax()] == 0.0


@pytest.mark.parametrize("name,order", [("dphi_dx", 1), ("d2phi_dx2", 2)])
def test_x_derivatives(grid, name, order):
    ref = spectral_derivative(sol.phi(1.3, grid), grid, order)
    np.testing.assert_allclose(getattr(sol, name)(1.3, grid), ref, atol=1e-10)


@pytest.mark.parametrize("base,deriv", [("phi", "dphi_dc"), ("dphi_dc", "d2phi_dc2"),
                                        ("zeta", "dzeta_dc"), ("dzeta_dc", "d2zeta_dc2")])
def test_c_derivatives_match_central_differences(grid, base, deriv):
    c, h = 0.8, 1e-5
    f = getattr(sol, base)
    fd = (f(c + h, grid) - f(c - h, grid)) / (2 * h)
    np.testing.assert_allclose(getattr(sol, deriv)(c, grid), fd, atol=1e-7)


def test_zeta_is_primitive_of_dphi_dc(grid):
    z = sol.zeta(0.7, grid)
    np.testing.assert_allclose(spectral_derivative(z - 3 / np.sqrt(0.7) * 0.5 * (1 + np.tanh(grid.x)), grid, 1)
                               + 3 / np.sqrt(0.7) * 0.5 / np.cosh(grid.x) ** 2,
                               sol.dphi_dc(0.7, grid), atol=1e-8)
    assert z[0] == pytest.approx(0.0, abs=1e-10)
    assert z[-1] == pytest.approx(3 / np.sqrt(0.7), rel=1e-8)


def test_quadrature_zeta_is_second_order():
    errs = []
    for n in (512, 1024, 2048):
        g = Grid(80.0, n)
        errs.append(np.abs(sol.zeta(1.0, g, method="quadrature") - sol.zeta(1.0, g)).max())
    assert errs[-1] < 2e-4
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.1)


def test_zeta_rejects_unknown_method(grid):
    with pytest.raises(ValueError):
        sol.zeta(1.0, grid, method="bogus")


def test_batched_profiles(grid):
    cs = np.array([0.5, 1.0, 2.0])
    out = sol.phi(cs, grid, xi=np.array([0.0, 1.0, -2.0]))
    assert out.shape == (3, grid.n_points)
    np.testing.assert_allclose(out[2], sol.phi(2.0, grid, -2.0))


def test_shift_wraps_periodically(grid):
    np.testing.assert_allclose(sol.phi(1.0, grid, 80.0), sol.phi(1.0, grid), atol=1e-12)


def test_family_matches_individual(grid):
    fam = sol.family(1.4, grid, 0.3)
    for name, val in fam.items():
        np.testing.assert_array_equal(val, getattr(sol, name)(1.4, grid, 0.3))


@pytest.mark.parametrize("c", [0.0, -1.0, np.nan])
def test_rejects_bad_amplitude(grid, c):
    with pytest.raises(ValueError):
        sol.phi(c, grid)
    with pytest.raises(ValueError):
        sol.SolitonParams(c)


def test_amplitude_window():
    w = sol.AmplitudeWindow.from_budget(1.0, 0.1, 0.2)
    assert w.c_min == pytest.approx(np.exp(-0.3))
    assert w.c_max == pytest.approx(np.exp(0.3))
    assert w.contains(w.c_min) and not w.contains(0.5)
    s = sol.AmplitudeWindow.from_budget(1.0, 0.1, 0.2, strict=True)
    assert not s.contains(w.c_min) and s.contains(1.0)
    with pytest.raises(ValueError):
        sol.AmplitudeWindow(1.0, 2.0, 0.5)
    with pytest.raises(ValueError):
        sol.AmplitudeWindow(2.0, 1.0, 0.1)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_projection_is_biorthogonal(grid, c):
    a, b = sol.projection_weights(c, grid)
    ip = lambda f, g: inner_product(f, g, grid)
    dx, dc = sol.dphi_dx(c, grid), sol.dphi_dc(c, grid)
    G = np.array([[ip(dx, a), ip(dc, a)], [ip(dx, b), ip(dc, b)]])
    np.testing.assert_allclose(G, np.eye(2), atol=1e-9)


def test_complementary_range_is_orthogonal(grid, rng):
    g = rng.standard_normal(grid.n_points) * np.exp(-grid.x**2 / 50)
    q = sol.complementary_projection(g, 1.0, grid)
    assert abs(inner_product(q, sol.phi(1.0, grid), grid)) < 1e-10
    assert abs(inner_product(q, sol.zeta(1.0, grid), grid)) < 1e-9
    q2 = sol.complementary_projection(q, 1.0, grid)
    np.testing.assert_allclose(q2, q, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.3, 3.0), xi=st.floats(-10, 10))
def test_mass_and_energy_closed_forms(c, xi):
    g = Grid(80.0, 1024)
    p = sol.phi(c, g, xi)
    assert p.sum() * g.dx == pytest.approx(6 * np.sqrt(c), rel=1e-9)
    assert inner_product(p, p, g) == pytest.approx(6 * c**1.5, rel=1e-9)
