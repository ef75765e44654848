"""Global modulation system for a soliton ``u(t, x + xi) = phi_c(x) + v(t, x)``.

The parameters ``(c, xi)`` are pinned by ``<v, phi_c> = <v, zeta_c> = 0``.
Everything here is evaluated in the soliton frame, i.e. on the grid
coordinate ``x`` measured from the soliton centre; pairings against the
non-decaying ``zeta_c`` (and its ``c``-derivatives) are truncated to the grid
window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev

from . import soliton as sol
from .grid import Grid, WeightConfig, inner_product, spectral_derivative, weighted_l2_norm
from .noise import CovarianceKernel, NoiseStream, apply_Q, q_inner, q_norm_sq
from .solver import SimConfig


class DecompositionError(ArithmeticError):
    """Newton iteration for ``(c, xi)`` failed; the state left the tubular neighbourhood."""


class SingularModulationError(np.linalg.LinAlgError):
    """``K_c(v)`` is numerically singular."""


@dataclass
class Decomposition:
    c: float
    xi: float
    v: np.ndarray
    residuals: tuple
    iterations: int
    l2w_v: float | None = None


@dataclass
class _Profiles:
    phi: np.ndarray
    dphi_dx: np.ndarray
    d2phi_dx2: np.ndarray
    dphi_dc: np.ndarray
    d2phi_dc2: np.ndarray
    zeta: np.ndarray
    dzeta_dc: np.ndarray
    d2zeta_dc2: np.ndarray


def _profiles(c, grid: Grid) -> _Profiles:
    return _Profiles(**sol.family(c, grid))


def _shift_fields(uh, xi, grid):
    """``(T_xi u, d_x T_xi u)`` from the spectrum of ``u``; ``(T_xi u)(x) = u(x + xi)``."""
    k = grid.k_odd
    ph = uh * np.exp(1j * np.multiply.outer(np.asarray(xi), k))
    n = grid.n_points
    return np.fft.irfft(ph, n=n, axis=-1), np.fft.irfft(1j * k * ph, n=n, axis=-1)


def decompose_batch(u, c_guess, xi_guess, grid: Grid, tol: float = 1e-11, max_iter: int = 50):
    """Vectorized Newton solve of the orthogonality conditions.

    ``u`` has shape ``(B, N)``. Returns ``(c, xi, v, dv, converged, iterations)``
    where ``dv`` is the spectral derivative of ``v`` and rows that did not
    converge (or produced ``c <= 0``) are flagged in ``converged``.
    The Newton Jacobian of ``(<v, phi_c>, <v, zeta_c>)`` in ``(c, xi)`` is exactly
    ``K_c(v)`` (up to the vanishing pairing ``<d_x phi_c, phi_c>``).
    """
    u = np.atleast_2d(grid.check(u))
    B = u.shape[0]
    uh = np.fft.rfft(u, axis=-1)
    c = np.broadcast_to(np.asarray(c_guess, dtype=float), (B,)).copy()
    xi = np.broadcast_to(np.asarray(xi_guess, dtype=float), (B,)).copy()
    converged = np.zeros(B, dtype=bool)
    failed = ~np.isfinite(u).all(axis=-1) | ~(c > 0)
    iterations = np.zeros(B, dtype=int)
    v = np.full_like(u, np.nan)
    dv = np.full_like(u, np.nan)
    for it in range(max_iter + 1):
        active = ~(converged | failed)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        ca = c[idx]
        Tu, dTu = _shift_fields(uh[idx], xi[idx], grid)
        fam = sol.family(ca, grid, names=("phi", "dphi_dx", "dphi_dc", "zeta", "dzeta_dc"))
        p, z = fam["phi"], fam["zeta"]
        va = Tu - p
        dva = dTu - fam["dphi_dx"]
        v[idx] = va
        dv[idx] = dva
        F1 = inner_product(va, p, grid)
        F2 = inner_product(va, z, grid)
        scale = 1 + np.sqrt(inner_product(va, va, grid))
        done = (np.abs(F1) <= tol * scale) & (np.abs(F2) <= tol * scale)
        converged[idx[done]] = True
        if it == max_iter:
            break
        go = ~done
        if not go.any():
            break
        idx, ca, va, p, z, dTu = idx[go], ca[go], va[go], p[go], z[go], dTu[go]
        F1, F2 = F1[go], F2[go]
        dpc, dzc = fam["dphi_dc"][go], fam["dzeta_dc"][go]
        K11 = inner_product(va - p, dpc, grid)
        K12 = inner_product(dTu, p, grid)
        K21 = inner_product(va, dzc, grid) - inner_product(dpc, z, grid)
        K22 = inner_product(dTu, z, grid)
        det = K11 * K22 - K12 * K21
        with np.errstate(divide="ignore", invalid="ignore"):
            dc = -(K22 * F1 - K12 * F2) / det
            dxi = -(-K21 * F1 + K11 * F2) / det
        c_new = ca + dc
        bad = ~np.isfinite(c_new) | ~np.isfinite(dxi) | ~(c_new > 0)
        failed[idx[bad]] = True
        ok = ~bad
        c[idx[ok]] = c_new[ok]
        xi[idx[ok]] += dxi[ok]
        iterations[idx[ok]] += 1
    return c, xi, v, dv, converged & ~failed, iterations


def decompose(u, guess, grid: Grid, weight: WeightConfig | None = None,
              tol: float = 1e-11, max_iter: int = 50) -> Decomposition:
    """Find ``(c, xi, v)`` with ``u(x + xi) = phi_c(x) + v(x)`` and ``v`` orthogonal to
    ``phi_c`` and ``zeta_c``. ``guess`` is a :class:`SolitonParams` or ``(c, xi)``.

    Raises :class:`DecompositionError` if Newton does not converge within
    ``max_iter`` iterations or ``c`` leaves ``(0, inf)``.
    """
    if isinstance(guess, sol.SolitonParams):
        c0, xi0 = guess.c, guess.xi
    else:
        c0, xi0 = guess
    u = grid.check(u)
    if u.ndim != 1:
        raise ValueError("decompose takes a single field; use decompose_batch for stacks")
    c, xi, v, _, ok, its = decompose_batch(u, c0, xi0, grid, tol, max_iter)
    if not ok[0]:
        raise DecompositionError(
            f"no decomposition near c={c0:g}, xi={xi0:g} after {its[0]} iterations"
        )
    c, xi, v = float(c[0]), float(xi[0]), v[0]
    r = (float(inner_product(v, sol.phi(c, grid), grid)),
         float(inner_product(v, sol.zeta(c, grid), grid)))
    l2w = float(weighted_l2_norm(v, grid, weight)) if weight is not None else None
    return Decomposition(c, xi, v, r, int(its[0]), l2w)


def _K(v, dv, P: _Profiles, grid):
    ip = lambda a, b: inner_product(a, b, grid)  # noqa: E731
    return np.array([
        [ip(v - P.phi, P.dphi_dc), ip(dv, P.phi)],
        [ip(v, P.dzeta_dc) - ip(P.dphi_dc, P.zeta), ip(P.dphi_dx + dv, P.zeta)],
    ])


def assemble_K(v, c: float, grid: Grid, dv=None, singular_tol: float = 1e-10) -> np.ndarray:
    """The 2x2 modulation matrix ``K_c(v)``.

    Raises :class:`SingularModulationError` when ``|det K|`` drops below
    ``singular_tol * ||K||_F^2``.
    """
    v = grid.check(v)
    if dv is None:
        dv = spectral_derivative(v, grid, 1)
    K = _K(v, dv, _profiles(c, grid), grid)
    _check_singular(K, singular_tol)
    return K


def _check_singular(K, tol):
    scale = np.sum(K * K)
    if not np.isfinite(K).all() or abs(np.linalg.det(K)) <= tol * scale:
        raise SingularModulationError(f"K_c(v) is singular: {K.tolist()}")


def stochastic_coefficients(v, c: float, grid: Grid):
    """Fields ``(c_s, Omega_s) = -K_c(v)^{-1} [(phi_c + v) phi_c, (phi_c + v) zeta_c]``."""
    v = grid.check(v)
    P = _profiles(c, grid)
    K = _K(v, spectral_derivative(v, grid, 1), P, grid)
    _check_singular(K, 1e-10)
    u = P.phi + v
    rhs = np.stack([u * P.phi, u * P.zeta])
    cs, om = -np.linalg.solve(K, rhs)
    return cs, om


@dataclass
class ModulationCoefficients:
    c_s: np.ndarray
    omega_s: np.ndarray
    c_d0: float
    omega_d0: float
    c_f: float
    omega_f: float
    c_d: float
    omega_d: float
    c_drift: float = 0.0
    omega_drift: float = 0.0


FORMS = ("exact", "uncorrected")


def drift_coefficients(v, c: float, kernel: CovarianceKernel, sigma: float = 0.0,
                       epsilon: float = 0.0, f_t: float = 0.0,
                       form: str = "exact") -> ModulationCoefficients:
    """All modulation coefficients at the state ``(v, c)``.

    ``c_drift`` and ``omega_drift`` hold the totals
    ``c_d0 + eps f(t) c_f + sigma^2 c_d`` (and likewise for ``Omega``).

    The Ito drift of the remainder is

        Y_d = 1/2 ||Q^{1/2} Omega_s||^2 d_x^2 (phi_c + v) - 1/2 ||Q^{1/2} c_s||^2 d_c^2 phi_c
              + d_x((phi_c + v) Q Omega_s).

    The curvature term enters with a minus sign because ``v = T_xi u - phi_c``,
    and the last term is the cross variation of the shift ``xi`` with the
    multiplicative noise. ``form="uncorrected"`` flips the curvature sign and
    drops the cross variation; this variant is kept for comparison only, as it
    disagrees with the drift of the decomposition itself.
    """
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}")
    grid = kernel.grid
    v = grid.check(v)
    ip = lambda a, b: float(inner_product(a, b, grid))  # noqa: E731
    P = _profiles(c, grid)
    dv = spectral_derivative(v, grid, 1)
    K = _K(v, dv, P, grid)
    _check_singular(K, 1e-10)
    Kinv = np.linalg.inv(K)
    u = P.phi + v
    du = P.dphi_dx + dv

    c_s, om_s = -Kinv @ np.stack([u * P.phi, u * P.zeta])

    Nv = -spectral_derivative(v * v, grid, 1)
    c_d0, om_d0 = -Kinv @ [ip(Nv, P.phi), ip(Nv, P.zeta)]
    c_f, om_f = -Kinv @ [ip(u, P.phi), ip(u, P.zeta)]

    qc = float(q_norm_sq(kernel, c_s))
    qo = float(q_norm_sq(kernel, om_s))
    Yd = 0.5 * qo * (spectral_derivative(v, grid, 2) + P.d2phi_dx2)
    if form == "exact":
        Yd = Yd - 0.5 * qc * P.d2phi_dc2 + spectral_derivative(u * apply_Q(kernel, om_s), grid, 1)
    else:
        Yd = Yd + 0.5 * qc * P.d2phi_dc2

    def z_adjoint(g):
        # adjoint of Z(v,c)[h] = h u + <Omega_s, h> d_x u - <c_s, h> d_c phi
        return u * g + om_s * ip(g, du) - c_s * ip(g, P.dphi_dc)

    ito = [float(q_inner(kernel, z_adjoint(P.dphi_dc), c_s)),
           float(q_inner(kernel, z_adjoint(P.dzeta_dc), c_s))]
    c_d, om_d = (-Kinv @ [ip(Yd, P.phi), ip(Yd, P.zeta)]
                 - 0.5 * qc * Kinv @ [ip(v, P.d2phi_dc2), ip(v, P.d2zeta_dc2)]
                 - Kinv @ ito)
    s2, ef = sigma**2, epsilon * f_t
    return ModulationCoefficients(
        c_s, om_s, float(c_d0), float(om_d0), float(c_f), float(om_f), float(c_d), float(om_d),
        float(c_d0 + ef * c_f + s2 * c_d), float(om_d0 + ef * om_f + s2 * om_d),
    )


def apply_Z(h, v, c: float, grid: Grid, c_s=None, omega_s=None):
    """``Z(v, c)[h]``, the noise coefficient of the remainder equation."""
    if c_s is None or omega_s is None:
        c_s, omega_s = stochastic_coefficients(v, c, grid)
    u = sol.phi(c, grid) + v
    du = spectral_derivative(u, grid, 1)
    return (h * u + inner_product(omega_s, h, grid) * du
            - inner_product(c_s, h, grid) * sol.dphi_dc(c, grid))


def g_Q(c: float, kernel: CovarianceKernel, form: str = "exact") -> float:
    """Ito drift rate of the reduced amplitude equation, ``c_d(0, c)``."""
    return drift_coefficients(np.zeros(kernel.grid.n_points), c, kernel, form=form).c_d


class ReducedSDE:
    """Euler-Maruyama stepping of the reduced amplitude equation

        dc = [(4/3) c eps f(t) + sigma^2 g_Q(c)] dt + (2/9) c^{-1/2} sigma <phi_c^2, T_xi dW>.

    ``g_Q`` is interpolated on 64 Chebyshev nodes over ``[c_lo, c_hi]``;
    the interpolation error is checked against direct evaluation at
    construction. Values outside the interval are evaluated directly.
    """

    def __init__(self, cfg: SimConfig, c_lo: float | None = None, c_hi: float | None = None,
                 nodes: int = 64, check_tol: float = 1e-9, form: str = "exact"):
        self.cfg = cfg
        self.form = form
        budget = cfg.epsilon * cfg.forcing.l1_norm(cfg.t_end)
        if c_lo is None:
            c_lo = 0.25 * cfg.c_star * math.exp(-3 * budget)
        if c_hi is None:
            c_hi = 2.0 * cfg.c_star * math.exp(3 * budget)
        self.domain = (c_lo, c_hi)
        self._g = None
        self.interp_error = 0.0
        if cfg.sigma > 0:
            kern = cfg.kernel
            self._g = Chebyshev.interpolate(lambda cc: np.array([g_Q(x, kern, form) for x in cc]),
                                            nodes - 1, domain=[c_lo, c_hi])
            probe = c_lo + (c_hi - c_lo) * np.array([0.013, 0.31, 0.5 + 1 / 97, 0.77, 0.991])
            err = max(abs(self._g(p) - g_Q(p, kern, form)) for p in probe)
            self.interp_error = float(err)
            if err > check_tol:
                raise RuntimeError(f"g_Q interpolation error {err:.2e} exceeds {check_tol:.0e}")

    def g_Q(self, c):
        c = np.asarray(c, dtype=float)
        if self._g is None:
            return np.zeros_like(c)
        lo, hi = self.domain
        out = np.asarray(self._g(c), dtype=float)
        outside = (c < lo) | (c > hi)
        if np.any(outside):
            flat = np.atleast_1d(out)
            for i in np.flatnonzero(np.atleast_1d(outside)):
                flat[i] = g_Q(float(np.atleast_1d(c)[i]), self.cfg.kernel, self.form)
            out = flat.reshape(out.shape)
        return out

    def drift(self, c, t: float):
        cfg = self.cfg
        f_avg = cfg.forcing.integral(t, t + cfg.dt) / cfg.dt
        return 4.0 / 3.0 * c * cfg.epsilon * f_avg + cfg.sigma**2 * self.g_Q(c)

    def step(self, c, t: float, dW=None, xi=0.0):
        """Advance ``c`` (scalar or array) by one step; ``dW`` has the field shape.

        Entries with ``c <= 0`` after the step become ``nan``.
        """
        cfg = self.cfg
        c = np.asarray(c, dtype=float)
        new = c + self.drift(c, t) * cfg.dt
        if cfg.sigma > 0:
            if dW is None:
                raise ValueError("sigma > 0 requires a noise increment")
            safe = np.where(c > 0, c, 1.0)
            p = sol.phi(safe, cfg.grid, xi)
            pairing = inner_product(p * p, dW, cfg.grid)
            new = new + (2.0 / 9.0) / np.sqrt(safe) * cfg.sigma * pairing
        return np.where((new > 0) & (c > 0), new, np.nan)


@dataclass
class ReducedState:
    """Reduced amplitude at one instant; the phase is an optional diagnostic."""

    c_ap: float
    omega_ap: float = math.nan

    def __post_init__(self):
        if not self.c_ap > 0:
            raise ValueError("c_ap must be positive")


@dataclass
class ReducedPath:
    """Paths of the reduced equation, ``c_ap`` of shape ``(n_paths, n_steps + 1)``."""

    times: np.ndarray
    c_ap: np.ndarray
    exited: np.ndarray

    def state(self, step: int, path: int = 0) -> ReducedState:
        return ReducedState(float(self.c_ap[path, step]))


def integrate_reduced_sde(c0: float, cfg: SimConfig, noise_source: str = "independent",
                          shared=None, *, n_paths: int = 1, seed: int = 0,
                          n_steps: int | None = None) -> ReducedPath:
    """Integrate the reduced amplitude equation from ``c0``.

    ``noise_source="independent"`` draws fresh increments (stream 1 of the
    counter-based generator, keyed by ``(seed, path)``).
    ``noise_source="frame-coupled"`` consumes ``shared = (dW, xi)``, the PDE
    increments ``dW`` of shape ``(n_steps, N)`` (or ``(n_steps, n_paths, N)``)
    and the soliton positions ``xi`` of shape ``(n_steps,)`` at which they are
    read off.
    """
    if not c0 > 0:
        raise ValueError("c0 must be positive")
    red = ReducedSDE(cfg)
    if n_steps is None:
        n_steps = cfg.n_steps
    times = cfg.dt * np.arange(n_steps + 1)
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = c0
    c = np.full(n_paths, float(c0))
    if noise_source == "independent":
        stream = NoiseStream(cfg.kernel, seed, np.arange(n_paths), cfg.dt, stream=1) \
            if cfg.sigma > 0 else None
        for n in range(n_steps):
            dW = stream.increments(n) if stream is not None else None
            c = red.step(c, times[n], dW)
            out[:, n + 1] = c
    elif noise_source == "frame-coupled":
        if shared is None:
            raise ValueError("frame-coupled integration needs the shared increments")
        dWs, xis = shared
        xis = np.asarray(xis, dtype=float)
        for n in range(n_steps):
            c = red.step(c, times[n], dWs[n], xis[n])
            out[:, n + 1] = c
    else:
        raise ValueError(f"unknown noise source {noise_source!r}")
    exited = ~np.isfinite(out).all(axis=1)
    return ReducedPath(times, out, exited)


@dataclass
class ExitTimes:
    """First recorded times at which each condition fails; ``inf`` = not exited."""

    t_st: float = math.inf
    t_en: float = math.inf
    t_c: float = math.inf
    t_ap: float = math.inf

    def exited(self, which: str, horizon: float) -> bool:
        return getattr(self, which) < horizon


def first_failure(times, ok) -> float:
    """Smallest time at which ``ok`` is False (nan counts as failure)."""
    bad = np.flatnonzero(~np.asarray(ok, dtype=bool))
    return float(times[bad[0]]) if bad.size else math.inf


def exit_times(record, thresholds: dict, window: sol.AmplitudeWindow) -> ExitTimes:
    """Exit times of a trajectory record.

    ``thresholds`` keys: ``eta_H1w`` (bound on ``||v||_{H^1_w}``), ``eta_L2``
    (bound on ``||v||_{L^2}``) and ``lambda_ap`` (bound on ``|c - c_ap|``);
    missing keys leave the corresponding time at ``inf``.
    """
    t = np.asarray(record.times)
    with np.errstate(invalid="ignore"):
        out = ExitTimes()
        if "eta_H1w" in thresholds:
            out.t_st = first_failure(t, np.asarray(record.h1w_v) <= thresholds["eta_H1w"])
        if "eta_L2" in thresholds:
            out.t_en = first_failure(t, np.asarray(record.l2_v) <= thresholds["eta_L2"])
        c = np.asarray(record.c)
        out.t_c = first_failure(t, window.contains(c) & np.isfinite(c))
        if "lambda_ap" in thresholds:
            err = np.abs(c - np.asarray(record.c_ap))
            out.t_ap = first_failure(t, err <= thresholds["lambda_ap"])
    return out
